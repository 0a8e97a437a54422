"""Conditional mutual information, the Markov gap, the Pinsker bound, and
the closed-form bound evaluators (threshold q_c and the large-dimension
pinned-ferromagnet forms).

Run:  python demos/04_information_diagnostics.py
"""

import numpy as np

from noisycircuits import (
    DistributionTable,
    bound_cmi_threshold,
    brickwork_circuit,
    cmi_threshold,
    full_distribution,
    potts_large_h,
    tripartition_stats,
)

spec = brickwork_circuit(geometry=(8,), h=2, depth=2, p=0.15, kind="haar", seed=21)
table = full_distribution(spec)

print("tripartition sweep A=[0,1], C=[6,7], B grows between them:")
print("  B              CMI (nats)   markov gap   2*sqrt(CMI)")
for nb in range(0, 5):
    b = list(range(2, 2 + nb))
    stats = tripartition_stats(table, [0, 1], b, [6, 7])
    print(f"  {str(b):<14} {stats.i_cmi:.6f}     "
          f"{stats.markov_gap:.6f}     {stats.pinsker_rhs:.6f}")

parity = np.zeros(8)
parity[[0b000, 0b011, 0b101, 0b110]] = 0.25
pt = DistributionTable(h=2, sites=(0, 1, 2), probs=parity)
stats = tripartition_stats(pt, [0], [1], [2])
print(f"\nparity distribution: I(A:C|B) = {stats.i_cmi:.6f} = ln 2, "
      f"gap = {stats.markov_gap:.3f} <= {stats.pinsker_rhs:.3f}")

print("\ncluster-expansion threshold and bound (q = 1 - p):")
q_c = cmi_threshold(h=2, k=2, degree=4)
print(f"  q_c(h=2, k=2, degree=4) = {q_c:.6e}")
for ratio in (0.25, 0.5, 0.9):
    report = bound_cmi_threshold(2, 2, 4, q=ratio * q_c, boundary_a=6,
                                 boundary_c=6, l_ac=8)
    print(f"  q = {ratio:.2f} q_c, l_AC=8: bound = {report.value:.3e}")
print(f"  q = 2 q_c: {bound_cmi_threshold(2, 2, 4, q=2 * q_c).status}")

print("\nlarge-dimension pinned-ferromagnet closed forms:")
for n, d, p in [(2, 1, 0.5), (6, 3, 0.1), (6, 3, 0.3)]:
    report = potts_large_h(n, d, p, cross_section=d)
    xi = report.extras["xi_p"]
    print(f"  n={n} d={d} p={p}: p' = {report.extras['p_prime']:.4f}, "
          f"aligned bound = {report.value:.3e}, xi_p = {xi:.3f}")
