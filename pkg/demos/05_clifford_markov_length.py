"""Stabilizer Monte-Carlo: decay of the gate-averaged conditional trace
distance with region separation, and the fitted decay length versus noise.

This is a scaled-down version of the full scan (fewer rows and shots so it
finishes in about a minute); the acceptance suite runs the 10-row version.

Run:  python demos/05_clifford_markov_length.py
"""

from noisycircuits.clifford import dbar_clifford, markov_length_scan

print("single point: 6 rows, depth 2, p = 0.1, separation 3")
pt = dbar_clifford(rows=6, depth=2, p=0.1, l_ac=3, shots=300, seed=1)
print(f"  D = {pt.dbar:.4f} +- {pt.stderr:.4f}  ({pt.shots} shots, "
      f"grid {pt.rows}x{pt.cols})")

print("\ndecay curves and fits (6 rows, depth 2, 300 shots/point):")
points, fits = markov_length_scan(
    rows=6, depths=[2], ps=[0.05, 0.15], l_values=[1, 2, 3, 4, 5, 6],
    shots=300, seed=7,
)
for pt in points:
    print(f"  p={pt.p:.2f} l={pt.l_ac}: D = {pt.dbar:.4f} +- {pt.stderr:.4f}")
for f in fits:
    if f.fit is None:
        print(f"  p={f.p:.2f}: fit flagged ({f.note})")
    else:
        print(f"  p={f.p:.2f}: 1/xi = {f.fit.inverse_xi:.3f} "
              f"(R^2 = {f.fit.r_squared:.3f}, {len(f.fit.used)} points used)")
print("\nexpect the larger noise rate to decay faster (larger 1/xi).")
