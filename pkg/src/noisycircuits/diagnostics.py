"""Information-theoretic measurements and closed-form bound evaluators.

Distances use the unnormalized 1-norm (sum of absolute differences, maximum
2) throughout; entropies and conditional mutual information are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import CircuitSpec, reseed_circuit
from .densesim import DensityPatch, DistributionTable, output_state, partial_trace
from .errors import InsufficientData, NormalizationError

E = math.e

CMI_CLIP = 1e-9
PINSKER_SLACK = 1e-6

#: enumerate measurement outcomes on the conditioning region exactly up to
#: this many strings; beyond it, sample outcomes instead
DBAR_ENUMERATION_CAP = 4096


# ---------------------------------------------------------------------------
# distances and entropies


def tvd(p: DistributionTable, q: DistributionTable) -> float:
    """Unnormalized 1-norm distance between two tables on the same sites."""
    if set(p.sites) != set(q.sites) or p.h != q.h:
        raise ValueError(f"site sets differ: {p.sites} vs {q.sites}")
    if q.sites != p.sites:
        q = q.marginal(p.sites)
    return float(np.abs(p.probs - q.probs).sum())


def tvd_to_uniform(p: DistributionTable) -> float:
    return float(np.abs(p.probs - 1.0 / p.probs.size).sum())


def shannon_entropy(probs: np.ndarray) -> float:
    """Entropy in nats with the 0 log 0 = 0 convention."""
    p = np.asarray(probs, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _partition_tensor(
    p: DistributionTable, a: Sequence[int], b: Sequence[int], c: Sequence[int]
) -> np.ndarray:
    """Marginal joint tensor reshaped to (|A| outcomes, |B| outcomes, |C|
    outcomes) after validating disjointness."""
    a, b, c = (tuple(sorted(int(s) for s in grp)) for grp in (a, b, c))
    groups = a + b + c
    if len(set(groups)) != len(groups):
        raise ValueError(f"tripartition overlaps: A={a} B={b} C={c}")
    if not set(groups) <= set(p.sites):
        raise ValueError("tripartition uses sites outside the table")
    t = p.marginal(groups).tensor
    h = p.h
    return t.reshape(h ** len(a), h ** len(b), h ** len(c))


def cmi(
    p: DistributionTable,
    a: Sequence[int],
    b: Sequence[int],
    c: Sequence[int],
) -> float:
    """Conditional mutual information I(A:C|B) in nats,
    H(AB) + H(BC) - H(B) - H(ABC); sites outside A,B,C are marginalized."""
    t = _partition_tensor(p, a, b, c)
    h_ab = shannon_entropy(t.sum(axis=2).reshape(-1))
    h_bc = shannon_entropy(t.sum(axis=0).reshape(-1))
    h_b = shannon_entropy(t.sum(axis=(0, 2)).reshape(-1))
    h_abc = shannon_entropy(t.reshape(-1))
    value = h_ab + h_bc - h_b - h_abc
    if value < -CMI_CLIP:
        raise NormalizationError(f"CMI evaluated to {value:.3e} < -1e-9")
    return max(value, 0.0)


def markov_gap(
    p: DistributionTable,
    a: Sequence[int],
    b: Sequence[int],
    c: Sequence[int],
) -> float:
    """1-norm distance ||P_ABC - P_AB P_C|B||_1 to the Markov surrogate.

    Where P(B=b) = 0 the conditional factor is set uniform; those terms carry
    zero mass so the choice does not affect the norm.
    """
    t = _partition_tensor(p, a, b, c)
    nc = t.shape[2]
    p_ab = t.sum(axis=2, keepdims=True)
    p_bc = t.sum(axis=0, keepdims=True)
    p_b = t.sum(axis=(0, 2), keepdims=True)
    cond = np.full_like(t, 1.0 / nc)
    np.divide(np.broadcast_to(p_bc, t.shape), p_b, out=cond, where=p_b > 0)
    return float(np.abs(t - p_ab * cond).sum())


@dataclass(frozen=True)
class TripartitionStats:
    """CMI, Markov gap, and the Pinsker bound for one tripartition."""

    a: tuple[int, ...]
    b: tuple[int, ...]
    c: tuple[int, ...]
    i_cmi: float
    markov_gap: float
    pinsker_rhs: float

    def __post_init__(self):
        if self.i_cmi < -CMI_CLIP:
            raise NormalizationError(f"CMI {self.i_cmi:.3e} below -1e-9")
        if not -1e-9 <= self.markov_gap <= 2.0 + 1e-9:
            raise NormalizationError(f"Markov gap {self.markov_gap} outside [0, 2]")
        if self.markov_gap > self.pinsker_rhs + PINSKER_SLACK:
            raise NormalizationError(
                f"Pinsker violated: gap {self.markov_gap:.6e} > "
                f"2 sqrt(CMI) = {self.pinsker_rhs:.6e}"
            )


def tripartition_stats(
    p: DistributionTable,
    a: Sequence[int],
    b: Sequence[int],
    c: Sequence[int],
) -> TripartitionStats:
    i = cmi(p, a, b, c)
    gap = markov_gap(p, a, b, c)
    return TripartitionStats(
        a=tuple(sorted(a)),
        b=tuple(sorted(b)),
        c=tuple(sorted(c)),
        i_cmi=i,
        markov_gap=gap,
        pinsker_rhs=2.0 * math.sqrt(i),
    )


# ---------------------------------------------------------------------------
# exponential-decay fits


@dataclass(frozen=True)
class MarkovLengthFit:
    """Least-squares fit of log(value) = log(c) - distance / xi."""

    xi: float  # math.inf when the data do not decay
    prefactor: float
    r_squared: float
    used: tuple[tuple[float, float], ...]
    excluded: tuple[tuple[float, float], ...]

    @property
    def inverse_xi(self) -> float:
        return 0.0 if math.isinf(self.xi) else 1.0 / self.xi


def fit_markov_length(
    points: Iterable[Sequence[float]], floor: float = 1e-3
) -> MarkovLengthFit:
    """Fit a decay length to (distance, value[, stderr]) points.

    Points with value below ``max(3 * stderr, floor)`` sit in the noise floor
    and are excluded (and reported).  Requires at least 3 usable points.
    Non-decaying data yield the ``xi = inf`` sentinel with the achieved R^2.
    """
    used: list[tuple[float, float]] = []
    excluded: list[tuple[float, float]] = []
    for pt in points:
        dist, value = float(pt[0]), float(pt[1])
        err = float(pt[2]) if len(pt) > 2 else 0.0
        if value > max(3.0 * err, floor):
            used.append((dist, value))
        else:
            excluded.append((dist, value))
    if len(used) < 3:
        raise InsufficientData(
            f"only {len(used)} points above the noise floor, need >= 3"
        )
    xs = np.array([d for d, _ in used])
    ys = np.log([v for _, v in used])
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(((ys - fitted) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-18 else 0.0)
    xi = -1.0 / slope if slope < 0 else math.inf
    return MarkovLengthFit(
        xi=float(xi),
        prefactor=float(np.exp(intercept)),
        r_squared=float(r2),
        used=tuple(used),
        excluded=tuple(excluded),
    )


# ---------------------------------------------------------------------------
# closed-form bounds


@dataclass(frozen=True)
class BoundReport:
    """A closed-form bound evaluation with its inputs echoed back."""

    kind: str
    inputs: Mapping[str, float]
    value: float | None
    status: str = "ok"  # "ok" or "not_applicable"
    extras: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", dict(self.inputs))
        object.__setattr__(self, "extras", dict(self.extras))


def bound_uniform(n: int, p: float, d: int) -> BoundReport:
    """Uniform-distance bound n (1-p)^d on the 1-norm distance between the
    output distribution and the uniform distribution."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"rate {p} outside [0, 1]")
    if n < 0 or d < 0:
        raise ValueError("n and d must be nonnegative")
    return BoundReport(
        kind="uniform_prop1",
        inputs={"n": n, "p": p, "d": d},
        value=float(n) * (1.0 - p) ** d,
    )


def cmi_threshold(h: int, k: int, degree: int) -> float:
    """Convergence threshold q_c = [2 h^k (1 + e(deg-1)) (2e(deg+1))]^-1 for
    the cluster-expansion CMI bound (q = 1 - p)."""
    return 1.0 / (2.0 * h**k * (1.0 + E * (degree - 1)) * (2.0 * E * (degree + 1)))


def bound_cmi_threshold(
    h: int,
    k: int,
    degree: int,
    q: float | None = None,
    d: int | None = None,
    boundary_a: int = 1,
    boundary_c: int = 1,
    l_ac: int = 0,
) -> BoundReport:
    """High-noise CMI bound: geometric series
    c' / (1 - q/q_c) * min(|dG A|, |dG C|) * (q/q_c)^l_AC for q < q_c.

    ``boundary_a``/``boundary_c`` are interaction-graph boundary edge counts
    (for D-dimensional brickwork these scale like d times the lattice
    boundary; ``d`` is echoed for reporting only).  The prefactor convention
    is c' = 4 e deg / (1 + e (deg - 1)); the threshold q_c is reported
    separately so comparisons do not depend on the constant packing.
    Reports not_applicable when q >= q_c.
    """
    q_c = cmi_threshold(h, k, degree)
    inputs = {
        "h": h,
        "k": k,
        "degree": degree,
        "boundary_a": boundary_a,
        "boundary_c": boundary_c,
        "l_ac": l_ac,
    }
    if d is not None:
        inputs["d"] = d
    if q is None:
        return BoundReport(
            kind="cmi_thresholded", inputs=inputs, value=None, extras={"q_c": q_c}
        )
    inputs["q"] = q
    if q >= q_c:
        return BoundReport(
            kind="cmi_thresholded",
            inputs=inputs,
            value=None,
            status="not_applicable",
            extras={"q_c": q_c},
        )
    ratio = q / q_c
    c_prime = 4.0 * E * degree / (1.0 + E * (degree - 1))
    value = c_prime / (1.0 - ratio) * min(boundary_a, boundary_c) * ratio**l_ac
    return BoundReport(
        kind="cmi_thresholded",
        inputs=inputs,
        value=value,
        extras={"q_c": q_c, "c_prime": c_prime},
    )


def potts_large_h(
    n: int, d: int, p: float, cross_section: float | None = None
) -> BoundReport:
    """Large-local-dimension limit of the pinned ferromagnet evaluation.

    The effective pinning rate is p' = 2p - p^2; the aligned partition
    function is bounded by (1 - p')^(d n) and the three misaligned ones
    vanish, so the connected-correlation bound equals the aligned bound.
    Given a cross-section area the implied decay length
    xi_p = -1 / (A ln(1 - p')) is reported too.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"rate {p} outside [0, 1]")
    p_prime = 2.0 * p - p * p
    z1 = (1.0 - p_prime) ** (d * n)
    extras = {
        "p_prime": p_prime,
        "z1_bound": z1,
        "z2": 0.0,
        "z3": 0.0,
        "z4": 0.0,
    }
    if cross_section is not None:
        if p_prime == 0.0:
            extras["xi_p"] = math.inf
        elif p_prime == 1.0:
            extras["xi_p"] = 0.0
        else:
            extras["xi_p"] = -1.0 / (cross_section * math.log(1.0 - p_prime))
    inputs = {"n": n, "d": d, "p": p}
    if cross_section is not None:
        inputs["cross_section"] = cross_section
    return BoundReport(kind="potts_large_h", inputs=inputs, value=z1, extras=extras)


# ---------------------------------------------------------------------------
# gate-averaged conditional trace distance (dense Monte-Carlo)


@dataclass(frozen=True)
class DbarEstimate:
    dbar: float
    stderr: float
    shots: int
    mode: str  # "enumerate" or "sample"
    values: tuple[float, ...] = field(repr=False, default=())


def _trace_norm(matrix: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(matrix)).sum())


def _conditional_ac_states(
    patch: DensityPatch, a: Sequence[int], b: Sequence[int], c: Sequence[int]
) -> np.ndarray:
    """Tensor of unnormalized post-measurement blocks: axes
    (b_out, ac_row, ac_col) where b_out indexes outcomes on B."""
    h = patch.h
    a, b, c = sorted(a), sorted(b), sorted(c)
    ordered = patch.reorder(tuple(b) + tuple(sorted(set(a) | set(c))))
    nb, nac = len(b), len(ordered.sites) - len(b)
    t = ordered.matrix.reshape(h**nb, h**nac, h**nb, h**nac)
    return np.einsum("iaib->iab", t)


def dbar_haar_mc(
    spec: CircuitSpec,
    a: Sequence[int],
    b: Sequence[int],
    c: Sequence[int],
    shots: int,
    seed: int = 0,
    budget: int | None = None,
) -> DbarEstimate:
    """Monte-Carlo estimate of the gate-averaged conditional trace distance

        E_gates sum_b p_b || rho_AC|b - rho_A|b (x) rho_C|b ||_1

    over independent draws of the circuit's seeded random gates.  Outcomes on
    B are enumerated exactly for up to 4096 strings, otherwise one outcome
    per draw is sampled from its marginal (mode recorded in the result).
    """
    a, b, c = sorted(int(s) for s in a), sorted(int(s) for s in b), sorted(int(s) for s in c)
    groups = a + b + c
    if len(set(groups)) != len(groups):
        raise ValueError("tripartition overlaps")
    h = spec.h
    enumerate_b = h ** len(b) <= DBAR_ENUMERATION_CAP
    ac_sites = sorted(set(a) | set(c))
    a_pos = [ac_sites.index(s) for s in a]
    c_pos = [ac_sites.index(s) for s in c]
    values = np.empty(shots)
    for shot in range(shots):
        inst = reseed_circuit(spec, (int(seed), shot))
        patch = output_state(inst, groups, budget)
        blocks = _conditional_ac_states(patch, a, b, c)
        if enumerate_b:
            total = 0.0
            for block in blocks:
                p_b = float(np.trace(block).real)
                if p_b < 1e-14:
                    continue
                total += p_b * _shot_distance(block / p_b, h, ac_sites, a_pos, c_pos)
            values[shot] = total
        else:
            p_out = np.maximum(np.trace(blocks, axis1=1, axis2=2).real, 0.0)
            p_out /= p_out.sum()
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), shot, 1]))
            idx = int(rng.choice(p_out.size, p=p_out))
            p_b = float(np.trace(blocks[idx]).real)
            values[shot] = _shot_distance(blocks[idx] / p_b, h, ac_sites, a_pos, c_pos)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(shots)) if shots > 1 else 0.0
    return DbarEstimate(
        dbar=mean,
        stderr=stderr,
        shots=shots,
        mode="enumerate" if enumerate_b else "sample",
        values=tuple(float(v) for v in values),
    )


def _shot_distance(
    rho_ac: np.ndarray,
    h: int,
    ac_sites: list[int],
    a_pos: list[int],
    c_pos: list[int],
) -> float:
    patch = DensityPatch(h=h, sites=tuple(ac_sites), matrix=rho_ac)
    rho_a = partial_trace(patch, [ac_sites[i] for i in a_pos]).matrix
    rho_c = partial_trace(patch, [ac_sites[i] for i in c_pos]).matrix
    product = DensityPatch(
        h=h,
        sites=tuple([ac_sites[i] for i in a_pos] + [ac_sites[i] for i in c_pos]),
        matrix=np.kron(rho_a, rho_c),
    ).reorder(tuple(ac_sites))
    return _trace_norm(patch.matrix - product.matrix)
