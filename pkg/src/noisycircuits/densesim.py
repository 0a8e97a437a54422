"""Exact dense simulation of noisy (sub)circuits.

States are full density matrices over a small ordered set of qudits, evolved
exactly under gates and depolarizing channels with a final dephasing that
extracts the measurement distribution.  No trajectory averaging happens here;
the channels are applied exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import CircuitSpec, Gate, ball, gate_matrix
from .errors import NormalizationError, ZeroConditionalWarning
from .lightcone import LightCone, backward_cone, check_budget, cone_cost

HERMITICITY_ATOL = 1e-10
TRACE_ATOL = 1e-10
PROB_SUM_ATOL = 1e-9
NEGATIVE_CLIP_ATOL = 1e-9
ZERO_CONDITIONAL_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# distribution tables


@dataclass(frozen=True)
class DistributionTable:
    """Explicit probability vector over outcome strings of a site set.

    ``probs[idx]`` is the probability of the base-``h`` string whose digits
    follow the order of ``sites`` (big-endian: the first listed site is the
    most significant digit).
    """

    h: int
    sites: tuple[int, ...]
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.h ** len(self.sites),):
            raise ValueError(
                f"probs has shape {p.shape}, expected ({self.h ** len(self.sites)},)"
            )
        if p.min(initial=0.0) < -NEGATIVE_CLIP_ATOL:
            raise NormalizationError(
                f"probability entries as low as {p.min():.3e}"
            )
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > PROB_SUM_ATOL:
            raise NormalizationError(f"probabilities sum to {p.sum():.12f}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def tensor(self) -> np.ndarray:
        return self.probs.reshape((self.h,) * len(self.sites))

    @classmethod
    def uniform(cls, h: int, sites: Sequence[int]) -> "DistributionTable":
        m = len(sites)
        return cls(h=h, sites=tuple(sites), probs=np.full(h**m, 1.0 / h**m))

    @classmethod
    def point_mass(cls, h: int, sites: Sequence[int], outcome: int = 0) -> "DistributionTable":
        p = np.zeros(h ** len(sites))
        p[outcome] = 1.0
        return cls(h=h, sites=tuple(sites), probs=p)

    def marginal(self, sites: Sequence[int]) -> "DistributionTable":
        """Marginal over ``sites``, returned in the requested order.

        Doubles as a reordering when ``sites`` is a permutation of
        ``self.sites``.
        """
        sites = tuple(int(s) for s in sites)
        missing = [s for s in sites if s not in self.sites]
        if missing:
            raise ValueError(f"sites {missing} not in table {self.sites}")
        if len(set(sites)) != len(sites):
            raise ValueError("requested sites contain duplicates")
        keep_axes = [self.sites.index(s) for s in sites]
        drop_axes = tuple(
            ax for ax in range(len(self.sites)) if ax not in keep_axes
        )
        t = self.tensor.sum(axis=drop_axes) if drop_axes else self.tensor
        # axes of t are self.sites order restricted to kept sites
        kept_in_self_order = [s for s in self.sites if s in sites]
        perm = [kept_in_self_order.index(s) for s in sites]
        t = np.transpose(t, perm)
        return DistributionTable(h=self.h, sites=sites, probs=t.reshape(-1))

    def conditional_on(
        self, target: int, assignments: Mapping[int, int]
    ) -> tuple[np.ndarray, float]:
        """Unnormalized conditional vector for ``target`` given fixed
        outcomes on the other listed sites; returns (vector, event mass)."""
        idx: list = []
        for s in self.sites:
            if s == target:
                idx.append(slice(None))
            else:
                idx.append(int(assignments[s]))
        vec = np.array(self.tensor[tuple(idx)], dtype=float)
        return vec, float(vec.sum())

    def outcome_string(self, index: int) -> str:
        digits = []
        for _ in self.sites:
            digits.append(str(index % self.h))
            index //= self.h
        return "".join(reversed(digits))

    def to_csv(self, fh) -> None:
        fh.write("outcome,probability\n")
        for i, p in enumerate(self.probs):
            fh.write(f"{self.outcome_string(i)},{p!r}\n")


# ---------------------------------------------------------------------------
# density patches


@dataclass(frozen=True)
class DensityPatch:
    """Dense Hermitian trace-one operator over an ordered set of qudits."""

    h: int
    sites: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        m = np.asarray(self.matrix, dtype=complex)
        dim = self.h ** len(self.sites)
        if m.shape != (dim, dim):
            raise ValueError(f"matrix has shape {m.shape}, expected {(dim, dim)}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def zero_state(cls, h: int, sites: Sequence[int]) -> "DensityPatch":
        dim = h ** len(sites)
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 0] = 1.0
        return cls(h=h, sites=tuple(sites), matrix=m)

    def reorder(self, sites: Sequence[int]) -> "DensityPatch":
        """Same operator with qudit axes permuted into the given site order."""
        sites = tuple(int(s) for s in sites)
        if sorted(sites) != sorted(self.sites):
            raise ValueError(f"{sites} is not a permutation of {self.sites}")
        h, m = self.h, len(self.sites)
        perm = [self.sites.index(s) for s in sites]
        t = self.matrix.reshape((h,) * (2 * m))
        t = np.transpose(t, perm + [ax + m for ax in perm])
        return DensityPatch(h=h, sites=sites, matrix=t.reshape(h**m, h**m))

    def validate(self) -> None:
        """Check Hermiticity, trace and approximate positivity."""
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=HERMITICITY_ATOL):
            raise NormalizationError("density patch is not Hermitian to 1e-10")
        if abs(np.trace(m).real - 1.0) > TRACE_ATOL:
            raise NormalizationError(f"trace is {np.trace(m).real:.12f}")
        w = np.linalg.eigvalsh(m)
        if w.min() < -1e-9:
            raise NormalizationError(f"eigenvalue {w.min():.3e} below -1e-9")


def _apply_unitary_tensor(t: np.ndarray, u: np.ndarray, positions: Sequence[int], h: int) -> np.ndarray:
    """Contract ``u`` (h^k x h^k) into the given tensor axes."""
    k = len(positions)
    ut = u.reshape((h,) * (2 * k))
    t = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(positions)))
    return np.moveaxis(t, list(range(k)), list(positions))


def apply_unitary(patch: DensityPatch, u: np.ndarray, sites: Sequence[int]) -> DensityPatch:
    """rho <- U rho U^dagger with ``u`` acting on ``sites`` (in that order)."""
    m = len(patch.sites)
    try:
        rows = [patch.sites.index(s) for s in sites]
    except ValueError:
        raise ValueError(f"gate sites {tuple(sites)} not all in patch {patch.sites}")
    cols = [r + m for r in rows]
    t = patch.matrix.reshape((patch.h,) * (2 * m))
    t = _apply_unitary_tensor(t, u, rows, patch.h)
    t = _apply_unitary_tensor(t, u.conj(), cols, patch.h)
    dim = patch.h**m
    return DensityPatch(h=patch.h, sites=patch.sites, matrix=t.reshape(dim, dim))


def apply_gate(patch: DensityPatch, gate: Gate) -> DensityPatch:
    """Apply a circuit gate (materializing its unitary) to the patch."""
    return apply_unitary(patch, gate_matrix(gate, patch.h), gate.sites)


def apply_depolarizing(patch: DensityPatch, site: int, p: float) -> DensityPatch:
    """Exact single-site depolarizing channel
    ``rho <- (1-p) rho + (p/h) I_site (x) tr_site rho``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"rate {p} outside [0, 1]")
    if p == 0.0:
        return patch
    h, m = patch.h, len(patch.sites)
    q = patch.sites.index(site)
    t = patch.matrix.reshape((h,) * (2 * m))
    traced = np.trace(t, axis1=q, axis2=m + q)
    embedded = np.tensordot(np.eye(h) / h, traced, axes=0)
    embedded = np.moveaxis(embedded, [0, 1], [q, m + q])
    out = (1.0 - p) * t + p * embedded
    dim = h**m
    return DensityPatch(h=h, sites=patch.sites, matrix=out.reshape(dim, dim))


def partial_trace(patch: DensityPatch, keep: Sequence[int]) -> DensityPatch:
    """Reduce the patch to the sites in ``keep`` (in that order)."""
    keep = tuple(int(s) for s in keep)
    h, m = patch.h, len(patch.sites)
    keep_axes = [patch.sites.index(s) for s in keep]
    drop_axes = [ax for ax in range(m) if ax not in keep_axes]
    perm = keep_axes + drop_axes
    t = patch.matrix.reshape((h,) * (2 * m))
    t = np.transpose(t, perm + [ax + m for ax in perm])
    ksz, dsz = h ** len(keep_axes), h ** len(drop_axes)
    t = t.reshape(ksz, dsz, ksz, dsz)
    reduced = np.einsum("aibi->ab", t)
    return DensityPatch(h=h, sites=keep, matrix=reduced)


def dephase(patch: DensityPatch) -> DistributionTable:
    """Drop off-diagonal elements in the computational basis and return the
    diagonal as a distribution (tiny negatives clipped, renormalized)."""
    diag = np.real(np.diagonal(patch.matrix)).copy()
    if diag.min(initial=0.0) < -NEGATIVE_CLIP_ATOL:
        raise NormalizationError(
            f"diagonal entry {diag.min():.3e} below the -1e-9 clip tolerance"
        )
    diag = np.clip(diag, 0.0, None)
    total = diag.sum()
    if abs(total - 1.0) > PROB_SUM_ATOL:
        raise NormalizationError(f"diagonal sums to {total:.12f}, expected 1")
    return DistributionTable(h=patch.h, sites=patch.sites, probs=diag / total)


# ---------------------------------------------------------------------------
# circuit-level runs


def cone_state(
    spec: CircuitSpec, cone: LightCone, budget: int | None = None
) -> DensityPatch:
    """Pre-measurement reduced state on the cone's target sites.

    Simulates only the cone, tracing sites out as soon as later layers no
    longer touch them.
    """
    check_budget(cone_cost(cone, spec.h), budget)
    patch = DensityPatch.zero_state(spec.h, sorted(cone.initial_sites))
    for j in range(cone.depth):
        for gate in cone.layer_gates(j):
            patch = apply_gate(patch, gate)
        survivors = cone.active[j + 1]
        for site in patch.sites:
            if site in survivors:
                rate = float(spec.noise[j, site])
                if rate:
                    patch = apply_depolarizing(patch, site, rate)
        if set(patch.sites) - survivors:
            patch = partial_trace(patch, [s for s in patch.sites if s in survivors])
    return patch


def output_state(
    spec: CircuitSpec, sites: Iterable[int], budget: int | None = None
) -> DensityPatch:
    """Exact reduced output state (before dephasing) on ``sites``."""
    cone = backward_cone(spec, sites)
    return cone_state(spec, cone, budget)


def run_cone(
    spec: CircuitSpec, cone: LightCone, budget: int | None = None
) -> DistributionTable:
    """Exact joint output distribution on the cone's target sites,
    marginalized over all other sites (dephasing and partial trace commute
    on diagonals)."""
    return dephase(cone_state(spec, cone, budget))


def full_distribution(spec: CircuitSpec, budget: int | None = None) -> DistributionTable:
    """Brute-force exact output distribution over all sites (budget-guarded)."""
    cone = backward_cone(spec, range(spec.n))
    return run_cone(spec, cone, budget)


def conditional_distribution(
    spec: CircuitSpec,
    target: int,
    conditioned: Mapping[int, int],
    radius: int,
    budget: int | None = None,
    metric: str = "manhattan",
) -> DistributionTable:
    """Conditional distribution of ``target`` given the assigned outcomes
    inside the radius-``radius`` ball around it.

    Assignments outside the ball are ignored.  If the conditioning event has
    probability below 1e-12 the conditional is replaced by the uniform
    distribution and a :class:`ZeroConditionalWarning` is emitted.
    """
    if target in conditioned:
        raise ValueError(f"target site {target} already has an assigned outcome")
    region = ball(spec, target, radius, metric)
    assignments = {
        int(s): int(v) for s, v in conditioned.items() if s in region and s != target
    }
    joint_sites = sorted(set(assignments) | {target})
    joint = run_cone(spec, backward_cone(spec, joint_sites), budget)
    vec, mass = joint.conditional_on(target, assignments)
    if mass < ZERO_CONDITIONAL_FLOOR:
        warnings.warn(ZeroConditionalWarning(target, mass))
        vec = np.full(spec.h, 1.0 / spec.h)
    else:
        vec = vec / mass
    return DistributionTable(h=spec.h, sites=(target,), probs=vec)
