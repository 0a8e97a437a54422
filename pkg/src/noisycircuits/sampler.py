"""Sequential qudit-by-qudit sampling from truncated local conditionals.

One outcome string is drawn from the product distribution whose i-th factor
is the conditional of site ``order[i]`` given the already-sampled outcomes
inside a radius-``l`` lattice ball around it.  With ``l`` at least the
lattice diameter this reproduces the exact output distribution by the Bayes
chain rule; at smaller ``l`` the truncation error decays with the Markov
length of the distribution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import CircuitSpec, ball
from .densesim import (
    DistributionTable,
    ZERO_CONDITIONAL_FLOOR,
    conditional_distribution,
    full_distribution,
    run_cone,
)
from .errors import BudgetExceeded, ZeroConditionalWarning
from .lightcone import backward_cone

#: largest number of outcome strings enumerated for an exact truncated
#: distribution before markov_scan falls back to empirical estimates
ENUMERATION_CAP = 2**22


@dataclass(frozen=True)
class SampleStep:
    site: int
    ball_sites: tuple[int, ...]
    conditional: tuple[float, ...]
    u: float
    outcome: int
    zero_conditional: bool = False


@dataclass(frozen=True)
class SampleTrace:
    """Record of one sequential sampling pass: site order, per-step
    conditionals and RNG draws, and the assembled outcome string."""

    h: int
    order: tuple[int, ...]
    outcomes: tuple[int, ...]  # indexed by site, not by order position
    steps: tuple[SampleStep, ...]
    radius: int
    seed: int

    @property
    def outcome_string(self) -> str:
        return "".join(str(x) for x in self.outcomes)


def _check_order(spec: CircuitSpec, order: Sequence[int] | None) -> tuple[int, ...]:
    if order is None:
        return tuple(range(spec.n))  # lexicographic raster over the lattice
    order = tuple(int(s) for s in order)
    if sorted(order) != list(range(spec.n)):
        raise ValueError(f"order {order} is not a permutation of [0, {spec.n})")
    return order


def suggested_radius(xi: float, n: int, c: float = 1.0, eps: float = 0.01) -> int:
    """Truncation radius ceil(xi * ln(n c / eps)) for a target error eps,
    given an (empirically fitted) Markov length xi and prefactor c."""
    if xi <= 0:
        return 0
    return max(0, math.ceil(xi * math.log(n * c / eps)))


def sample(
    spec: CircuitSpec,
    radius: int,
    order: Sequence[int] | None = None,
    seed: int = 0,
    budget: int | None = None,
    metric: str = "manhattan",
) -> SampleTrace:
    """Draw one outcome string; deterministic for fixed (spec, radius, order,
    seed).  Zero-probability conditioning events fall back to the uniform
    conditional and are flagged in the trace."""
    order = _check_order(spec, order)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    outcomes: dict[int, int] = {}
    steps: list[SampleStep] = []
    for site in order:
        region = ball(spec, site, radius, metric)
        used = tuple(s for s in order if s in outcomes and s in region)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ZeroConditionalWarning)
            table = conditional_distribution(
                spec, site, {s: outcomes[s] for s in used}, radius, budget, metric
            )
        zero_flag = any(isinstance(w.message, ZeroConditionalWarning) for w in caught)
        u = float(rng.random())
        cum = np.cumsum(table.probs)
        outcome = int(min(np.searchsorted(cum, u, side="right"), spec.h - 1))
        outcomes[site] = outcome
        steps.append(
            SampleStep(
                site=site,
                ball_sites=used,
                conditional=tuple(float(x) for x in table.probs),
                u=u,
                outcome=outcome,
                zero_conditional=zero_flag,
            )
        )
    return SampleTrace(
        h=spec.h,
        order=order,
        outcomes=tuple(outcomes[s] for s in range(spec.n)),
        steps=tuple(steps),
        radius=radius,
        seed=int(seed),
    )


def sampler_distribution(
    spec: CircuitSpec,
    radius: int,
    order: Sequence[int] | None = None,
    budget: int | None = None,
    metric: str = "manhattan",
) -> DistributionTable:
    """The exact truncated product distribution (not an empirical estimate).

    Built by multiplying every step's conditional along all h^n outcome
    strings, so exact truncation error against the brute-force distribution
    can be measured.  Feasible only for small systems.
    """
    order = _check_order(spec, order)
    n, h = spec.n, spec.h
    if h**n > ENUMERATION_CAP:
        raise BudgetExceeded(n * math.log2(h), ENUMERATION_CAP)
    full = np.ones((h,) * n)
    sampled: list[int] = []
    for site in order:
        region = ball(spec, site, radius, metric)
        used = sorted(s for s in sampled if s in region)
        joint_sites = sorted(set(used) | {site})
        joint = run_cone(spec, backward_cone(spec, joint_sites), budget)
        t = joint.tensor
        axis = joint_sites.index(site)
        mass = t.sum(axis=axis, keepdims=True)
        cond = np.full_like(t, 1.0 / h)
        np.divide(t, mass, out=cond, where=mass > ZERO_CONDITIONAL_FLOOR)
        shape = [1] * n
        for s in joint_sites:
            shape[s] = h
        full = full * cond.reshape(shape)
        sampled.append(site)
    return DistributionTable(h=h, sites=tuple(range(n)), probs=full.reshape(-1))


@dataclass(frozen=True)
class ScanPoint:
    radius: int
    tvd: float
    mode: str  # "exact" or "empirical"
    stderr: float
    trials: int


def _empirical_tvd(
    spec: CircuitSpec,
    reference: DistributionTable,
    radius: int,
    order: Sequence[int] | None,
    trials: int,
    seed: int,
    budget: int | None,
    metric: str,
) -> tuple[float, float]:
    counts = np.zeros(spec.h**spec.n)
    weights = spec.h ** np.arange(spec.n - 1, -1, -1)
    for t in range(trials):
        trace = sample(
            spec,
            radius,
            order,
            seed=_trial_seed(seed, radius, t),
            budget=budget,
            metric=metric,
        )
        counts[int(np.dot(trace.outcomes, weights))] += 1
    emp = counts / trials
    tvd = float(np.abs(emp - reference.probs).sum())
    # bootstrap over the multinomial of observed counts
    rng = np.random.default_rng(np.random.SeedSequence([seed, radius, 0xB007]))
    resampled = rng.multinomial(trials, emp, size=100) / trials
    boot = np.abs(resampled - reference.probs).sum(axis=1)
    return tvd, float(boot.std(ddof=1))


def _trial_seed(seed: int, radius: int, trial: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(radius), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


def markov_scan(
    spec: CircuitSpec,
    radii: Sequence[int],
    order: Sequence[int] | None = None,
    trials: int = 0,
    seed: int = 0,
    budget: int | None = None,
    metric: str = "manhattan",
) -> list[ScanPoint]:
    """Truncation error versus radius.

    For each radius the distance between the brute-force distribution and
    the truncated product is computed exactly when enumeration is feasible,
    otherwise estimated from ``trials`` sampled strings with a bootstrap
    standard error.
    """
    reference = full_distribution(spec, budget)
    points: list[ScanPoint] = []
    for radius in radii:
        try:
            truncated = sampler_distribution(spec, radius, order, budget, metric)
            tvd = float(np.abs(truncated.probs - reference.probs).sum())
            points.append(ScanPoint(radius, tvd, "exact", 0.0, 0))
        except BudgetExceeded:
            if trials <= 0:
                raise
            tvd, err = _empirical_tvd(
                spec, reference, radius, order, trials, seed, budget, metric
            )
            points.append(ScanPoint(radius, tvd, "empirical", err, trials))
    return points
