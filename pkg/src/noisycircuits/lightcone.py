"""Backward light cones through a layered circuit.

A marginal of the output distribution on a target set depends only on the
gates and channels inside the targets' backward cone, so dense simulation can
be restricted to the cone.  Cones are computed structurally from gate
supports only: a gate whose content happens to be the identity still widens
the cone.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable

from .circuit import CircuitSpec, Gate
from .errors import BudgetExceeded

#: default ceiling on dense density-matrix entries (h ** (2*width))
DEFAULT_BUDGET = 2**28

BUDGET_ENV_VAR = "NOISYCIRCUITS_BUDGET"


def default_budget() -> int:
    """Dense-entry budget, overridable via the environment."""
    raw = os.environ.get(BUDGET_ENV_VAR)
    return int(raw) if raw else DEFAULT_BUDGET


@dataclass(frozen=True)
class LightCone:
    """Backward cone of a target site set.

    ``active[j]`` is the set of sites whose state after gate+noise layer
    ``j`` still matters for the targets; ``active[0]`` are the initial sites
    whose |0> inputs matter, and ``active[depth] == targets``.  ``gates``
    holds ``(layer, gate)`` pairs for the gates inside the cone.
    """

    targets: frozenset[int]
    active: tuple[frozenset[int], ...]
    gates: tuple[tuple[int, Gate], ...]

    @property
    def depth(self) -> int:
        return len(self.active) - 1

    @property
    def initial_sites(self) -> frozenset[int]:
        return self.active[0]

    @property
    def max_width(self) -> int:
        return max(len(a) for a in self.active)

    def layer_gates(self, layer: int) -> list[Gate]:
        return [g for j, g in self.gates if j == layer]


def backward_cone(spec: CircuitSpec, targets: Iterable[int]) -> LightCone:
    """Minimal structural backward cone of ``targets``.

    A gate is included iff its support intersects the active set of its
    layer; the active set then absorbs the gate support.
    """
    t = frozenset(int(s) for s in targets)
    if not t:
        raise ValueError("targets must be nonempty")
    if not all(0 <= s < spec.n for s in t):
        raise ValueError(f"targets {sorted(t)} outside [0, {spec.n})")
    active = [t]
    cone_gates: list[tuple[int, Gate]] = []
    current = t
    for j in range(spec.depth - 1, -1, -1):
        hit = [g for g in spec.layers[j] if set(g.sites) & current]
        cone_gates.extend((j, g) for g in hit)
        current = current | {s for g in hit for s in g.sites}
        active.append(current)
    active.reverse()
    cone_gates.reverse()
    return LightCone(targets=t, active=tuple(active), gates=tuple(cone_gates))


def cone_cost(cone: LightCone, h: int) -> float:
    """log2 of the dense density-matrix size for simulating the cone,
    ``h ** (2 * max active width)``."""
    return 2.0 * cone.max_width * math.log2(h)


def check_budget(cost_log2: float, budget: int | None = None) -> None:
    """Refuse dense patches at or above the entry budget."""
    limit = default_budget() if budget is None else budget
    if cost_log2 >= math.log2(limit):
        raise BudgetExceeded(cost_log2, limit)
