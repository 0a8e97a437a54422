import math

import numpy as np
import pytest

from noisycircuits import (
    BudgetExceeded,
    CircuitSpec,
    Gate,
    backward_cone,
    brickwork_circuit,
    cone_cost,
    full_distribution,
    run_cone,
)
from noisycircuits.lightcone import DEFAULT_BUDGET, LightCone, check_budget


class TestBackwardCone:
    def test_depth_zero_cone_is_targets(self):
        spec = CircuitSpec(h=2, geometry=(5,), layers=(), noise=np.zeros((0, 5)))
        cone = backward_cone(spec, [2, 3])
        assert cone.targets == {2, 3}
        assert cone.active == (frozenset({2, 3}),)
        assert cone.gates == ()

    @pytest.mark.parametrize("depth", [1, 2, 3])
    def test_1d_width_bound(self, depth):
        spec = brickwork_circuit((15,), 2, depth, 0.1, kind="cshift")
        cone = backward_cone(spec, [7])
        assert cone.max_width <= 2 * depth + 1

    def test_explicit_hand_trace(self):
        # n=6, d=2 brickwork, targets {2}: layer 1 contributes (1,2); layer 0
        # then contributes (0,1) and (2,3)
        spec = brickwork_circuit((6,), 2, 2, 0.1, kind="cshift")
        cone = backward_cone(spec, [2])
        got = {(j, g.sites) for j, g in cone.gates}
        assert got == {(0, (0, 1)), (0, (2, 3)), (1, (1, 2))}
        assert cone.active == (
            frozenset({0, 1, 2, 3}),
            frozenset({1, 2}),
            frozenset({2}),
        )

    def test_monotone_in_targets(self):
        spec = brickwork_circuit((8,), 2, 2, 0.1, kind="cshift")
        small = backward_cone(spec, [3])
        large = backward_cone(spec, [3, 4])
        assert set(small.gates) <= set(large.gates)
        for a_small, a_large in zip(small.active, large.active):
            assert a_small <= a_large

    def test_idempotent(self):
        spec = brickwork_circuit((8,), 2, 2, 0.1, kind="cshift")
        cone = backward_cone(spec, [3, 4])
        again = backward_cone(spec, cone.targets)
        assert again == cone

    def test_structural_gates_widen_cone(self):
        # an identity gate still counts: cones depend on supports only
        spec = CircuitSpec(
            h=2, geometry=(4,), layers=((Gate((1, 2), "identity"),),), noise=0.0
        )
        cone = backward_cone(spec, [1])
        assert cone.initial_sites == {1, 2}

    def test_cone_marginal_matches_full_oracle(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            spec = brickwork_circuit((7,), 2, 2, 0.25, kind="haar", seed=seed)
            full = full_distribution(spec)
            targets = sorted(rng.choice(7, size=2, replace=False).tolist())
            got = run_cone(spec, backward_cone(spec, targets))
            expected = full.marginal(tuple(targets))
            assert np.abs(got.probs - expected.probs).max() < 1e-12


class TestConeCost:
    def test_width_three(self):
        cone = LightCone(
            targets=frozenset({0}),
            active=(frozenset({0, 1, 2}), frozenset({0})),
            gates=(),
        )
        assert cone_cost(cone, 2) == 6.0

    def test_width_zero(self):
        cone = LightCone(targets=frozenset(), active=(frozenset(),), gates=())
        assert cone_cost(cone, 2) == 0.0

    def test_budget_refusal_at_width_14(self):
        cone = LightCone(
            targets=frozenset({0}), active=(frozenset(range(14)),), gates=()
        )
        with pytest.raises(BudgetExceeded):
            check_budget(cone_cost(cone, 2), DEFAULT_BUDGET)

    def test_width_13_allowed(self):
        cone = LightCone(
            targets=frozenset({0}), active=(frozenset(range(13)),), gates=()
        )
        check_budget(cone_cost(cone, 2), DEFAULT_BUDGET)

    def test_budget_env_override(self, monkeypatch):
        monkeypatch.setenv("NOISYCIRCUITS_BUDGET", "16")
        cone = LightCone(
            targets=frozenset({0}), active=(frozenset(range(3)),), gates=()
        )
        with pytest.raises(BudgetExceeded):
            check_budget(cone_cost(cone, 2))
