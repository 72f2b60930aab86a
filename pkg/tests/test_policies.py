"""Step machines and exact evaluators for the order-unaware policies."""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import all_orders, g0_grid, random_instance
from ocselect import (
    Box,
    DiscreteDistribution,
    Instance,
    PolicyError,
    PolicyState,
    opt_online,
    point_density,
    prophet_value,
    randomized_value,
    rho_732,
    run_policy_sampled,
    tva_exact,
    tva_step,
    tvd_exact,
    tvd_step,
)
from ocselect.densities import PHI
from ocselect.policies import CONSERVATIVE, TARGETED, TERMINATED

RISKY = DiscreteDistribution(((0.0, 0.5), (2.0, 0.5)))
UNIT = DiscreteDistribution(((1.0, 1.0),))
COIN = DiscreteDistribution(((0.0, 0.5), (1.0, 0.5)))
A = Box("A", UNIT)
B = Box("B", RISKY)
AB = Instance((A, B))


class TestTvaStep:
    def test_accept_at_new_target(self):
        state, decision = tva_step(PolicyState.initial(1.5), RISKY, 2.0)
        assert decision.accept
        assert state.mode == TERMINATED
        assert state.target == pytest.approx(1.0, abs=1e-9)

    def test_reject_below_target(self):
        state, decision = tva_step(PolicyState.initial(1.5), RISKY, 0.0)
        assert not decision.accept
        assert state.mode == TARGETED
        assert state.target == pytest.approx(1.0, abs=1e-9)

    def test_zero_target_accepts_anything(self):
        _, decision = tva_step(PolicyState.initial(0.0), RISKY, 0.0)
        assert decision.accept

    def test_terminated_state_rejects_stepping(self):
        state, _ = tva_step(PolicyState.initial(0.0), RISKY, 2.0)
        with pytest.raises(PolicyError):
            tva_step(state, RISKY, 2.0)


class TestTvdStep:
    def test_stays_targeted_when_future_covers(self):
        state, decision = tvd_step(PolicyState.initial(0.9), UNIT, [COIN], 1.0)
        assert decision.accept
        assert state.switch_stage is None
        assert state.target == 0.0

    def test_switches_on_dead_box(self):
        zero = DiscreteDistribution(((0.0, 1.0),))
        state, decision = tvd_step(PolicyState.initial(0.9), zero, [COIN], 0.0)
        assert state.switch_stage == 0
        assert state.mode in (CONSERVATIVE, TERMINATED)
        assert state.threshold == pytest.approx(1.0, abs=1e-12)
        assert not decision.accept

    def test_last_stage_with_positive_target_switches(self):
        state, decision = tvd_step(PolicyState.initial(0.8), COIN, [], 1.0)
        assert state.switch_stage == 0
        assert state.threshold == pytest.approx(1.0, abs=1e-12)
        assert decision.accept  # threshold over the lone box is 1.0 and v = 1

    def test_conservative_mode_is_permanent(self):
        zero = DiscreteDistribution(((0.0, 1.0),))
        state, _ = tvd_step(PolicyState.initial(0.9), zero, [COIN, COIN], 0.0)
        assert state.mode == CONSERVATIVE
        follow, decision = tvd_step(state, COIN, [COIN], 0.0)
        assert follow.mode == CONSERVATIVE
        assert follow.threshold == state.threshold
        assert not decision.accept


class TestTvaExact:
    def test_matched_target_is_met(self):
        assert tva_exact(AB, ("B", "A"), 1.5).total == pytest.approx(1.5, abs=1e-12)

    def test_zero_target_takes_first_box(self):
        assert tva_exact(AB, ("B", "A"), 0.0).total == pytest.approx(1.0, abs=1e-12)

    def test_consistency_at_intermediate_target(self):
        assert tva_exact(AB, ("B", "A"), 1.2).total >= 1.2 - 1e-9

    def test_overshoot_single_deterministic_box(self):
        solo = Instance((A,))
        assert tva_exact(solo, ("A",), 5.0).total == 0.0

    def test_targets_recorded_per_stage(self):
        res = tva_exact(AB, ("B", "A"), 1.5)
        assert res.targets is not None and len(res.targets) == 2
        assert res.targets[0] == pytest.approx(1.0, abs=1e-9)


class TestTvdExact:
    def test_equals_tva_below_opt(self):
        rng = np.random.default_rng(61)
        for _ in range(15):
            inst = random_instance(rng, int(rng.integers(1, 5)))
            for order in all_orders(inst)[:4]:
                opt = opt_online(inst, order).total
                for frac in (0.0, 0.3, 0.7, 1.0):
                    g0 = frac * opt
                    tva = tva_exact(inst, order, g0).total
                    tvd = tvd_exact(inst, order, g0).total
                    assert tvd == pytest.approx(tva, abs=1e-12)

    def test_single_risky_box_overshoot(self):
        solo = Instance((B,))
        res = tvd_exact(solo, ("B",), 2.0)
        assert res.switch_stage == 0
        assert res.total == pytest.approx(1.0, abs=1e-12)
        assert res.total >= max(1.0 - 2.0, 2.0 / 2.0) - 1e-9

    def test_zero_target_never_switches(self):
        res = tvd_exact(AB, ("B", "A"), 0.0)
        assert res.switch_stage is None
        assert res.total == pytest.approx(1.0, abs=1e-12)

    def test_detection_tie_stays_targeted(self):
        # After B the remaining expectation is exactly 1; g0 = 1.5 folds to
        # g_1 = 1 on B, a tie, which must NOT switch.
        res = tvd_exact(AB, ("B", "A"), 1.5)
        assert res.switch_stage is None
        assert res.total == pytest.approx(1.5, abs=1e-12)


class TestConsistencyRobustnessGuarantees:
    def test_consistency_and_robustness_sweep(self):
        rng = np.random.default_rng(71)
        for _ in range(20):
            inst = random_instance(rng, int(rng.integers(1, 5)))
            prophet = prophet_value(inst)
            for order in all_orders(inst)[:4]:
                opt = opt_online(inst, order).total
                for g0 in g0_grid(inst, points=12):
                    tva = tva_exact(inst, order, g0).total
                    if g0 <= opt:
                        assert tva >= g0 - 1e-9
                    elif g0 <= prophet:
                        assert tva >= prophet - g0 - 1e-9

    def test_detection_robustness(self):
        rng = np.random.default_rng(73)
        for _ in range(20):
            inst = random_instance(rng, int(rng.integers(1, 5)))
            prophet = prophet_value(inst)
            for order in all_orders(inst)[:4]:
                opt = opt_online(inst, order).total
                for g0 in g0_grid(inst, points=12):
                    if opt < g0 <= prophet:
                        tvd = tvd_exact(inst, order, g0).total
                        assert tvd >= max(prophet - g0, g0 / 2.0) - 1e-9

    def test_under_over_estimation_stagewise(self):
        rng = np.random.default_rng(79)
        for _ in range(20):
            inst = random_instance(rng, int(rng.integers(1, 5)))
            for order in all_orders(inst)[:4]:
                opt = opt_online(inst, order)
                for g0 in (0.5 * opt.total, opt.total, 1.5 * opt.total + 0.1):
                    targets = tva_exact(inst, order, g0).targets
                    assert targets is not None
                    for t, g in enumerate(targets):
                        if g0 <= opt.total:
                            assert g <= opt.per_stage[t + 1] + 1e-9
                        else:
                            assert g >= opt.per_stage[t + 1] - 1e-9

    def test_known_opt_is_achieved_exactly(self):
        rng = np.random.default_rng(83)
        for _ in range(20):
            inst = random_instance(rng, int(rng.integers(1, 5)))
            for order in all_orders(inst)[:4]:
                opt = opt_online(inst, order).total
                assert tva_exact(inst, order, opt).total == pytest.approx(
                    opt, abs=1e-9
                )

    def test_golden_ratio_floor_small_sweep(self):
        rng = np.random.default_rng(89)
        for _ in range(10):
            inst = random_instance(rng, int(rng.integers(1, 5)))
            g0 = prophet_value(inst) / PHI
            for order in all_orders(inst):
                opt = opt_online(inst, order).total
                if opt > 0:
                    ratio = tva_exact(inst, order, g0).total / opt
                    assert ratio >= 1.0 / PHI - 1e-9


class TestRunPolicySampled:
    def test_deterministic_instance_matches_exact(self):
        inst = Instance(
            (Box("x", UNIT), Box("y", DiscreteDistribution(((0.5, 1.0),))))
        )
        order = ("x", "y")
        rng = np.random.default_rng(1)
        exact = tva_exact(inst, order, 0.9).total
        for _ in range(10):
            assert run_policy_sampled("tva", 0.9, inst, order, rng) == exact

    def test_unreachable_target_returns_zero(self):
        solo = Instance((A,))
        rng = np.random.default_rng(2)
        assert all(
            run_policy_sampled("tva", 5.0, solo, ("A",), rng) == 0.0
            for _ in range(10)
        )

    @pytest.mark.parametrize("kind,param", [("sta", 1.0), ("tva", 1.4), ("tvd", 1.9)])
    def test_monte_carlo_agreement(self, kind, param):
        order = ("B", "A")
        if kind == "sta":
            from ocselect import sta_exact

            exact = sta_exact(AB, order, param).total
        else:
            evaluator = tva_exact if kind == "tva" else tvd_exact
            exact = evaluator(AB, order, param).total
        rng = np.random.default_rng(97)
        n = 20_000
        draws = [run_policy_sampled(kind, param, AB, order, rng) for _ in range(n)]
        mean = math.fsum(draws) / n
        spread = np.std(draws, ddof=1) / math.sqrt(n)
        assert abs(mean - exact) <= 4.0 * max(spread, 1e-9)

    def test_unknown_policy_kind_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(PolicyError):
            run_policy_sampled("nope", 1.0, AB, ("A", "B"), rng)


class TestRandomizedValue:
    def test_point_mass_equals_exact(self):
        spec = point_density(1.0 / PHI)
        got = randomized_value(AB, ("B", "A"), spec, grid_points=100, policy_kind="tva")
        want = tva_exact(AB, ("B", "A"), prophet_value(AB) / PHI).total
        assert got.value == want
        assert got.error_estimate == 0.0

    def test_rho_732_beats_gamma_on_both_orders(self):
        for order in (("A", "B"), ("B", "A")):
            opt = opt_online(AB, order).total
            got = randomized_value(AB, order, rho_732(), grid_points=400)
            assert got.value >= 0.732 * opt - got.error_estimate - 1e-6

    def test_refinement_consistency(self):
        rng = np.random.default_rng(101)
        inst = random_instance(rng, 3, max_atoms=3)
        order = tuple(sorted(inst.ids))
        coarse = randomized_value(inst, order, rho_732(), grid_points=10_000)
        fine = randomized_value(inst, order, rho_732(), grid_points=20_000)
        assert abs(coarse.value - fine.value) <= 1e-4

    def test_grid_floor_enforced(self):
        with pytest.raises(ValueError):
            randomized_value(AB, ("A", "B"), rho_732(), grid_points=50)
