import pickle

import numpy as np
import pytest

from catins.config import ConfigError, ScenarioConfig, with_overrides
from catins.env import (
    RandomStreams, apply_catastrophe, apply_moral_hazard, build_world, draw_catastrophe,
    intervention_phase, market_phase, run_episode,
)
from catins.government import Intervention, apply_intervention
from catins.individual import GOVERNMENT, NO_PROVIDER
from catins.insurer import insurer_reserve_per_policy
from helpers import calm_biases, make_insurer, replace_insurers, set_households


def insure(world, i, ins, premium=0.0):
    world.pop.provider[i] = ins.id
    world.pop.premium[i] = premium
    ins.policies.append(i)


class TestCatastropheDraw:
    def test_degenerate(self):
        rng = np.random.default_rng(0)
        assert not any(draw_catastrophe(rng, 0.0) for _ in range(1000))
        assert all(draw_catastrophe(rng, 1.0) for _ in range(1000))

    def test_frequency(self):
        rng = np.random.default_rng(12345)
        freq = np.mean([draw_catastrophe(rng, 0.05) for _ in range(10000)])
        assert abs(freq - 0.05) <= 0.01

    def test_consumes_one_draw(self):
        a, b = np.random.default_rng(9), np.random.default_rng(9)
        draw_catastrophe(a, 0.3)
        b.random()
        assert a.random() == b.random()

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            draw_catastrophe(np.random.default_rng(0), 1.5)

    def test_streams_are_keyed(self):
        s = RandomStreams(4, episode=2)
        assert s.get(3, 1).random() == s.get(3, 1).random()
        assert s.get(3, 1).random() != s.get(3, 0).random()
        assert s.get(3, 1).random() != RandomStreams(4, episode=3).get(3, 1).random()


class TestCatastropheSettlement:
    def test_uninsured_loses(self, world_factory):
        world = world_factory(n=1)
        set_households(world, [1000.0], [0.3])
        apply_catastrophe(world)
        assert world.pop.W[0] == pytest.approx(700.0)
        assert world.log.catastrophe_losses == pytest.approx(300.0)

    def test_insured_made_whole(self, world_factory):
        world = world_factory(n=1)
        set_households(world, [1000.0], [0.3])
        ins = make_insurer(kappa=1e6)
        replace_insurers(world, ins)
        insure(world, 0, ins)
        apply_catastrophe(world)
        assert world.pop.W[0] == pytest.approx(1000.0)
        assert ins.claims_paid == pytest.approx(300.0) and ins.active

    def test_waterfall_and_insolvency(self, world_factory):
        world = world_factory(n=1)
        set_households(world, [1000.0], [0.3])
        ins = make_insurer(kappa=50.0)
        ins.reserves = 100.0
        replace_insurers(world, ins)
        insure(world, 0, ins)
        apply_catastrophe(world)
        assert ins.claims_paid == pytest.approx(150.0)
        assert ins.unmet == pytest.approx(150.0)
        assert world.log.insolvency == pytest.approx(150.0)
        assert ins.insolvent and not ins.active and ins.policies == []
        assert world.pop.W[0] == pytest.approx(850.0)
        assert world.pop.provider[0] == NO_PROVIDER

    def test_government_policy_paid(self, world_factory):
        world = world_factory(n=1)
        set_households(world, [1000.0], [0.3])
        world.pop.provider[0] = GOVERNMENT
        apply_catastrophe(world)
        assert world.pop.W[0] == pytest.approx(1000.0)
        assert world.government.debt == pytest.approx(300.0)


class TestMoralHazard:
    def test_uninsured_unchanged(self):
        pop = set_households(build_world(ScenarioConfig()), [1000.0], [0.5])
        assert apply_moral_hazard(pop, [False], True) == 0.0
        assert pop.lambda_R[0] == 0.5

    def test_subsidized_rises(self):
        pop = set_households(build_world(ScenarioConfig()), [1000.0], [0.5])
        delta = apply_moral_hazard(pop, [True], True, 1.02)
        assert pop.lambda_R[0] == pytest.approx(0.51)
        assert delta == pytest.approx(10.0)

    def test_clamped(self):
        pop = set_households(build_world(ScenarioConfig()), [1000.0], [0.999])
        apply_moral_hazard(pop, [True], True, 1.02)
        assert pop.lambda_R[0] == 1.0

    def test_not_benefiting_unchanged(self):
        pop = set_households(build_world(ScenarioConfig()), [1000.0], [0.5])
        apply_moral_hazard(pop, [True], [False])
        assert pop.lambda_R[0] == 0.5


class TestEpisodes:
    def test_no_risk_no_catastrophes(self):
        cfg = with_overrides(ScenarioConfig(), env={"theta": 0.0})
        for seed in range(3):
            trace = run_episode(cfg, None, seed=seed)
            assert not trace.catastrophe.any()
            assert trace.coverage[-1] < 0.01

    def test_zero_horizon_rejected(self):
        with pytest.raises(ConfigError):
            with_overrides(ScenarioConfig(), env={"T": 0})

    def test_identical_traces(self):
        cfg = with_overrides(ScenarioConfig(), env={"theta": 0.1, "T": 20})
        policy = [int(a) for a in np.random.default_rng(1).integers(0, 8, 20)]
        a = run_episode(cfg, policy, seed=5)
        b = run_episode(cfg, policy, seed=5)
        for name in ("wealth", "alpha", "pmax", "insured", "coverage", "gini", "rewards",
                     "treasury", "debt", "interventions"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        assert a.insurer_rows == b.insurer_rows

    def test_trace_length(self):
        cfg = with_overrides(ScenarioConfig(), env={"T": 7})
        assert run_episode(cfg, None).T == 7

    def test_fixed_policy_recorded(self):
        cfg = with_overrides(ScenarioConfig(), env={"T": 4})
        trace = run_episode(cfg, [3, 1])
        assert list(trace.interventions) == [3, 1, 0, 0]


def _run_steps(seed, theta=0.2, T=30):
    """Step a governed world by hand with random interventions."""
    cfg = with_overrides(ScenarioConfig(), env={"theta": theta, "T": T, "n": 40})
    world = build_world(cfg, seed=seed, government=True)
    rng = np.random.default_rng(seed)
    for t in range(T):
        world.t = t
        yield world, "start"
        market_phase(world)
        yield world, "market"
        intervention_phase(world, int(rng.integers(0, 8)))
        yield world, "end"


@pytest.mark.parametrize("seed", range(6))
def test_household_wealth_ledger_closes(seed):
    start = None
    for world, phase in _run_steps(seed):
        if phase == "start":
            start = world.pop.W.sum()
        elif phase == "end":
            change = world.pop.W.sum() - start
            scale = max(abs(start), 1.0)
            assert abs(change - world.flows.total()) <= 1e-9 * scale


@pytest.mark.parametrize("seed", range(6))
def test_treasury_ledger_closes(seed):
    world = None
    for world, phase in _run_steps(seed):
        pass
    gov = world.government
    net = sum(gov.inflows.values()) - sum(gov.outflows.values())
    expected = (gov.treasury - world.cfg.government.initial_treasury) - gov.debt
    assert abs(net - expected) <= 1e-9 * max(sum(gov.inflows.values()), 1.0)


@pytest.mark.parametrize("seed", range(4))
def test_world_invariants(seed):
    last_log = []
    for world, phase in _run_steps(seed):
        pop = world.pop
        assert np.all(pop.W >= -1e-9)
        assert np.all((pop.alpha >= 0) & (pop.alpha <= 1))
        assert np.all(np.diff(world.catastrophe_log) > 0)
        assert world.catastrophe_log[: len(last_log)] == last_log
        last_log = list(world.catastrophe_log)
        active = {ins.id for ins in world.insurers if ins.active}
        for i in np.flatnonzero(pop.provider >= 0):
            assert pop.provider[i] in active
            assert i in world.insurer_by_id(int(pop.provider[i])).policies
        for ins in world.insurers:
            if not ins.active:
                assert ins.policies == []
        if phase == "market":
            for ins in world.insurers:
                if ins.active and ins.policies:
                    expected = insurer_reserve_per_policy(ins) * len(ins.policies)
                    assert ins.reserves == pytest.approx(expected, rel=1e-12)


def test_no_action_changes_nothing():
    cfg = with_overrides(ScenarioConfig(), env={"theta": 0.2, "T": 10})
    world = build_world(cfg, seed=3, government=True)
    for t in range(5):
        world.t = t
        market_phase(world)
        before = pickle.dumps(world)
        fx = apply_intervention(world, Intervention.NoAction)
        assert pickle.dumps(world) == before
        assert fx.ids == [] and fx.cash_cost == 0.0
        intervention_phase(world, int(Intervention.Awareness))


def test_population_draw_respects_calibration():
    world = build_world(ScenarioConfig(), seed=11)
    pop = world.pop
    counts = np.bincount(pop.social_class, minlength=3)
    assert list(counts) == [50, 30, 20]
    wealth = ScenarioConfig().population.wealth
    for c in range(3):
        w = pop.W[pop.social_class == c]
        assert w.min() >= wealth[c][0] and w.max() <= wealth[c][1]
    assert len(world.insurers) == 5
    assert calm_biases(2).beta_u.shape == (2,)
