import statistics

import numpy as np
import pytest

import oracles
from catins.env import update_exit_and_entry
from catins.insurer import (
    adjust_loading, apply_exit_events, choose_loss_model, expected_profit, premium_quote,
    rebalance_reserves, reserve_per_policy, respond_to_catastrophe, supply_capacity, total_assets,
    update_loss_model,
)
from helpers import make_insurer, replace_insurers


class TestLossModel:
    def test_degenerate_error_gives_theta(self):
        m = choose_loss_model(np.random.default_rng(0), 0.02, [100.0, 200.0], error_range=(1.0, 1.0))
        assert m.p == 0.02

    def test_constant_exposures(self):
        m = choose_loss_model(np.random.default_rng(0), 0.02, [100.0, 100.0])
        assert (m.mu_loss, m.sigma_loss) == (100.0, 0.0)

    def test_two_point_population_std(self):
        m = choose_loss_model(np.random.default_rng(0), 0.02, [0.0, 200.0])
        assert m.mu_loss == 100.0
        assert m.sigma_loss == pytest.approx(statistics.pstdev([0.0, 200.0]), abs=1e-12)
        assert m.sigma_loss == pytest.approx(100.0, abs=1e-12)

    def test_error_draw_within_range(self):
        rng = np.random.default_rng(3)
        ps = [choose_loss_model(rng, 0.02, [1.0]).p for _ in range(200)]
        assert min(ps) >= 0.01 and max(ps) <= 0.03


class TestReserve:
    def test_median(self):
        assert reserve_per_policy(0.5, 100.0, 10.0) == pytest.approx(100.0, abs=1e-9)

    def test_against_erf_oracle(self):
        got = reserve_per_policy(0.8413, 100.0, 10.0)
        assert got == pytest.approx(oracles.normal_quantile(0.8413, 100.0, 10.0), abs=1e-6)
        assert got == pytest.approx(109.99815093614745, abs=1e-6)  # frozen oracle value
        assert got == pytest.approx(110.0, abs=0.01)

    @pytest.mark.parametrize("rho", [0.1, 0.9, 0.999])
    def test_degenerate_normal(self, rho):
        assert reserve_per_policy(rho, 100.0, 0.0) == 100.0

    @pytest.mark.parametrize("rho", [0.0, 1.0])
    def test_unbounded_quantile_rejected(self, rho):
        with pytest.raises(ValueError):
            reserve_per_policy(rho, 100.0, 10.0)

    def test_floored_at_zero(self):
        assert reserve_per_policy(0.01, 1.0, 100.0) == 0.0


class TestCatastropheResponse:
    def test_unbiased_insurer_unchanged(self):
        ins = respond_to_catastrophe(make_insurer(beta_prime=0.0, p=0.02, rho=0.9, gamma=0.5))
        assert (ins.loss_model.p, ins.rho, ins.gamma) == (0.02, 0.9, 0.5)

    def test_probability_rises(self):
        ins = respond_to_catastrophe(make_insurer(beta_prime=0.5, p=0.02))
        assert ins.loss_model.p == pytest.approx(0.03, abs=1e-12)
        assert ins.gamma == pytest.approx(0.25, abs=1e-12)

    def test_percentile_clamped(self):
        ins = respond_to_catastrophe(make_insurer(beta_prime=0.5, rho=0.9))
        assert ins.rho == 0.999


class TestAssetsAndCapacity:
    def test_assets(self):
        assert total_assets(make_insurer(kappa=0.0)) == 0.0
        ins = make_insurer(kappa=500000.0)
        ins.profits, ins.reserves = 100.0, 2000.0
        assert total_assets(ins) == 502100.0
        ins.profits = -100.0
        assert total_assets(ins) == 501900.0

    def test_capacity_examples(self):
        assert supply_capacity(make_insurer(gamma=0.5, kappa=1_000_000.0), 10000.0) == 50
        assert supply_capacity(make_insurer(gamma=0.0, kappa=1_000_000.0), 10000.0) == 0
        assert supply_capacity(make_insurer(gamma=1.0, kappa=9999.0), 10000.0) == 0

    def test_zero_reserve_rejected(self):
        with pytest.raises(ValueError):
            supply_capacity(make_insurer(), 0.0)


class TestPricing:
    def test_quote(self):
        ins = make_insurer(p=0.02, loading=0.5)
        assert premium_quote(ins, 0.3, 100000.0) == pytest.approx(900.0, abs=1e-9)
        ins.loading = 0.0
        assert premium_quote(ins, 0.3, 100000.0) == pytest.approx(600.0, abs=1e-9)
        assert premium_quote(ins, 0.3, 0.0) == 0.0

    def test_quote_caps(self):
        ins = make_insurer(p=0.05, loading=1.0)
        assert premium_quote(ins, 1.0, 1000.0, p_cap=0.02, loading_cap=0.2) == pytest.approx(24.0)

    def test_expected_profit(self):
        assert expected_profit(make_insurer(p=0.02, loading=0.5), 10000.0, 0.1) == pytest.approx(80.0)
        assert expected_profit(make_insurer(p=0.02, loading=0.0), 10000.0, 0.0) == 0.0
        assert expected_profit(make_insurer(p=0.02, loading=0.05), 10000.0, 0.1) == pytest.approx(-10.0)


class TestLoadingAdjustment:
    def test_sales_leave_loading(self):
        assert adjust_loading(make_insurer(loading=1.0), 0.5, 3).loading == 1.0

    def test_drift_to_mean(self):
        assert adjust_loading(make_insurer(loading=1.0), 0.5, 0, 0.1).loading == pytest.approx(0.95)

    def test_below_mean_unchanged(self):
        assert adjust_loading(make_insurer(loading=0.3), 0.5, 0).loading == 0.3


class TestExitAndEntry:
    def test_two_events_force_exit(self):
        ins = make_insurer(epsilon=0.8)
        ins.sales, ins.step_profit = 0, -1.0
        assert apply_exit_events(ins, 0.25)
        assert ins.epsilon == 1.0

    def test_insolvent_exits_immediately(self):
        ins = make_insurer(epsilon=0.1)
        ins.insolvent = True
        assert apply_exit_events(ins)

    def test_no_entry_at_zero_profit(self, world_factory):
        world = world_factory(m0=2)
        for ins in world.insurers:
            ins.sales, ins.step_profit, ins.epsilon = 1, 0.0, 0.0
        update_exit_and_entry(world)
        assert world.entries == 0 and len(world.insurers) == 2

    def test_entry_when_profitable(self, world_factory):
        world = world_factory(m0=2)
        for ins in world.insurers:
            ins.sales, ins.step_profit, ins.epsilon = 1, 10.0, 0.0
        update_exit_and_entry(world)
        assert world.entries == 1 and len(world.insurers) == 3
        assert world.insurers[-1].id == 2

    def test_exited_insurer_stops_selling(self, world_factory):
        world = world_factory(m0=1)
        ins = world.insurers[0]
        ins.sales, ins.step_profit, ins.epsilon = 0, -5.0, 0.6
        update_exit_and_entry(world)
        assert not ins.active
        assert all(j.id != ins.id for j in world.insurers if j.active)


class TestLossModelUpdate:
    def test_unchanged_society(self):
        ins = make_insurer(mu=100.0, sigma=0.0)
        ins.policies = [0, 1]
        update_loss_model(ins, [100.0, 100.0], False)
        before = ins.reserves
        update_loss_model(ins, [100.0, 100.0], False)
        assert ins.reserves == before == 200.0

    def test_mean_scales_with_wealth(self):
        ins = make_insurer()
        update_loss_model(ins, [50.0, 150.0], False)
        mu = ins.loss_model.mu_loss
        update_loss_model(ins, [100.0, 300.0], False)
        assert ins.loss_model.mu_loss == pytest.approx(2 * mu)

    def test_catastrophe_raises_probability(self):
        ins = make_insurer(p=0.02, beta_prime=0.2)
        update_loss_model(ins, [100.0, 300.0], True)
        assert ins.loss_model.p == pytest.approx(0.024)

    def test_rebalance_moves_capital(self):
        ins = make_insurer(kappa=1000.0, mu=100.0, sigma=0.0)
        ins.policies = [0, 1, 2]
        moved = rebalance_reserves(ins)
        assert moved == 300.0 and ins.reserves == 300.0 and ins.kappa == 700.0
        assert total_assets(ins) == 1000.0


def test_replace_insurers_helper(world_factory):
    world = world_factory(m0=2)
    replace_insurers(world, make_insurer(7))
    assert world.insurer_by_id(7).id == 7 and len(world.insurers) == 1
