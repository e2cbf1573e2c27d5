import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from cataclysm.economy import ops
from cataclysm.errors import InvalidParameterError, NonProductiveEconomyError


class TestLeontief:
    def test_two_sector_example(self):
        A = np.array([[0.1, 0.2], [0.3, 0.1]])
        x = ops.leontief_requirements(A, np.array([100.0, 100.0]))
        assert x == pytest.approx([146.6666666667, 160.0], rel=1e-9)

    def test_zero_matrix_is_identity(self):
        f = np.array([3.0, 1.0, 4.0])
        assert np.array_equal(ops.leontief_requirements(np.zeros((3, 3)), f), f)

    def test_zero_demand(self):
        A = np.array([[0.1, 0.2], [0.3, 0.1]])
        assert np.all(ops.leontief_requirements(A, np.zeros(2)) == 0.0)

    def test_nonproductive(self):
        with pytest.raises(NonProductiveEconomyError):
            ops.leontief_requirements(np.array([[0.5, 0.6], [0.6, 0.5]]), np.ones(2))

    def test_shape_and_sign_checks(self):
        with pytest.raises(InvalidParameterError):
            ops.leontief_requirements(np.zeros((2, 3)), np.ones(2))
        with pytest.raises(InvalidParameterError):
            ops.leontief_requirements(np.zeros((2, 2)), np.array([1.0, -1.0]))

    @pytest.mark.parametrize("seed", range(10))
    def test_random_against_lu(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.uniform(0, 1, (10, 10))
        A *= rng.uniform(0.1, 0.95) / np.max(np.abs(np.linalg.eigvals(A)))
        f = rng.uniform(0, 100, 10)
        ref = scipy.linalg.lu_solve(scipy.linalg.lu_factor(np.eye(10) - A), f)
        assert np.max(np.abs(ops.leontief_requirements(A, f) - ref) / ref) <= 1e-9


class TestPlanning:
    def test_smoothed_expectation(self):
        e, planned = ops.plan_production(np.array([100.0]), np.array([120.0]), 0.5, np.array([1e9]))
        assert e[0] == 110.0 and planned[0] == 110.0

    def test_capacity_binds(self):
        e, planned = ops.plan_production(np.array([100.0]), np.array([120.0]), 0.5, np.array([105.0]))
        assert e[0] == 110.0 and planned[0] == 105.0

    def test_labor_binds(self):
        _, planned = ops.plan_production(np.array([100.0]), np.array([100.0]), 0.5, np.array([200.0]), 90.0)
        assert planned[0] == 90.0


class TestLabor:
    def test_firing_is_immediate(self):
        assert ops.allocate_labor([5.0], [10.0], 0.0)[0] == 5.0

    def test_hiring_rationed(self):
        out = ops.allocate_labor([10.0, 10.0], [5.0, 5.0], 5.0)
        assert out == pytest.approx([7.5, 7.5])

    def test_released_workers_rehired(self):
        out = ops.allocate_labor([2.0, 8.0], [5.0, 5.0], 0.0)
        assert out == pytest.approx([2.0, 8.0])

    def test_halved_requirement_halves_employment(self):
        assert ops.allocate_labor([50.0], [100.0], 0.0)[0] == 50.0


def test_consumption_budget():
    assert float(ops.consumption_budget(100.0, 0.0, 0.8, 0.0)) == 80.0
    assert float(ops.consumption_budget(100.0, 50.0, 0.8, 0.1)) == pytest.approx(85.0)
    assert float(ops.consumption_budget(100.0, 0.0, 0.8, 0.0, committed_outlays=150.0)) == 0.0


def test_sector_demand():
    d = ops.sector_demand(np.array([100.0]), np.array([0.5, 0.5]), np.array([1.0, 2.0]))
    assert d[0] == pytest.approx([50.0, 25.0])


class TestInvestment:
    def test_at_desired_replaces_depreciation(self):
        order, draw = ops.investment_order(100.0, 100.0, 0.025, 0.25)
        assert float(order) == pytest.approx(2.5) and float(draw) == 0.0

    def test_no_accelerator(self):
        order, _ = ops.investment_order(80.0, 100.0, 0.025, 0.0)
        assert float(order) == pytest.approx(2.0)

    def test_gap_closed_by_nu(self):
        order, _ = ops.investment_order(80.0, 100.0, 0.025, 0.25)
        assert float(order) == pytest.approx(2.0 + 5.0)

    def test_backlog_adds_draw(self):
        order, draw = ops.investment_order(80.0, 100.0, 0.025, 0.25, backlog=20.0, draw_rate=0.3)
        assert float(draw) == pytest.approx(6.0)
        # backlog counts toward the position, so the accelerator stops chasing it
        assert float(order) == pytest.approx(2.0 + 6.0)

    def test_band_is_a_dead_zone(self):
        order, _ = ops.investment_order(100.0, 100.0, 0.025, 0.25, desired_low=95.0, desired_high=105.0)
        assert float(order) == pytest.approx(2.5)
        order, _ = ops.investment_order(90.0, 100.0, 0.025, 0.25, desired_low=95.0, desired_high=105.0)
        assert float(order) == pytest.approx(0.025 * 90 + 0.25 * 5)

    def test_never_negative(self):
        order, _ = ops.investment_order(200.0, 100.0, 0.025, 0.5)
        assert float(order) == 0.0


class TestRebuildRate:
    def test_no_deferral_is_constant(self):
        assert np.all(ops.rebuild_rate(0.3, np.array([0.0, 1.0, 50.0]), 100.0, 0.0) == 0.3)

    def test_deferral_scales_with_damaged_share(self):
        r = ops.rebuild_rate(0.3, np.array([0.0, 10.0, 100.0]), np.array([100.0, 90.0, 0.0]), 0.1)
        assert r[0] == 0.0
        assert r[1] == pytest.approx(0.3 * 0.1 / 0.2)
        assert r[2] == pytest.approx(0.3 / 1.1)

    def test_increasing_in_backlog(self):
        r = ops.rebuild_rate(0.3, np.linspace(0, 50, 20), 100.0, 0.08)
        assert np.all(np.diff(r) > 0)


class TestCredit:
    def test_own_funds_first_then_rationed(self):
        own, loans = ops.allocate_credit(np.array([50.0, 50.0]), np.array([10.0, 0.0]), 45.0)
        assert own == pytest.approx([10.0, 0.0])
        # loan demand 40 + 50 = 90 against headroom 45
        assert loans == pytest.approx([20.0, 25.0])

    def test_example(self):
        _, loans = ops.allocate_credit(np.array([40.0, 60.0]), np.zeros(2), 50.0)
        assert loans == pytest.approx([20.0, 30.0])

    def test_unconstrained(self):
        _, loans = ops.allocate_credit(np.array([40.0, 60.0]), np.zeros(2), 1e9)
        assert loans == pytest.approx([40.0, 60.0])


def test_delivery_ratio():
    assert ops.delivery_ratio(200.0, 100.0) == 0.5
    assert ops.delivery_ratio(50.0, 100.0) == 1.0
    assert ops.delivery_ratio(0.0, 0.0) == 1.0


def test_fiscal_update():
    assert ops.fiscal_update(100.0, 30.0, 20.0) == 110.0


def test_price_multiplier():
    assert float(ops.price_multiplier(1.0, 0.1, 0.85, 0.02)) == pytest.approx(1.015)
    assert float(ops.price_multiplier(1.0, 1.0, 0.85, 0.02)) == pytest.approx(1.02)
    assert float(ops.price_multiplier(0.0, 1.0, 0.85, 0.02)) == pytest.approx(0.98)
    assert float(ops.price_multiplier(0.85, 1.0, 0.85, 0.02)) == 1.0


class TestRouting:
    def test_no_shortfall_serves_shares(self):
        sector = np.array([0, 0, 1])
        out, out_s, obs = ops.route_demand(np.array([10.0, 5.0]), np.array([0.4, 0.6, 1.0]),
                                           np.array([100.0, 100.0, 100.0]), sector, 2, 0.5)
        assert out == pytest.approx([4.0, 6.0, 5.0])
        assert out_s == pytest.approx([10.0, 5.0])

    def test_substitution_moves_half_of_unmet(self):
        sector = np.array([0, 0])
        out, out_s, _ = ops.route_demand(np.array([10.0]), np.array([0.5, 0.5]),
                                         np.array([1.0, 100.0]), sector, 1, 0.5)
        assert out == pytest.approx([1.0, 5.0 + 2.0])

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), sub=st.floats(0.0, 1.0))
    def test_never_exceeds_demand_or_capacity(self, seed, sub):
        rng = np.random.default_rng(seed)
        sector = np.repeat(np.arange(3), 4)
        shares = rng.dirichlet(np.ones(4), 3).ravel()
        demand = rng.uniform(0, 100, 3)
        cap = rng.uniform(0, 30, 12)
        out, out_s, _ = ops.route_demand(demand, shares, cap, sector, 3, sub)
        assert np.all(out <= cap + 1e-12)
        assert np.all(out_s <= demand + 1e-9)
        assert out_s == pytest.approx(np.bincount(sector, out, minlength=3))
