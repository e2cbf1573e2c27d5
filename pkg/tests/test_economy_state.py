import numpy as np
import pytest

from cataclysm.economy.config import EconomyConfig
from cataclysm.economy.state import init_economy
from cataclysm.economy.step import step_quarter
from cataclysm.errors import ConfigError, NonProductiveEconomyError
from cataclysm.runner import run_baseline
from cataclysm.validation import accounting_violations


def run(state, n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        state, o = step_quarter(state, rng)
        out.append(o)
    return state, out


class TestConfigValidation:
    def test_defaults_validate(self):
        EconomyConfig().validate()

    @pytest.mark.parametrize("field,value", [
        ("mpc", 1.5), ("disruption", -0.1), ("firm_rebuild_rate", 2.0),
        ("utilization_band", 0.9), ("repair_deferral", -1.0), ("max_leverage", 0.0),
        ("construction_sector", 10), ("capital_output_ratio", np.zeros(10)),
    ])
    def test_out_of_range(self, field, value):
        with pytest.raises(ConfigError) as exc:
            EconomyConfig(**{field: value}).validate()
        assert exc.value.key == field

    def test_shares_must_sum_to_one(self):
        with pytest.raises(ConfigError) as exc:
            EconomyConfig(consumption_shares=np.full(10, 0.2)).validate()
        assert exc.value.key == "consumption_shares"

    def test_wrong_matrix_shape(self):
        with pytest.raises(ConfigError):
            EconomyConfig(technical_coefficients=np.zeros((3, 3))).validate()

    def test_nonproductive_matrix(self):
        with pytest.raises(NonProductiveEconomyError):
            EconomyConfig(technical_coefficients=np.full((10, 10), 0.2)).validate()

    def test_non_numeric_list(self):
        with pytest.raises(ConfigError) as exc:
            EconomyConfig(labor_share=["a"] * 10)
        assert exc.value.key == "labor_share"

    def test_dict_round_trip(self):
        cfg = EconomyConfig()
        again = EconomyConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            EconomyConfig.from_dict({"no_such_knob": 1})
        assert exc.value.key == "no_such_knob"


def test_initial_state_is_balanced(model):
    st = model.state
    nfa = st.net_financial_assets()
    assert abs(sum(nfa.values())) <= 1e-9 * max(abs(v) for v in nfa.values())
    assert st.bank.loans_outstanding <= st.bank.credit_limit


def test_noise_free_economy_is_stationary():
    st = init_economy(EconomyConfig(demand_noise=0.0, sector_noise=0.0))
    _, out = run(st, 44)
    gdp = np.array([o.gdp_production for o in out])
    assert np.max(np.abs(gdp / gdp[0] - 1)) <= 1e-8
    assert out[-1].unemployment_rate == pytest.approx(0.05, abs=1e-8)


def test_baseline_growth_near_zero(model):
    growth = []
    for seed in range(5):
        gdp = run_baseline(model, seed).annual()["gdp"]
        growth.append(100 * ((gdp[-1] / gdp[0]) ** (1 / (len(gdp) - 1)) - 1))
    assert abs(np.mean(growth)) <= 0.2


def test_stock_flow_consistency_with_noise(model):
    ts = run_baseline(model, 3)
    v = accounting_violations(ts)
    assert v["gdp_identity"] <= 1e-6
    assert v["net_financial_assets"] <= 1e-9
    assert v["capacity_excess"] <= 1e-9
    assert v["credit_excess"] <= 1e-9


def test_single_sector_economy():
    cfg = EconomyConfig(
        sector_names=("all",), technical_coefficients=np.array([[0.0]]), labor_share=np.array([0.6]),
        capital_output_ratio=np.array([3.0]), consumption_shares=np.array([1.0]),
        government_shares=np.array([1.0]), investment_supply_shares=np.array([1.0]),
        construction_sector=0, manufacturing_sector=0, real_estate_sector=0, n_cells=20, n_cohorts=50,
    )
    _, out = run(init_economy(cfg), 12)
    for o in out:
        cig = o.consumption + o.investment + o.government_consumption
        assert o.gdp_production == pytest.approx(cig, rel=1e-9)
        assert o.gdp_expenditure == pytest.approx(cig, rel=1e-9)
        assert o.sectoral_gva[0] == pytest.approx(o.gdp_production, rel=1e-12)


def test_stepping_is_deterministic():
    a = run(init_economy(EconomyConfig(n_cells=20, n_cohorts=50)), 8, seed=5)[1]
    b = run(init_economy(EconomyConfig(n_cells=20, n_cohorts=50)), 8, seed=5)[1]
    assert [o.gdp_production for o in a] == [o.gdp_production for o in b]


def test_empty_grid_rejected():
    with pytest.raises(ConfigError):
        init_economy(EconomyConfig(), cells=[])
