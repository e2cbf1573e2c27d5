import numpy as np
import pytest

from cataclysm.errors import InvalidParameterError
from cataclysm.runner import (
    DiffMetrics,
    damage_sweep,
    ensemble,
    locate_threshold,
    oracle_parameters,
    run_baseline,
    run_pair,
    samuelson_oracle,
    worker_count,
)


@pytest.fixture(scope="module")
def pair(model):
    return run_pair(model, 11, loss_fraction=0.012)


def test_pair_shares_pre_shock_path(model, pair):
    k = 4 * model.config.pre_shock_years
    assert np.array_equal(pair.baseline.gdp_production[:k], pair.shocked.gdp_production[:k])
    assert not np.array_equal(pair.baseline.gdp_production[k:], pair.shocked.gdp_production[k:])


def test_baseline_of_pair_matches_standalone(model, pair):
    assert np.array_equal(run_baseline(model, 11).gdp_production, pair.baseline.gdp_production)


def test_event_size_is_exact(pair):
    assert pair.loss_fraction == pytest.approx(0.012, rel=1e-9)
    assert pair.report.total == pytest.approx(pair.event.total_direct_loss, rel=1e-9)


def test_series_length(model, pair):
    cfg = model.config
    assert len(pair.baseline.gdp_production) == 4 * (cfg.pre_shock_years + cfg.horizon_years)
    assert pair.baseline.year[0] == cfg.start_year


def test_exactly_one_event_spec(model):
    with pytest.raises(InvalidParameterError):
        run_pair(model, 0)
    with pytest.raises(InvalidParameterError):
        run_pair(model, 0, return_period=100.0, loss_fraction=0.01)


def test_zero_loss_gives_exact_zeros(model):
    m = ensemble(model, n_seeds=2, loss_fraction=0.0)
    for arr in (m.gdp_mean, m.gdp_std, m.unemployment_mean, m.debt_mean, m.gva_mean):
        assert not np.any(arr)


def test_single_run_has_zero_std(model):
    m = ensemble(model, n_seeds=1, loss_fraction=0.05, base_seed=4)
    assert not np.any(m.gdp_std)
    assert m.seeds == (4,)


def test_pre_shock_years_are_zero(model):
    m = ensemble(model, n_seeds=2, return_period=250.0)
    pre = m.years < m.shock_year
    assert not np.any(m.gdp_mean[pre]) and not np.any(m.debt_mean[pre])


def test_pool_size_does_not_change_results(model):
    a = ensemble(model, n_seeds=3, loss_fraction=0.03, workers=1)
    b = ensemble(model, n_seeds=3, loss_fraction=0.03, workers=3)
    assert np.array_equal(a.gdp_mean, b.gdp_mean)
    assert np.array_equal(a.gva_std, b.gva_std)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CATACLYSM_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count(1) == 1
    monkeypatch.setenv("CATACLYSM_THREADS", "x")
    with pytest.raises(InvalidParameterError):
        worker_count(4)
    monkeypatch.delenv("CATACLYSM_THREADS")
    assert worker_count(5) == 5


@pytest.mark.parametrize("grid", [[], [0.02, 0.01], [0.0, 0.01], [[0.01, 0.02]]])
def test_sweep_rejects_bad_grid(model, grid):
    with pytest.raises(InvalidParameterError):
        damage_sweep(model, grid, n_seeds=1)


def test_sweep_rejects_year_beyond_horizon(model):
    with pytest.raises(InvalidParameterError):
        damage_sweep(model, [0.01, 0.02], n_seeds=1, year=50)


def test_small_sweep_shapes(model):
    res = damage_sweep(model, [0.01, 0.05], n_seeds=2, year=2)
    assert res.mean.shape == (2,) and res.mean_by_year.shape == (2, len(res.years))
    assert res.inflection_point is None and res.argmax is None
    assert np.all(res.loss_share_of_gdp > 0)


class TestLocateThreshold:
    def test_logistic_bump(self):
        # logistic rise times a linear decline: convex, then concave, then a peak
        x = np.linspace(0.005, 0.12, 12)
        y = 3 / (1 + np.exp(-(x - 0.04) / 0.008)) - 40 * x
        infl, amax, _ = locate_threshold(x, y)
        true_fine = np.linspace(x[0], x[-1], 20001)
        ft = 3 / (1 + np.exp(-(true_fine - 0.04) / 0.008)) - 40 * true_fine
        assert amax == pytest.approx(true_fine[np.argmax(ft)], abs=0.01)
        assert infl is not None and infl < amax
        assert infl == pytest.approx(0.04, abs=0.005)

    def test_weighted_fit(self):
        x = np.linspace(0.005, 0.12, 12)
        y = 3 / (1 + np.exp(-(x - 0.04) / 0.008)) - 40 * x
        infl, amax, smooth = locate_threshold(x, y, np.full(12, 0.05))
        assert np.max(np.abs(smooth - y)) < 0.2
        assert infl < amax

    def test_monotone_curve_has_no_threshold(self):
        x = np.linspace(0.005, 0.12, 12)
        infl, amax, _ = locate_threshold(x, -10 * x)
        assert infl is None and amax is None

    def test_too_few_points(self):
        assert locate_threshold([0.01, 0.02, 0.03], [1.0, 2.0, 1.0]) == (None, None, None)


class TestSamuelson:
    def test_damped_oscillation(self):
        r = samuelson_oracle(0.5, 1.0)
        assert r.modulus == pytest.approx(np.sqrt(0.5), abs=1e-12)
        assert r.regime == "damped" and r.oscillatory

    def test_no_accelerator(self):
        r = samuelson_oracle(0.8, 0.0)
        assert r.modulus == pytest.approx(0.8)
        assert r.regime == "damped" and not r.oscillatory
        assert r.income[-1] == pytest.approx(1 / 0.2, rel=1e-4)

    def test_unit_boundary(self):
        r = samuelson_oracle(0.5, 2.0)
        assert r.modulus == pytest.approx(1.0, abs=1e-12)
        assert r.regime == "sustained"

    def test_explosive(self):
        assert samuelson_oracle(0.8, 4.0).regime == "explosive"

    def test_roots_match_numpy(self):
        for a, b in [(0.5, 1.0), (0.56, 0.6), (0.9, 3.0)]:
            r = samuelson_oracle(a, b)
            ref = np.sort_complex(np.roots([1, -a * (1 + b), a * b]))
            assert np.allclose(np.sort_complex(np.array(r.roots)), ref, atol=1e-12)

    def test_recursion(self):
        r = samuelson_oracle(0.6, 0.5, G=2.0, n=10, y0=1.0, y1=3.0)
        y = r.income
        assert y[2] == pytest.approx(2.0 + 0.6 * 1.5 * 3.0 - 0.3 * 1.0)

    def test_model_parameters(self, model):
        cfg = model.config.economy
        alpha, beta = oracle_parameters(cfg, model.state)
        assert alpha == pytest.approx(cfg.mpc * (1 - cfg.tax_rate_income))
        assert beta > 0
        assert samuelson_oracle(alpha, beta).regime == "damped"


def test_okun_uses_annual_growth_steps():
    years = np.arange(2013, 2018)
    cum = np.array([[0.0, -1.0, 0.0, 0.5, 0.5], [0.0, -2.0, -1.0, -1.0, -0.5]])
    unemp = -np.diff(cum, axis=1, prepend=0.0)
    z = np.zeros(5)
    m = DiffMetrics(years=years, shock_year=2014, gdp_mean=z, gdp_std=z, unemployment_mean=z,
                    unemployment_std=z, debt_mean=z, debt_std=z, gva_mean=z, gva_std=z,
                    samples={"gdp": cum, "unemployment": unemp})
    assert m.okun_correlation() == pytest.approx(-1.0)
