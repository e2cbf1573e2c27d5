import math

import numpy as np
import pytest
from scipy.optimize import brentq

from cataclysm.errors import CalibrationInfeasibleError, CalibrationRequiredError, InvalidParameterError
from cataclysm.hazard import (
    Cell,
    FloodEvent,
    HazardModel,
    calibrate,
    marginal_loss_fraction,
    read_inventory,
    sample_event,
    sample_event_for_loss,
    sample_events,
    scale_fractions,
    write_inventory,
)


@pytest.fixture(scope="module")
def hz(model):
    return model.hazard


def cell(i=0, protection=1.0, capital=(1.0,), dwellings=0.0, severity=1.0):
    return Cell(i, (float(i), 0.0), np.array(capital), dwellings, protection_T=protection, severity_scale=severity)


class TestMarginal:
    def test_protected_cell_is_dry(self):
        assert marginal_loss_fraction(cell(protection=300), 250, 0.05, 30) == 0.0

    def test_reference_period_gives_zero(self):
        assert marginal_loss_fraction(cell(), 30, 0.05, 30) == 0.0

    def test_logarithmic_value(self):
        assert marginal_loss_fraction(cell(), 250, 0.05, 30) == pytest.approx(0.05 * math.log(250 / 30), rel=1e-15)
        assert round(marginal_loss_fraction(cell(), 250, 0.05, 30), 4) == 0.1060

    def test_clamped_to_one(self):
        assert marginal_loss_fraction(cell(severity=100), 1e4, 0.05, 1) == 1.0

    def test_nondecreasing_in_T(self):
        ts = np.geomspace(1, 1e4, 200)
        vals = [marginal_loss_fraction(cell(protection=50), t, 0.08, 10) for t in ts]
        assert np.all(np.diff(vals) >= 0)

    def test_rejects_T_below_one(self):
        with pytest.raises(InvalidParameterError):
            marginal_loss_fraction(cell(), 0.5, 0.05, 30)


def test_cell_validation():
    with pytest.raises(InvalidParameterError):
        cell(capital=(-1.0,))
    with pytest.raises(InvalidParameterError):
        cell(protection=0.5)


class TestCalibration:
    def test_single_cell_closed_form(self):
        # ln T_local is a unit exponential, so E[min(k c ln T_local, 1)] = b (1 - exp(-1/b)) with b = k c
        c, target = 0.05, 0.3
        hz = HazardModel(cells=[cell()], loss_scale=c, reference_T=1.0,
                         calibration_targets=((100.0, target),), calibration_draws=4096)
        k = calibrate(hz).multiplier(100.0)
        b = brentq(lambda b: b * (1 - math.exp(-1 / b)) - target, 1e-6, 10)
        assert k == pytest.approx(b / c, rel=0.01)

    def test_deterministic(self, hz):
        again = calibrate(hz)
        assert again.multipliers == hz.multipliers

    def test_empty_grid(self):
        with pytest.raises(CalibrationInfeasibleError):
            calibrate(HazardModel(cells=[], loss_scale=0.05, reference_T=1.0))

    def test_target_above_unprotected_share(self):
        cells = [cell(0, protection=1e5, capital=(9.0,)), cell(1, capital=(1.0,))]
        hz = HazardModel(cells=cells, loss_scale=0.05, reference_T=1.0, calibration_targets=((100.0, 0.2),))
        with pytest.raises(CalibrationInfeasibleError, match="T=100"):
            calibrate(hz)

    def test_sampling_requires_calibration(self, hz):
        raw = HazardModel(cells=hz.cells, loss_scale=hz.loss_scale, reference_T=hz.reference_T)
        with pytest.raises(CalibrationRequiredError):
            sample_event(raw, 100.0, np.random.default_rng(0))

    def test_theta_nondecreasing(self, hz):
        thetas = [hz.theta_of_T(t) for t in (1, 10, 100, 1000, 1e4)]
        assert thetas[0] == 1.0
        assert np.all(np.diff(thetas) > 0)


class TestEvents:
    def test_protection_respected(self, hz):
        rng = np.random.default_rng(0)
        for T in (100.0, 250.0, 1500.0):
            for ev in sample_events(hz, T, 20, rng):
                assert np.all(ev.cell_loss_fraction[hz.protection > T] == 0.0)

    def test_conservation(self, hz):
        ev = sample_event(hz, 250.0, np.random.default_rng(1))
        cellwise = float(np.sum(ev.cell_loss_fraction * hz.cell_values))
        assert ev.total_direct_loss == pytest.approx(cellwise, rel=1e-12)
        assert ev.total_loss_fraction == pytest.approx(cellwise / hz.national_value, rel=1e-12)

    def test_determinism(self, hz):
        a = sample_event(hz, 250.0, np.random.default_rng(2))
        b = sample_event(hz, 250.0, np.random.default_rng(2))
        assert np.array_equal(a.cell_loss_fraction, b.cell_loss_fraction)
        assert a.total_direct_loss == b.total_direct_loss

    @pytest.mark.parametrize("seed", range(5))
    def test_total_nondecreasing_in_T(self, hz, seed):
        totals = [sample_event(hz, T, np.random.default_rng(seed)).total_direct_loss
                  for T in (50.0, 100.0, 250.0, 500.0, 1500.0, 5000.0)]
        assert np.all(np.diff(totals) >= -1e-9 * max(totals))

    def test_fractions_in_unit_interval(self, hz):
        for ev in sample_events(hz, 1500.0, 20, np.random.default_rng(3)):
            assert np.all((ev.cell_loss_fraction >= 0) & (ev.cell_loss_fraction <= 1))

    def test_event_for_exact_loss(self, hz):
        ev = sample_event_for_loss(hz, 0.05, np.random.default_rng(4))
        assert ev.total_loss_fraction == pytest.approx(0.05, rel=1e-10)

    def test_zero_loss_event(self, hz):
        ev = sample_event_for_loss(hz, 0.0, np.random.default_rng(4))
        assert ev.total_direct_loss == 0.0


class TestScaleFractions:
    def test_hits_target_with_saturation(self):
        f = np.array([0.5, 0.1, 0.0, 0.2])
        w = np.array([0.4, 0.3, 0.2, 0.1])
        out = scale_fractions(f, w, 0.55)
        assert out @ w == pytest.approx(0.55, rel=1e-12)
        assert out[0] == 1.0 and out[2] == 0.0
        assert out[1] == pytest.approx(0.3, rel=1e-9)
        assert np.all(out <= 1.0)

    def test_unreachable(self):
        with pytest.raises(CalibrationInfeasibleError):
            scale_fractions(np.array([0.1, 0.0]), np.array([0.5, 0.5]), 0.6)

    def test_preserves_pattern_ratios_below_saturation(self):
        f = np.array([0.02, 0.01, 0.04])
        out = scale_fractions(f, np.full(3, 1 / 3), 0.01)
        assert out / out[1] == pytest.approx(f / f[1], rel=1e-12)


def test_inventory_round_trip(tmp_path, hz):
    path = tmp_path / "cells.csv"
    write_inventory(path, hz.cells, hz.loss_scale, hz.reference_T)
    cells, ls, rt = read_inventory(path)
    assert len(cells) == hz.n_cells
    assert np.array_equal(ls, hz.loss_scale) and np.array_equal(rt, hz.reference_T)
    for a, b in zip(cells, hz.cells):
        assert a.id == b.id and a.coords == b.coords and a.protection_T == b.protection_T
        assert np.array_equal(a.capital_by_sector, b.capital_by_sector)
        assert a.dwelling_stock == b.dwelling_stock
    header = path.read_text().splitlines()[0].split(",")
    assert header[:6] == ["cell_id", "x", "y", "dwellings", "protection_T", "capital_s1"]


def test_flood_event_from_fractions(hz):
    fr = np.zeros(hz.n_cells)
    fr[3] = 0.5
    ev = FloodEvent.from_fractions(hz, 10.0, fr)
    assert ev.total_direct_loss == pytest.approx(0.5 * hz.cell_values[3])
    assert ev.cell_ids == hz.cell_ids
