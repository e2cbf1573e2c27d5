import copy
import csv

import numpy as np
import pytest

from cataclysm.damage import ReliefPolicy, ReliefRule, apply_damage, relief_schedule, schedule_relief
from cataclysm.economy.config import EconomyConfig
from cataclysm.economy.state import init_economy
from cataclysm.errors import IncompatibleGridError, InvalidParameterError
from cataclysm.hazard import Cell, FloodEvent, sample_event_for_loss


@pytest.fixture
def one_cell():
    cfg = EconomyConfig(infrastructure_share=0.0, n_cohorts=1)
    cells = [Cell(0, (0.0, 0.0), np.full(10, 10.0), 50.0, protection_T=1.0)]
    return init_economy(cfg, cells)


def test_single_cell_total_loss(one_cell):
    ev = FloodEvent(1.0, np.array([1.0]), 150.0, 1.0, (0,))
    state, rep = apply_damage(one_cell, ev)
    assert rep.firms_total == pytest.approx(100.0)
    assert rep.households_total == pytest.approx(50.0)
    assert rep.government_total == 0.0
    assert np.all(state.firms.capital == 0.0)
    assert state.firms.reconstruction_backlog.sum() == pytest.approx(100.0)
    assert state.households.reconstruction_backlog.sum() == pytest.approx(50.0)


def test_financial_stocks_untouched(model):
    st = copy.deepcopy(model.state)
    before = st.net_financial_assets()
    ev = sample_event_for_loss(model.hazard, 0.05, np.random.default_rng(0))
    apply_damage(st, ev)
    assert st.net_financial_assets() == before


def test_conservation_against_event(model):
    st = copy.deepcopy(model.state)
    values = st.cell_values()
    ev = FloodEvent.from_fractions(model.hazard, 250.0,
                                   np.random.default_rng(1).uniform(0, 0.3, model.hazard.n_cells))
    _, rep = apply_damage(st, ev)
    assert rep.total == pytest.approx(float(ev.cell_loss_fraction @ values), rel=1e-12)
    assert rep.firm_capital_losses.shape == (st.n_sectors, len(st.cells))


def test_zero_event_changes_nothing(model):
    st = copy.deepcopy(model.state)
    k = st.firms.capital.copy()
    _, rep = apply_damage(st, FloodEvent.from_fractions(model.hazard, 1.0, np.zeros(model.hazard.n_cells)))
    assert rep.total == 0.0
    assert np.array_equal(st.firms.capital, k)


def test_incompatible_grid(model):
    st = copy.deepcopy(model.state)
    with pytest.raises(IncompatibleGridError):
        apply_damage(st, FloodEvent(10.0, np.zeros(3), 0.0, 0.0, (0, 1, 2)))
    n = len(st.cells)
    with pytest.raises(IncompatibleGridError):
        apply_damage(st, FloodEvent(10.0, np.zeros(n), 0.0, 0.0, tuple(range(1, n + 1))))


def test_fraction_out_of_range(model):
    st = copy.deepcopy(model.state)
    with pytest.raises(InvalidParameterError):
        apply_damage(st, FloodEvent(10.0, np.full(len(st.cells), 1.5), 0.0, 0.0, st.cell_ids))


class TestRelief:
    def report(self, one_cell):
        return apply_damage(one_cell, FloodEvent(1.0, np.array([1.0]), 150.0, 1.0, (0,)))[1]

    def test_full_compensation_single_quarter(self, one_cell):
        sched = relief_schedule(self.report(one_cell), ReliefPolicy(1.0, (1.0,)))
        assert sched.shape == (1, 1) and sched[0, 0] == pytest.approx(50.0)

    def test_capped_and_spread(self, one_cell):
        sched = relief_schedule(self.report(one_cell), ReliefPolicy(1 / 3, (0.5, 0.25, 0.25)))
        assert sched[:, 0] == pytest.approx([50 / 6, 50 / 12, 50 / 12])
        assert sched.sum() == pytest.approx(50 / 3)

    def test_no_compensation(self, one_cell):
        assert relief_schedule(self.report(one_cell), ReliefPolicy(0.0)).sum() == 0.0

    @pytest.mark.parametrize("cap,profile", [(1.5, (1.0,)), (-0.1, (1.0,)), (0.5, (0.5, 0.4)),
                                             (0.5, ()), (0.5, (1.5, -0.5))])
    def test_policy_validation(self, cap, profile):
        with pytest.raises(InvalidParameterError):
            ReliefPolicy(cap, profile)

    def test_rule_switches_cap_with_event_size(self):
        rule = ReliefRule()
        assert rule.policy_for(0.012).dwelling_compensation_cap == 1.0
        assert rule.policy_for(0.10).dwelling_compensation_cap == pytest.approx(1 / 3)

    def test_queue_merges(self, one_cell):
        st = one_cell
        st.government.relief_queue = np.zeros((0, st.households.n))
        schedule_relief(st, np.array([[1.0], [2.0]]))
        schedule_relief(st, np.array([[3.0]]))
        assert st.government.relief_queue[:, 0] == pytest.approx([4.0, 2.0])


def test_report_csv(tmp_path, one_cell):
    _, rep = apply_damage(one_cell, FloodEvent(1.0, np.array([1.0]), 150.0, 1.0, (0,)))
    path = tmp_path / "damage.csv"
    rep.write_csv(path)
    rows = list(csv.DictReader(path.open()))
    totals = {r["agent_class"]: float(r["loss"]) for r in rows if r["agent_class"].startswith("total_")}
    assert totals == pytest.approx({"total_government": 0.0, "total_firms": 100.0, "total_households": 50.0})
    firm = sum(float(r["loss"]) for r in rows if r["agent_class"] == "firm")
    assert firm == pytest.approx(100.0)
