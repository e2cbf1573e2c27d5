"""Translate a flood event into balance-sheet damage and a relief plan."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cataclysm.errors import IncompatibleGridError, InvalidParameterError
from cataclysm.hazard import FloodEvent

PROFILE_TOL = 1e-12


@dataclass(frozen=True)
class DamageReport:
    """Direct losses by agent; arrays follow the state's agent ordering."""

    firm_capital_losses: np.ndarray  # (sectors, cells)
    dwelling_losses: np.ndarray  # per cohort
    government_infrastructure_losses: np.ndarray  # per cell
    cell_ids: tuple[int, ...] = ()

    @property
    def firms_total(self) -> float:
        return float(self.firm_capital_losses.sum())

    @property
    def households_total(self) -> float:
        return float(self.dwelling_losses.sum())

    @property
    def government_total(self) -> float:
        return float(self.government_infrastructure_losses.sum())

    @property
    def total(self) -> float:
        return self.firms_total + self.households_total + self.government_total

    def totals(self) -> dict:
        return {"government": self.government_total, "firms": self.firms_total,
                "households": self.households_total}

    def write_csv(self, path: str | Path) -> None:
        """Long-format export: one row per nonzero loss entry plus class totals."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["agent_class", "sector", "cell_id", "cohort", "loss"])
            S, C = self.firm_capital_losses.shape
            ids = self.cell_ids or tuple(range(C))
            for s in range(S):
                for c in range(C):
                    v = self.firm_capital_losses[s, c]
                    if v:
                        w.writerow(["firm", s, ids[c], "", repr(float(v))])
            for c, v in enumerate(self.government_infrastructure_losses):
                if v:
                    w.writerow(["government", "", ids[c], "", repr(float(v))])
            for h, v in enumerate(self.dwelling_losses):
                if v:
                    w.writerow(["household", "", "", h, repr(float(v))])
            for k, v in self.totals().items():
                w.writerow([f"total_{k}", "", "", "", repr(v)])


@dataclass(frozen=True)
class ReliefPolicy:
    dwelling_compensation_cap: float = 1.0
    disbursement_profile: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        cap = float(self.dwelling_compensation_cap)
        if not 0.0 <= cap <= 1.0:
            raise InvalidParameterError(f"compensation cap must lie in [0, 1], got {cap}")
        prof = tuple(float(v) for v in self.disbursement_profile)
        if not prof or any(v < 0 for v in prof) or abs(sum(prof) - 1.0) > PROFILE_TOL:
            raise InvalidParameterError("disbursement profile must be nonnegative and sum to 1")
        object.__setattr__(self, "dwelling_compensation_cap", cap)
        object.__setattr__(self, "disbursement_profile", prof)


@dataclass(frozen=True)
class ReliefRule:
    """Chooses the compensation cap from the event size."""

    moderate_cap: float = 1.0
    severe_cap: float = 1.0 / 3.0
    severe_threshold: float = 0.03
    disbursement_profile: tuple[float, ...] = field(default=(1.0,))

    def policy_for(self, loss_fraction: float) -> ReliefPolicy:
        cap = self.moderate_cap if loss_fraction < self.severe_threshold else self.severe_cap
        return ReliefPolicy(cap, tuple(self.disbursement_profile))


def _check_grid(state, event: FloodEvent) -> np.ndarray:
    frac = np.asarray(event.cell_loss_fraction, dtype=float)
    n = len(state.cells)
    if frac.shape != (n,):
        raise IncompatibleGridError(f"event has {frac.size} cells, economy has {n}")
    if event.cell_ids and tuple(event.cell_ids) != state.cell_ids:
        raise IncompatibleGridError("event and economy cell ids differ")
    if np.any(frac < 0) or np.any(frac > 1):
        raise InvalidParameterError("cell loss fractions must lie in [0, 1]")
    return frac


def apply_damage(state, event: FloodEvent):
    """Destroy physical stocks cell by cell; returns ``(state, DamageReport)``.

    Each firm, cohort dwelling stock and cell infrastructure stock is scaled by
    ``1 - loss_fraction`` of its cell, and the destroyed amount is added to the
    owner's reconstruction backlog. Financial stocks are untouched. The state
    is modified in place.
    """
    frac = _check_grid(state, event)
    F, H, G = state.firms, state.households, state.government
    S, C = state.n_sectors, len(state.cells)

    f_loss = F.capital * frac[F.cell]
    F.capital = F.capital - f_loss
    F.reconstruction_backlog = F.reconstruction_backlog + f_loss

    h_loss = H.dwelling_stock * frac[H.cell]
    H.dwelling_stock = H.dwelling_stock - h_loss
    H.reconstruction_backlog = H.reconstruction_backlog + h_loss

    g_loss = G.infrastructure * frac
    G.infrastructure = G.infrastructure - g_loss
    G.infra_backlog = G.infra_backlog + g_loss

    firm_matrix = np.zeros((S, C))
    np.add.at(firm_matrix, (F.sector, F.cell), f_loss)
    report = DamageReport(firm_capital_losses=firm_matrix, dwelling_losses=h_loss,
                          government_infrastructure_losses=g_loss, cell_ids=state.cell_ids)
    return state, report


def relief_schedule(report: DamageReport, policy: ReliefPolicy) -> np.ndarray:
    """Transfers to cohorts, shape ``(quarters, cohorts)``.

    The total equals the cap times dwelling losses, spread over quarters by the
    disbursement profile and over cohorts in proportion to their losses.
    """
    losses = np.asarray(report.dwelling_losses, dtype=float)
    profile = np.asarray(policy.disbursement_profile, dtype=float)
    return np.outer(profile, policy.dwelling_compensation_cap * losses)


def schedule_relief(state, transfers: np.ndarray) -> None:
    """Queue transfers so that row ``k`` is paid in the ``k``-th coming quarter."""
    G = state.government
    transfers = np.atleast_2d(np.asarray(transfers, dtype=float))
    q = G.relief_queue
    n = max(len(q), len(transfers))
    merged = np.zeros((n, state.households.n))
    merged[: len(q)] += q
    merged[: len(transfers)] += transfers
    G.relief_queue = merged
