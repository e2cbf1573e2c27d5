"""Behavioural building blocks of the quarterly step.

Each function is pure and vectorised over agents so it can be tested in
isolation and reused by the stepping loop.
"""

from __future__ import annotations

import numpy as np

from cataclysm.errors import InvalidParameterError, NonProductiveEconomyError

def leontief_requirements(A: np.ndarray, final_demand: np.ndarray) -> np.ndarray:
    """Gross output ``x`` with ``(I - A) x = f``.

    >>> leontief_requirements(np.zeros((2, 2)), np.array([100.0, 100.0]))
    array([100., 100.])
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    f = np.asarray(final_demand, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != f.shape[0]:
        raise InvalidParameterError("A must be square and match the final-demand length")
    if np.any(f < 0):
        raise InvalidParameterError("final demand must be nonnegative")
    if A.size and np.max(np.abs(np.linalg.eigvals(A))) >= 1.0:
        raise NonProductiveEconomyError("spectral radius of A is >= 1")
    try:
        x = np.linalg.solve(np.eye(A.shape[0]) - A, f)
    except np.linalg.LinAlgError as exc:
        raise NonProductiveEconomyError("I - A is singular") from exc
    return np.maximum(x, 0.0)


def update_expectations(expected, observed, weight: float):
    """Exponential smoothing of demand expectations."""
    return weight * np.asarray(observed, dtype=float) + (1.0 - weight) * np.asarray(expected, dtype=float)


def plan_production(expected, observed, weight, capacity, labor_capacity=np.inf):
    """Return ``(new_expected, planned)``.

    Planned output is the smoothed expectation capped by the capital ceiling
    and by the output the available labour could produce.
    """
    e = update_expectations(expected, observed, weight)
    planned = np.minimum(np.minimum(e, capacity), labor_capacity)
    return e, np.maximum(planned, 0.0)


def allocate_labor(required, current, unemployed: float):
    """New head counts per firm.

    Firms above their requirement fire down to it at once. Hiring needs are
    served from the unemployed pool plus the workers released this quarter,
    rationed proportionally when the pool is short.
    """
    required = np.maximum(np.asarray(required, dtype=float), 0.0)
    current = np.asarray(current, dtype=float)
    kept = np.minimum(current, required)
    released = float(np.sum(current - kept))
    wants = required - kept
    total_wants = float(wants.sum())
    pool = max(float(unemployed), 0.0) + released
    if total_wants <= pool or total_wants <= 0.0:
        return kept + wants
    return kept + wants * (pool / total_wants)


def consumption_budget(disposable, deposits, mpc, wealth_effect, committed_outlays=0.0):
    """Nominal consumption spending of each cohort.

    ``mpc`` times disposable income net of committed outlays (floored at zero)
    plus ``wealth_effect`` times deposits.

    >>> float(consumption_budget(100.0, 0.0, 0.8, 0.0))
    80.0
    """
    base = np.maximum(np.asarray(disposable, dtype=float) - committed_outlays, 0.0)
    return mpc * base + wealth_effect * np.maximum(np.asarray(deposits, dtype=float), 0.0)


def sector_demand(budget, shares, prices):
    """Real demand by sector for nominal budgets split by fixed shares."""
    budget = np.asarray(budget, dtype=float)
    return np.multiply.outer(budget, np.asarray(shares) / np.asarray(prices, dtype=float))


def investment_order(capital, desired, delta, nu, backlog=0.0, draw_rate=1.0,
                     pipeline=0.0, normal_pipeline=0.0, desired_low=None, desired_high=None):
    """Real investment order.

    Replacement of depreciation, an accelerator term closing a fraction
    ``nu`` of the gap between desired and actual capital position, and a
    draw on the reconstruction backlog. The capital position counts capital
    on order (``pipeline``) net of the pipeline a steady firm carries, plus
    the backlog that will be reordered anyway.

    With ``desired_low``/``desired_high`` the accelerator only closes the
    distance to the nearer edge of that band, so positions inside it trigger
    replacement alone. Returns ``(order, backlog_draw)``.
    """
    capital = np.asarray(capital, dtype=float)
    backlog = np.asarray(backlog, dtype=float)
    position = capital + pipeline - normal_pipeline + backlog
    lo = desired if desired_low is None else desired_low
    hi = desired if desired_high is None else desired_high
    gap = np.maximum(np.asarray(lo) - position, 0.0) + np.minimum(np.asarray(hi) - position, 0.0)
    draw = draw_rate * backlog
    order = np.maximum(delta * capital + nu * gap, 0.0) + draw
    return order, draw


def rebuild_rate(base_rate: float, backlog, stock, deferral: float):
    """Quarterly share of the reconstruction backlog reordered.

    Owners defer repairs of minor damage: the rate scales with the damaged
    share ``d = backlog / (stock + backlog)`` as ``base_rate * d / (d + deferral)``.
    ``deferral = 0`` gives the constant ``base_rate``.
    """
    backlog = np.asarray(backlog, dtype=float)
    if deferral <= 0.0:
        return np.full_like(backlog, base_rate)
    total = np.asarray(stock, dtype=float) + backlog
    d = np.divide(backlog, total, out=np.zeros_like(backlog), where=total > 0)
    return base_rate * d / (d + deferral)


def allocate_credit(requests, own_funds, headroom: float):
    """Finance orders from own funds first, then from loans.

    ``requests`` are nominal order values. Loan demand beyond own funds is
    rationed proportionally once it exceeds the bank's headroom.
    Returns ``(own_used, loans_granted)``.
    """
    requests = np.maximum(np.asarray(requests, dtype=float), 0.0)
    own = np.minimum(requests, np.maximum(np.asarray(own_funds, dtype=float), 0.0))
    need = requests - own
    total = float(need.sum())
    headroom = max(float(headroom), 0.0)
    if total <= headroom:
        return own, need
    return own, need * (headroom / total)


def delivery_ratio(orders: float, capacity: float) -> float:
    """Fraction of outstanding orders the suppliers can fill this quarter."""
    if orders <= 0.0:
        return 1.0
    return min(1.0, max(capacity, 0.0) / orders)


def fiscal_update(debt: float, expenditures: float, revenues: float) -> float:
    """Debt after one quarter's primary balance."""
    return debt + expenditures - revenues


def price_multiplier(utilization, eta: float, target: float, cap: float):
    """Quarterly sector price factor from capacity utilisation."""
    change = eta * (np.asarray(utilization, dtype=float) - target)
    return 1.0 + np.clip(change, -cap, cap)


def route_demand(demand, shares, capacity, sector, n_sectors, substitution, potential=None):
    """Distribute sector demand over firms.

    Each firm receives its fixed share of its sector's demand up to its
    current ``capacity``; a fraction ``substitution`` of the unmet part is
    offered to firms of the same sector pro rata to their spare ``potential``
    (capital-based) capacity, and served as far as current capacity allows.
    Firms observe their primary demand plus the overflow offered to them.
    Returns per-firm output, sector output and observed demand.
    """
    potential = capacity if potential is None else np.maximum(potential, capacity)
    primary = shares * demand[sector]
    served = np.minimum(primary, capacity)
    over = np.bincount(sector, primary - served, minlength=n_sectors)
    room = np.where(primary > served, 0.0, potential - served)
    room_s = np.bincount(sector, room, minlength=n_sectors)
    offered_s = np.minimum(substitution * over, room_s)
    frac = np.divide(offered_s, room_s, out=np.zeros(n_sectors), where=room_s > 0)
    offered = room * frac[sector]
    extra = np.minimum(offered, capacity - served)
    output = served + extra
    out_s = np.bincount(sector, output, minlength=n_sectors)
    return output, out_s, primary + offered
