"""One quarter of the economy: production, markets, payments, accounts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cataclysm.economy import ops
from cataclysm.economy.state import EconomyState


@dataclass(frozen=True)
class QuarterOutcome:
    quarter: int
    gdp_production: float
    gdp_expenditure: float
    sectoral_gva: np.ndarray
    unemployment_rate: float
    debt_to_gdp: float
    price_index: float
    consumption: float = 0.0
    investment: float = 0.0
    government_consumption: float = 0.0
    nominal_gdp: float = 0.0
    loans: float = 0.0
    credit_limit: float = 0.0
    capacity_excess: float = 0.0  # max over firms of output minus ceiling, <= 0
    net_financial_assets: float = 0.0
    gross_financial_scale: float = 1.0


@dataclass
class _Flows:
    """Quarter flows needed by the national accounts."""

    output: np.ndarray
    intermediate: np.ndarray
    cons_delivered: np.ndarray
    inv_delivered: np.ndarray
    gov_delivered: np.ndarray
    nominal_gdp: float
    capacity_excess: float


def _solve_production(A, f_req, shares, capacity, sector, S, substitution, potential=None,
                      tol=1e-13, max_iter=500):
    """Greatest fixed point of ``x = X(Ax + f)`` where ``X`` routes demand to firms.

    Intermediate demand is served before final demand. If capacity shortfalls
    leave a sector unable to cover its intermediate sales, final demand is
    scaled down uniformly until every sector delivers a nonnegative amount.
    """
    def iterate(f):
        x = np.linalg.solve(np.eye(S) - A, f)
        out = obs = None
        for _ in range(max_iter):
            d = A @ x + f
            out, x_new, obs = ops.route_demand(d, shares, capacity, sector, S, substitution, potential)
            if np.max(np.abs(x_new - x)) <= tol * max(1.0, np.max(np.abs(x_new))):
                x = x_new
                break
            x = x_new
        return out, x, obs

    out, x, obs = iterate(f_req)
    net = x - A @ x
    if np.all(net >= -1e-12 * max(1.0, x.max())):
        return out, x, obs
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        o, xm, ob = iterate(f_req * mid)
        if np.all(xm - A @ xm >= 0):
            lo = mid
        else:
            hi = mid
    out, x, obs = iterate(f_req * lo)
    return out, x, obs


def step_quarter(state: EconomyState, rng: np.random.Generator):
    """Advance ``state`` one quarter in place; return ``(state, QuarterOutcome)``."""
    cfg = state.config
    F, Hh, G, B = state.firms, state.households, state.government, state.bank
    S = state.n_sectors
    A = state.A
    p = state.prices
    sec = F.sector
    kappa = state.kappa
    u_star = cfg.target_utilization
    re = cfg.real_estate_sector
    ishare = cfg.investment_supply_shares

    # noise is drawn first and in fixed amounts so paired runs share streams
    shock = rng.standard_normal(S + 1)
    state.noise_level = cfg.demand_persistence * state.noise_level + cfg.demand_noise * shock[0]
    sector_tilt = np.exp(cfg.sector_noise * shock[1:])

    # stocks: depreciation, then capital delivered last quarter
    F.capital = F.capital * (1.0 - cfg.depreciation) + F.in_transit
    F.in_transit = np.zeros_like(F.in_transit)
    Hh.dwelling_stock = Hh.dwelling_stock * (1.0 - cfg.dwelling_depreciation) + Hh.in_transit
    Hh.in_transit = np.zeros_like(Hh.in_transit)
    G.infrastructure = G.infrastructure * (1.0 - cfg.depreciation) + G.infra_in_transit
    G.infra_in_transit = np.zeros_like(G.infra_in_transit)
    p_inv = state.investment_price()

    # scheduled relief lands at the start of the quarter
    if len(G.relief_queue):
        relief = G.relief_queue[0].copy()
        G.relief_queue = G.relief_queue[1:]
    else:
        relief = np.zeros(Hh.n)
    Hh.deposits = Hh.deposits + relief
    Hh.earmarked = Hh.earmarked + relief

    # production plan and labour
    ceiling = F.capital / kappa[sec]
    # damaged plants run at their intact share until rebuilt
    lost = np.divide(F.reconstruction_backlog, F.capital + F.reconstruction_backlog,
                     out=np.zeros_like(F.capital), where=F.reconstruction_backlog > 0)
    intact = 1.0 - cfg.disruption * lost
    F.expected_demand, planned = ops.plan_production(
        F.expected_demand, F.observed_demand, cfg.expectation_weight, ceiling)
    planned = planned * intact
    lab = state.labor_coeff[sec]
    lf_total = float(Hh.labor_force.sum())
    unemployed = lf_total - float(F.employees.sum())
    F.employees = ops.allocate_labor(lab * planned, F.employees, unemployed)
    employment = float(F.employees.sum())
    Hh.employed = Hh.labor_force * (employment / lf_total)
    capacity = np.minimum(ceiling, np.divide(F.employees, lab, out=np.zeros_like(ceiling), where=lab > 0))

    # household budgets
    free = Hh.deposits - Hh.book_value - Hh.earmarked
    budget = ops.consumption_budget(Hh.last_disposable, free, Hh.mpc, cfg.wealth_effect, Hh.last_outlay)
    budget = np.minimum(budget * np.exp(state.noise_level), np.maximum(free, 0.0))
    housing_real = cfg.imputed_rent_rate * Hh.dwelling_stock
    housing_cost = np.minimum(p[re] * housing_real, budget)
    housing_real = housing_cost / p[re]
    other = budget - housing_cost
    cshare = cfg.consumption_shares * sector_tilt
    cshare = cshare / cshare.sum()
    cons_req = other.sum() * cshare / p
    cons_req[re] += housing_real.sum()

    # investment orders, financed before production
    need = kappa[sec] * F.expected_demand
    band = cfg.utilization_band
    f_order, f_draw = ops.investment_order(
        F.capital, need / u_star, cfg.depreciation, cfg.accelerator,
        backlog=F.reconstruction_backlog, draw_rate=ops.rebuild_rate(cfg.firm_rebuild_rate, F.reconstruction_backlog,
                                                 F.capital, cfg.repair_deferral),
        pipeline=F.book_real, normal_pipeline=cfg.depreciation * F.capital,
        desired_low=need / (u_star + band), desired_high=need / max(u_star - band, 1e-9))
    request = f_order * p_inv
    own_funds = F.liquidity - F.book_value
    headroom = B.credit_limit - B.loans_outstanding
    own_used, granted = ops.allocate_credit(request, own_funds, headroom)
    financed = own_used + granted
    frac = np.divide(financed, request, out=np.zeros_like(request), where=request > 0)
    F.loans = F.loans + granted
    F.liquidity = F.liquidity + granted
    new_loans = float(granted.sum())
    new_f_real = f_order * frac
    new_f_value = financed
    F.reconstruction_backlog = np.maximum(F.reconstruction_backlog - f_draw * frac, 0.0)

    h_draw = ops.rebuild_rate(cfg.household_rebuild_rate, Hh.reconstruction_backlog,
                              Hh.dwelling_stock, cfg.repair_deferral) * Hh.reconstruction_backlog
    h_want = (cfg.dwelling_depreciation * Hh.dwelling_stock + h_draw) * p_inv
    # relief is spent on rebuilding first, own savings cover the rest
    from_relief = np.minimum(h_want, Hh.earmarked)
    h_room = np.maximum(free - budget, 0.0)
    from_own = np.minimum(h_want - from_relief, h_room)
    new_h_value = from_relief + from_own
    h_frac = np.divide(new_h_value, h_want, out=np.zeros_like(h_want), where=h_want > 0)
    new_h_real = new_h_value / p_inv
    Hh.earmarked = Hh.earmarked - from_relief
    Hh.reconstruction_backlog = np.maximum(Hh.reconstruction_backlog - h_draw * h_frac, 0.0)
    Hh.earmarked = np.where(Hh.reconstruction_backlog > 0, Hh.earmarked, 0.0)

    g_draw = ops.rebuild_rate(cfg.government_rebuild_rate, G.infra_backlog,
                              G.infrastructure, cfg.repair_deferral) * G.infra_backlog
    new_g_real = cfg.depreciation * G.infrastructure + g_draw
    new_g_value = new_g_real * p_inv
    G.infra_backlog = G.infra_backlog - g_draw

    # production against the existing order book
    phi_f = np.divide(np.maximum(F.liquidity, 0.0), F.book_value, out=np.ones_like(F.book_value),
                      where=F.book_value > 0)
    phi_f = np.minimum(phi_f, 1.0)
    phi_h = np.minimum(np.divide(np.maximum(Hh.deposits, 0.0), Hh.book_value,
                                 out=np.ones_like(Hh.book_value), where=Hh.book_value > 0), 1.0)
    inv_book = float((phi_f * F.book_real).sum() + (phi_h * Hh.book_real).sum() + G.infra_book_real.sum())
    growth = (1.0 + cfg.drift) ** state.t
    gov_req = G.consumption_target * G.spending_factor * growth
    f_req = cons_req + gov_req + ishare * inv_book

    out_f, x, obs = _solve_production(A, f_req, F.share, capacity, sec, S, cfg.substitution, ceiling * intact)
    F.observed_demand = obs
    inter = A @ x
    f_del = x - inter
    ratio = np.divide(f_del, f_req, out=np.ones(S), where=f_req > 0)
    ratio = np.clip(ratio, 0.0, 1.0)
    cons_del = ratio * cons_req
    gov_del = ratio * gov_req
    inv_del = f_del - cons_del - gov_del
    capacity_excess = float(np.max(out_f - capacity)) if len(out_f) else 0.0

    # investment deliveries at contract value
    psi = float(ishare @ ratio)
    dfrac_f = phi_f * psi
    pay_f = dfrac_f * F.book_value
    F.in_transit = dfrac_f * F.book_real
    F.book_real = F.book_real - F.in_transit
    F.book_value = F.book_value - pay_f
    F.liquidity = F.liquidity - pay_f
    dfrac_h = phi_h * psi
    pay_h = dfrac_h * Hh.book_value
    Hh.in_transit = dfrac_h * Hh.book_real
    Hh.book_real = Hh.book_real - Hh.in_transit
    Hh.book_value = Hh.book_value - pay_h
    Hh.deposits = Hh.deposits - pay_h
    pay_g = psi * G.infra_book_value
    G.infra_in_transit = psi * G.infra_book_real
    G.infra_book_real = G.infra_book_real - G.infra_in_transit
    G.infra_book_value = G.infra_book_value - pay_g
    inv_paid = float(pay_f.sum() + pay_h.sum() + pay_g.sum())
    inv_rev = inv_paid * ishare * ratio / psi if psi > 0 else np.zeros(S)

    # consumption and government purchases
    other_spend = other * float(cshare @ ratio)
    housing_spend = housing_cost * ratio[re]
    Hh.deposits = Hh.deposits - other_spend - housing_spend
    cons_rev = other.sum() * cshare * ratio
    cons_rev[re] += housing_spend.sum()
    gov_spend_s = p * gov_del
    gov_rev = gov_spend_s

    # firm revenue, costs and taxes
    sector_rev = p * inter + cons_rev + gov_rev + inv_rev
    xs = x[sec]
    rev_f = sector_rev[sec] * np.divide(out_f, xs, out=np.zeros_like(out_f), where=xs > 0)
    input_cost = (p @ A)[sec] * out_f
    wage_f = state.wage_rate * F.employees
    F.liquidity = F.liquidity + rev_f - input_cost - wage_f
    profit = rev_f - input_cost - wage_f - cfg.depreciation * F.capital * p_inv
    ptax = G.tax_rate_profit * np.maximum(profit, 0.0)
    F.liquidity = F.liquidity - ptax

    # household income
    wages_total = float(wage_f.sum())
    weight = Hh.wage * Hh.employed
    wage_h = wages_total * weight / weight.sum() if weight.sum() > 0 else np.zeros(Hh.n)
    benefits = G.unemployment_benefit * state.wage_rate * Hh.wage * (Hh.labor_force - Hh.employed)

    # loans: repayment, then dividends out of what is left
    F.book_real = F.book_real + new_f_real
    F.book_value = F.book_value + new_f_value
    buffer = cfg.liquidity_buffer * rev_f
    excess = np.maximum(F.liquidity - F.book_value - buffer, 0.0)
    repay = np.minimum(cfg.loan_repayment * F.loans, excess)
    F.loans = F.loans - repay
    F.liquidity = F.liquidity - repay
    div_f = excess - repay
    F.liquidity = F.liquidity - div_f
    overdraft = np.maximum(-F.liquidity, 0.0)
    F.liquidity = F.liquidity + overdraft
    F.loans = F.loans + overdraft
    dividends = float(div_f.sum())
    div_h = dividends * Hh.owner_share
    itax = G.tax_rate_income * (wage_h + div_h)
    Hh.deposits = Hh.deposits + wage_h + div_h + benefits - itax
    Hh.book_real = Hh.book_real + new_h_real
    Hh.book_value = Hh.book_value + new_h_value
    Hh.last_disposable = wage_h + div_h + benefits + relief - itax
    # earmarked relief counts as committed the quarter it arrives
    Hh.last_outlay = from_own + relief
    G.infra_book_real = G.infra_book_real + new_g_real
    G.infra_book_value = G.infra_book_value + new_g_value

    # bank books
    repaid = float(repay.sum())
    od = float(overdraft.sum())
    B.loans_outstanding += new_loans - repaid + od

    # fiscal
    expenditures = float(benefits.sum() + relief.sum() + gov_spend_s.sum() + pay_g.sum())
    revenues = float(itax.sum() + ptax.sum())
    G.debt = ops.fiscal_update(G.debt, expenditures, revenues)
    B.reserves += expenditures - revenues
    B.deposits_held += expenditures - revenues + new_loans - repaid + od
    nominal_gdp = float(p @ f_del)
    G.gdp_history.append(nominal_gdp)
    del G.gdp_history[:-4]
    debt_ratio = G.debt / G.rolling_gdp() if G.rolling_gdp() > 0 else float("inf")
    G.spending_factor = float(np.clip(1.0 - cfg.fiscal_rule * (debt_ratio - G.target_debt_ratio), 0.5, 1.5))

    # prices
    cap_s = np.bincount(sec, ceiling, minlength=S)
    util = np.divide(x, cap_s, out=np.full(S, u_star), where=cap_s > 0)
    state.prices = p * ops.price_multiplier(util, cfg.price_sensitivity, u_star, cfg.max_price_change)

    flows = _Flows(output=x, intermediate=inter, cons_delivered=cons_del, inv_delivered=inv_del,
                   gov_delivered=gov_del, nominal_gdp=nominal_gdp, capacity_excess=capacity_excess)
    outcome = compute_national_accounts(state, flows, debt_ratio)
    state.t += 1
    state.last_outcome = outcome
    return state, outcome


def compute_national_accounts(state: EconomyState, flows: _Flows, debt_ratio: float) -> QuarterOutcome:
    """Real GDP at base prices measured from the production and expenditure sides."""
    A = state.A
    gva = flows.output * (1.0 - A.sum(axis=0))
    gdp_prod = float(gva.sum())
    gdp_exp = float(flows.cons_delivered.sum() + flows.inv_delivered.sum() + flows.gov_delivered.sum())
    nfa = state.net_financial_assets()
    scale = float(state.households.deposits.sum() + state.firms.liquidity.sum()
                  + state.firms.loans.sum() + state.government.debt + state.bank.equity)
    lf = float(state.households.labor_force.sum())
    return QuarterOutcome(
        quarter=state.t,
        gdp_production=gdp_prod,
        gdp_expenditure=gdp_exp,
        sectoral_gva=gva,
        unemployment_rate=1.0 - float(state.households.employed.sum()) / lf,
        debt_to_gdp=float(debt_ratio),
        price_index=float(state.base_weights @ state.prices),
        consumption=float(flows.cons_delivered.sum()),
        investment=float(flows.inv_delivered.sum()),
        government_consumption=float(flows.gov_delivered.sum()),
        nominal_gdp=flows.nominal_gdp,
        loans=state.bank.loans_outstanding,
        credit_limit=state.bank.credit_limit,
        capacity_excess=flows.capacity_excess,
        net_financial_assets=float(sum(nfa.values())),
        gross_financial_scale=scale,
    )
