"""Agent state and the steady-state initialisation of the economy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cataclysm.economy.config import EconomyConfig
from cataclysm.errors import ConfigError, NonProductiveEconomyError
from cataclysm.hazard import Cell, synthetic_grid


@dataclass
class Firms:
    """One representative firm per (sector, cell); all fields are arrays."""

    sector: np.ndarray
    cell: np.ndarray
    share: np.ndarray  # fixed share of its sector's demand
    capital: np.ndarray
    expected_demand: np.ndarray
    observed_demand: np.ndarray
    employees: np.ndarray
    liquidity: np.ndarray
    loans: np.ndarray
    reconstruction_backlog: np.ndarray
    book_real: np.ndarray  # ordered capital awaiting delivery
    book_value: np.ndarray  # contract value of that order book, funds committed
    in_transit: np.ndarray  # delivered this quarter, credited next quarter

    @property
    def n(self) -> int:
        return len(self.sector)


@dataclass
class Households:
    cell: np.ndarray
    count: np.ndarray
    labor_force: np.ndarray
    employed: np.ndarray
    wage: np.ndarray  # relative wage level, labour-force weighted mean 1
    deposits: np.ndarray
    dwelling_stock: np.ndarray
    reconstruction_backlog: np.ndarray
    book_real: np.ndarray
    book_value: np.ndarray
    in_transit: np.ndarray
    owner_share: np.ndarray
    mpc: np.ndarray
    last_disposable: np.ndarray
    last_outlay: np.ndarray
    earmarked: np.ndarray  # relief set aside for rebuilding

    @property
    def committed(self) -> np.ndarray:
        return self.book_value

    @property
    def n(self) -> int:
        return len(self.cell)


@dataclass
class Bank:
    deposits_held: float
    loans_outstanding: float
    reserves: float
    equity: float
    max_leverage: float

    @property
    def credit_limit(self) -> float:
        return self.max_leverage * self.equity


@dataclass
class Government:
    debt: float
    tax_rate_income: float
    tax_rate_profit: float
    unemployment_benefit: float
    consumption_target: np.ndarray  # real, per sector
    infrastructure: np.ndarray  # per cell
    infra_backlog: np.ndarray
    infra_book_real: np.ndarray
    infra_book_value: np.ndarray
    infra_in_transit: np.ndarray
    relief_queue: np.ndarray  # (quarters, cohorts) of scheduled transfers
    target_debt_ratio: float
    spending_factor: float = 1.0
    gdp_history: list = field(default_factory=list)  # nominal quarterly GDP

    def rolling_gdp(self) -> float:
        return float(sum(self.gdp_history[-4:]))


@dataclass
class EconomyState:
    config: EconomyConfig
    cells: tuple[Cell, ...]
    A: np.ndarray
    labor_coeff: np.ndarray
    kappa: np.ndarray
    value_added_ratio: np.ndarray
    firms: Firms
    households: Households
    bank: Bank
    government: Government
    prices: np.ndarray
    base_weights: np.ndarray  # value-added weights of the price index
    t: int = 0
    noise_level: float = 0.0
    wage_rate: float = 10.0
    last_outcome: object = None

    @property
    def n_sectors(self) -> int:
        return self.A.shape[0]

    @property
    def cell_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.cells)

    def investment_price(self) -> float:
        return float(self.prices @ self.config.investment_supply_shares)

    def capacity(self) -> np.ndarray:
        return self.firms.capital / self.kappa[self.firms.sector]

    def net_financial_assets(self) -> dict:
        h = float(self.households.deposits.sum())
        f = float(self.firms.liquidity.sum() - self.firms.loans.sum())
        b = self.bank.reserves + self.bank.loans_outstanding - self.bank.deposits_held
        g = -self.government.debt
        return {"households": h, "firms": f, "bank": b, "government": g}

    def cell_values(self) -> np.ndarray:
        """Current physical stock per cell: firm capital, infrastructure, dwellings."""
        n = len(self.cells)
        k = np.bincount(self.firms.cell, self.firms.capital, minlength=n)
        d = np.bincount(self.households.cell, self.households.dwelling_stock, minlength=n)
        return k + self.government.infrastructure + d


def _flows(cfg: EconomyConfig, x, K_s, infra, H):
    """Final demand implied by gross output ``x`` in a stationary state.

    All prices are one. Returns the final-demand vector and a dict of the
    aggregate flows used to seed agent balance sheets.
    """
    A = cfg.technical_coefficients
    v = 1.0 - A.sum(axis=0)
    omega = cfg.labor_share
    u0 = cfg.base_unemployment
    bu = cfg.unemployment_benefit * u0 / (1.0 - u0)
    wages = float(np.sum(omega * v * x))
    surplus_s = (1.0 - omega) * v * x
    dep = cfg.depreciation * K_s
    dividends = (1.0 - cfg.tax_rate_profit) * float(np.sum(surplus_s - dep))
    profit_tax = cfg.tax_rate_profit * float(np.sum(surplus_s - dep))
    benefits = bu * wages
    income_tax = cfg.tax_rate_income * (wages + dividends)
    disposable = wages + dividends + benefits - income_tax
    maintenance = cfg.dwelling_depreciation * H
    rent = cfg.imputed_rent_rate * H
    consumption = disposable - maintenance
    gov = income_tax + profit_tax - benefits - cfg.depreciation * infra
    invest = cfg.depreciation * (float(K_s.sum()) + infra) + maintenance
    e_re = np.zeros_like(x)
    e_re[cfg.real_estate_sector] = 1.0
    f = (cfg.consumption_shares * (consumption - rent) + e_re * rent
         + cfg.government_shares * gov + cfg.investment_supply_shares * invest)
    info = dict(wages=wages, surplus=surplus_s, dividends=dividends, profit_tax=profit_tax,
                benefits=benefits, income_tax=income_tax, disposable=disposable,
                maintenance=maintenance, rent=rent, consumption=consumption,
                government=gov, investment=invest)
    return f, info


def solve_steady_state(cfg: EconomyConfig, K_s: np.ndarray, infra: float, H: float):
    """Gross output per sector consistent with the stocks and employment target.

    Final demand is affine in output, and the economy-wide budget identity
    makes the square system singular, so the employment target closes it.
    """
    S = cfg.n_sectors
    A = cfg.technical_coefficients
    K_s = np.asarray(K_s, dtype=float)
    c, _ = _flows(cfg, np.zeros(S), K_s, infra, H)
    M = np.empty((S, S))
    for j in range(S):
        e = np.zeros(S)
        e[j] = 1.0
        M[:, j] = _flows(cfg, e, K_s, infra, H)[0] - c
    v = 1.0 - A.sum(axis=0)
    employment = cfg.population * cfg.participation * (1.0 - cfg.base_unemployment)
    lhs = np.vstack([np.eye(S) - A - M, (cfg.labor_share * v / cfg.mean_wage)[None, :]])
    rhs = np.concatenate([c, [employment]])
    x, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    resid = lhs @ x - rhs
    if np.max(np.abs(resid)) > 1e-6 * max(1.0, np.max(np.abs(rhs))):
        raise NonProductiveEconomyError("no stationary state matches these stocks")
    f, info = _flows(cfg, x, K_s, infra, H)
    return x, f, info


def default_sector_capital(cfg: EconomyConfig, iterations: int = 200) -> tuple[np.ndarray, float, float]:
    """Firm capital per sector consistent with the configured capital-output ratios.

    Returns ``(K_s, infrastructure, dwellings)``; the inventory built from
    these totals reproduces ``capital_output_ratio`` exactly at init.
    """
    u = cfg.target_utilization
    share = cfg.infrastructure_share
    K = cfg.capital_output_ratio * 1e6
    for _ in range(iterations):
        infra, H = _stock_split(cfg, K)
        x, _, _ = solve_steady_state(cfg, K, infra, H)
        K_new = cfg.capital_output_ratio * x / u
        if np.allclose(K_new, K, rtol=1e-13, atol=0):
            K = K_new
            break
        K = K_new
    infra, H = _stock_split(cfg, K)
    return K, infra, H


def _stock_split(cfg, K_firm):
    cell_capital = float(np.sum(K_firm)) / (1.0 - cfg.infrastructure_share)
    return cfg.infrastructure_share * cell_capital, cfg.dwelling_ratio * cell_capital


def default_cells(cfg: EconomyConfig):
    """Synthetic grid whose stocks match the default steady state.

    Returns ``(cells, loss_scale, reference_T)``.
    """
    K, infra, H = default_sector_capital(cfg)
    sector_cell_capital = K / (1.0 - cfg.infrastructure_share)
    return synthetic_grid(sector_cell_capital, H, n_cells=cfg.n_cells, seed=cfg.grid_seed)


def _cohort_cells(dwellings: np.ndarray, n_cohorts: int) -> np.ndarray:
    """Assign cohorts to cells: one per cell, the rest by largest remainder on dwellings."""
    n_cells = len(dwellings)
    if n_cohorts < n_cells:
        raise ConfigError(f"n_cohorts ({n_cohorts}) must be at least the number of cells ({n_cells})",
                          key="n_cohorts")
    counts = np.ones(n_cells, dtype=int)
    extra = n_cohorts - n_cells
    total = dwellings.sum()
    if extra and total > 0:
        quota = extra * dwellings / total
        base = np.floor(quota).astype(int)
        rem = extra - base.sum()
        order = np.argsort(-(quota - base), kind="stable")
        base[order[:rem]] += 1
        counts += base
    elif extra:
        counts += np.bincount(np.arange(extra) % n_cells, minlength=n_cells)
    return np.repeat(np.arange(n_cells), counts)


def init_economy(config: EconomyConfig | None = None, cells: Sequence[Cell] | None = None,
                 seed: int = 0) -> EconomyState:
    """Build a stationary economy on a cell grid.

    Without ``cells`` a synthetic grid consistent with the configured
    capital-output ratios is generated. With an inventory, capital-output
    ratios are derived from it so that baseline utilisation equals the target.
    ``seed`` only drives the wage distribution across cohorts.
    """
    cfg = (config or EconomyConfig()).validate()
    if cells is None:
        cells, _, _ = default_cells(cfg)
    cells = tuple(cells)
    S = cfg.n_sectors
    n_cells = len(cells)
    if n_cells == 0:
        raise ConfigError("the cell grid is empty", key="cells")
    cap = np.array([c.capital_by_sector for c in cells], dtype=float)
    if cap.shape[1] != S:
        raise ConfigError(f"cells carry {cap.shape[1]} sectors, economy has {S}", key="sector_names")
    share = cfg.infrastructure_share
    firm_cap = (1.0 - share) * cap  # (cells, S)
    infra_c = share * cap.sum(axis=1)
    dwell_c = np.array([c.dwelling_stock for c in cells], dtype=float)
    K_s = firm_cap.sum(axis=0)

    x, f, info = solve_steady_state(cfg, K_s, float(infra_c.sum()), float(dwell_c.sum()))
    if np.any(x <= 0) or np.any(f < 0):
        raise NonProductiveEconomyError("stationary output or final demand is not positive")
    if info["government"] < 0 or info["consumption"] - info["rent"] < 0:
        raise NonProductiveEconomyError("stationary government or household spending is negative")
    if np.any(info["surplus"] < cfg.depreciation * K_s - 1e-9):
        raise NonProductiveEconomyError("a sector cannot cover depreciation from its surplus")

    A = cfg.technical_coefficients
    v = 1.0 - A.sum(axis=0)
    w_bar = cfg.mean_wage
    labor_coeff = cfg.labor_share * v / w_bar
    u_star = cfg.target_utilization
    kappa = np.where(K_s > 0, u_star * K_s / np.where(x > 0, x, 1.0), cfg.capital_output_ratio)

    # firms: sector-major ordering
    sector = np.repeat(np.arange(S), n_cells)
    cell = np.tile(np.arange(n_cells), S)
    K = firm_cap.T.reshape(-1)
    K_sec = K_s[sector]
    fshare = np.divide(K, K_sec, out=np.zeros_like(K), where=K_sec > 0)
    x_f = fshare * x[sector]
    p_inv = 1.0
    revenue = x_f  # unit prices
    buffer = cfg.liquidity_buffer * revenue
    order = cfg.depreciation * K
    firms = Firms(
        sector=sector, cell=cell, share=fshare, capital=K.copy(),
        expected_demand=x_f.copy(), observed_demand=x_f.copy(),
        employees=labor_coeff[sector] * x_f,
        liquidity=buffer + order * p_inv, loans=np.zeros_like(K),
        reconstruction_backlog=np.zeros_like(K),
        book_real=order.copy(), book_value=order * p_inv, in_transit=order.copy(),
    )

    # households
    H = cfg.n_cohorts
    hcell = _cohort_cells(dwell_c, H)
    rng = np.random.default_rng(seed)
    count = np.full(H, cfg.population / H)
    lf = cfg.participation * count
    wage = rng.lognormal(0.0, cfg.wage_dispersion, H)
    wage /= np.sum(wage * lf) / lf.sum()
    employed = lf * (1.0 - cfg.base_unemployment)
    per_cell = np.bincount(hcell, count, minlength=n_cells)
    dwelling = dwell_c[hcell] * count / per_cell[hcell]
    owner = wage * lf / np.sum(wage * lf)
    wage_bill = w_bar * wage * employed
    wage_inc = info["wages"] * wage_bill / wage_bill.sum()
    benefits = cfg.unemployment_benefit * w_bar * wage * (lf - employed)
    div = info["dividends"] * owner
    yd = (wage_inc + div) * (1.0 - cfg.tax_rate_income) + benefits
    maint = cfg.dwelling_depreciation * dwelling
    free = (1.0 - cfg.mpc) * (yd - maint) / cfg.wealth_effect if cfg.wealth_effect > 0 else np.zeros(H)
    if np.any(yd - maint < 0):
        raise NonProductiveEconomyError("some cohorts cannot cover dwelling maintenance")
    households = Households(
        cell=hcell, count=count, labor_force=lf, employed=employed, wage=wage,
        deposits=free + maint * p_inv, dwelling_stock=dwelling,
        reconstruction_backlog=np.zeros(H), book_real=maint.copy(), book_value=maint * p_inv,
        in_transit=maint.copy(), owner_share=owner, mpc=np.full(H, cfg.mpc),
        last_disposable=yd, last_outlay=maint * p_inv, earmarked=np.zeros(H),
    )

    loans = 0.0
    equity = cfg.credit_capacity * float(K.sum()) / cfg.max_leverage
    deposits_held = float(households.deposits.sum() + firms.liquidity.sum())
    reserves = deposits_held + equity - loans
    bank = Bank(deposits_held=deposits_held, loans_outstanding=loans, reserves=reserves,
                equity=equity, max_leverage=cfg.max_leverage)

    gdp_q = float(np.sum(v * x))
    infra_order = cfg.depreciation * infra_c
    government = Government(
        debt=reserves,
        tax_rate_income=cfg.tax_rate_income, tax_rate_profit=cfg.tax_rate_profit,
        unemployment_benefit=cfg.unemployment_benefit,
        consumption_target=cfg.government_shares * info["government"],
        infrastructure=infra_c.copy(), infra_backlog=np.zeros(n_cells),
        infra_book_real=infra_order.copy(), infra_book_value=infra_order * p_inv,
        infra_in_transit=infra_order.copy(),
        relief_queue=np.zeros((0, H)),
        target_debt_ratio=reserves / (4.0 * gdp_q),
        gdp_history=[gdp_q] * 4,
    )
    return EconomyState(
        config=cfg, cells=cells, A=A.copy(), labor_coeff=labor_coeff, kappa=kappa,
        value_added_ratio=v, firms=firms, households=households, bank=bank,
        government=government, prices=np.ones(S), base_weights=v * x / gdp_q,
        wage_rate=w_bar,
    )
