"""Baseline/shocked run pairs, ensembles, damage sweeps and reference dynamics."""

from __future__ import annotations

import copy
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from cataclysm.damage import DamageReport, ReliefRule, apply_damage, relief_schedule, schedule_relief
from cataclysm.economy import EconomyConfig, EconomyState, init_economy, step_quarter
from cataclysm.economy.state import default_cells
from cataclysm.errors import InvalidParameterError
from cataclysm.hazard import (
    FloodEvent,
    HazardModel,
    calibrate,
    sample_event,
    sample_event_for_loss,
    scale_fractions,
)

THREADS_ENV = "CATACLYSM_THREADS"


@dataclass
class HazardSettings:
    copula_family: str = "gumbel"
    dependence_slope: float = 0.4
    calibration_targets: tuple = ((100.0, 0.006), (250.0, 0.012), (1500.0, 0.10))
    t_max: float = 1e4
    calibration_seed: int = 20130101
    calibration_draws: int = 512


@dataclass
class ScenarioConfig:
    """Everything a run needs apart from the seed and the event size."""

    economy: EconomyConfig = field(default_factory=EconomyConfig)
    hazard: HazardSettings = field(default_factory=HazardSettings)
    relief: ReliefRule = field(default_factory=ReliefRule)
    start_year: int = 2013
    pre_shock_years: int = 1
    horizon_years: int = 10
    burn_in_quarters: int = 4
    inventory: str | None = None  # optional cell inventory CSV

    @property
    def shock_year(self) -> int:
        return self.start_year + self.pre_shock_years

    @property
    def shock_quarter(self) -> int:
        """Index of the first shocked quarter, burn-in included."""
        return self.burn_in_quarters + 4 * self.pre_shock_years

    @property
    def n_quarters(self) -> int:
        return self.shock_quarter + 4 * self.horizon_years

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.shock_year + self.horizon_years)


@dataclass
class Model:
    """Initial economy plus the hazard model calibrated on the same grid."""

    config: ScenarioConfig
    state: EconomyState
    hazard: HazardModel


def build_model(config: ScenarioConfig) -> Model:
    from cataclysm.hazard import read_inventory

    eco = config.economy
    if config.inventory:
        cells, loss_scale, ref_T = read_inventory(config.inventory)
        if loss_scale is None or ref_T is None:
            _, ls_default, rt_default = default_cells(replace(eco, n_cells=len(cells)))
            loss_scale = ls_default if loss_scale is None else loss_scale
            ref_T = rt_default if ref_T is None else ref_T
    else:
        cells, loss_scale, ref_T = default_cells(eco)
    state = init_economy(eco, cells)
    h = config.hazard
    hazard = HazardModel(
        cells=list(cells), loss_scale=np.asarray(loss_scale), reference_T=np.asarray(ref_T),
        copula_family=h.copula_family, dependence_slope=h.dependence_slope,
        calibration_targets=tuple(tuple(t) for t in h.calibration_targets), t_max=h.t_max,
        calibration_seed=h.calibration_seed, calibration_draws=h.calibration_draws,
    )
    return Model(config=config, state=state, hazard=calibrate(hazard))


@dataclass
class TimeSeries:
    """Quarterly national accounts of one run, from the first reported quarter."""

    year: np.ndarray
    quarter: np.ndarray
    gdp_production: np.ndarray
    gdp_expenditure: np.ndarray
    unemployment: np.ndarray
    debt_to_gdp: np.ndarray
    price_index: np.ndarray
    gva: np.ndarray  # (quarters, sectors)
    net_financial_assets: np.ndarray
    financial_scale: np.ndarray
    loans: np.ndarray
    credit_limit: np.ndarray
    capacity_excess: np.ndarray

    @classmethod
    def from_outcomes(cls, outcomes, start_year: int) -> "TimeSeries":
        n = len(outcomes)
        q = np.arange(n)
        return cls(
            year=start_year + q // 4,
            quarter=q % 4 + 1,
            gdp_production=np.array([o.gdp_production for o in outcomes]),
            gdp_expenditure=np.array([o.gdp_expenditure for o in outcomes]),
            unemployment=np.array([o.unemployment_rate for o in outcomes]),
            debt_to_gdp=np.array([o.debt_to_gdp for o in outcomes]),
            price_index=np.array([o.price_index for o in outcomes]),
            gva=np.array([o.sectoral_gva for o in outcomes]),
            net_financial_assets=np.array([o.net_financial_assets for o in outcomes]),
            financial_scale=np.array([o.gross_financial_scale for o in outcomes]),
            loans=np.array([o.loans for o in outcomes]),
            credit_limit=np.array([o.credit_limit for o in outcomes]),
            capacity_excess=np.array([o.capacity_excess for o in outcomes]),
        )

    def annual(self) -> dict:
        """Annual GDP and GVA sums, mean unemployment, year-end debt ratio."""
        n_years = len(self.year) // 4
        sl = slice(0, 4 * n_years)

        def fold(a):
            return a[sl].reshape(n_years, 4, *a.shape[1:])

        return {
            "year": self.year[sl][::4],
            "gdp": fold(self.gdp_production).sum(axis=1),
            "gva": fold(self.gva).sum(axis=1),
            "unemployment": fold(self.unemployment).mean(axis=1),
            "debt_to_gdp": fold(self.debt_to_gdp)[:, -1],
            "price_index": fold(self.price_index).mean(axis=1),
        }


@dataclass
class PairResult:
    baseline: TimeSeries
    shocked: TimeSeries
    event: FloodEvent
    report: DamageReport
    loss_fraction: float  # realised share of the economy's physical stock


def _streams(seed: int):
    econ, haz = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(econ), np.random.default_rng(haz)


def _run(state, rng, n, outcomes):
    for _ in range(n):
        state, out = step_quarter(state, rng)
        outcomes.append(out)
    return state


@dataclass
class _Baseline:
    outcomes: list
    snapshot: EconomyState
    rng_state: dict


def _baseline(model: Model, seed: int) -> _Baseline:
    cfg = model.config
    state = copy.deepcopy(model.state)
    rng, _ = _streams(seed)
    outcomes: list = []
    state = _run(state, rng, cfg.shock_quarter, outcomes)
    snapshot = copy.deepcopy(state)
    rng_state = copy.deepcopy(rng.bit_generator.state)
    _run(state, rng, cfg.n_quarters - cfg.shock_quarter, outcomes)
    return _Baseline(outcomes, snapshot, rng_state)


def _event_for(model: Model, state: EconomyState, hrng, return_period=None, loss_fraction=None,
               reference: FloodEvent | None = None) -> tuple[FloodEvent, float]:
    """Build the event to apply to ``state`` and the loss share it will realise."""
    values = state.cell_values()
    weights = values / values.sum()
    hz = model.hazard
    if return_period is not None:
        ev = sample_event(hz, float(return_period), hrng)
        fr = ev.cell_loss_fraction
    else:
        x = float(loss_fraction)
        if x == 0:
            fr = np.zeros(hz.n_cells)
            ev = FloodEvent.from_fractions(hz, 1.0, fr)
        else:
            ref = reference if reference is not None else sample_event_for_loss(hz, x, hrng)
            fr = scale_fractions(ref.cell_loss_fraction, weights, x)
            ev = FloodEvent(return_period_T=ref.return_period_T, cell_loss_fraction=fr,
                            total_direct_loss=float(fr @ values),
                            total_loss_fraction=float(fr @ weights), cell_ids=hz.cell_ids)
    return ev, float(fr @ weights)


def _shocked(model: Model, base: _Baseline, event: FloodEvent, loss: float):
    cfg = model.config
    state = copy.deepcopy(base.snapshot)
    rng = np.random.default_rng()
    rng.bit_generator.state = copy.deepcopy(base.rng_state)
    state, report = apply_damage(state, event)
    policy = cfg.relief.policy_for(loss)
    schedule_relief(state, relief_schedule(report, policy))
    outcomes = list(base.outcomes[: cfg.shock_quarter])
    _run(state, rng, cfg.n_quarters - cfg.shock_quarter, outcomes)
    return outcomes, report


def _series(model: Model, outcomes) -> TimeSeries:
    cfg = model.config
    return TimeSeries.from_outcomes(outcomes[cfg.burn_in_quarters:], cfg.start_year)


def run_pair(model: Model, seed: int, return_period: float | None = None,
             loss_fraction: float | None = None) -> PairResult:
    """Baseline and shocked run sharing one seed.

    Exactly one of ``return_period`` and ``loss_fraction`` must be given.
    Both runs share every random draw; the shocked run forks from the
    baseline at the shock quarter.
    """
    if (return_period is None) == (loss_fraction is None):
        raise InvalidParameterError("give exactly one of return_period and loss_fraction")
    base = _baseline(model, seed)
    _, hrng = _streams(seed)
    event, loss = _event_for(model, base.snapshot, hrng, return_period, loss_fraction)
    outcomes, report = _shocked(model, base, event, loss)
    return PairResult(_series(model, base.outcomes), _series(model, outcomes), event, report, loss)


# -- metrics ----------------------------------------------------------------

def _cum_growth_diff(base, shock, shock_index):
    """Cumulative sum over years of growth-rate differences, in pp."""
    gb = base[1:] / base[:-1] - 1.0
    gs = shock[1:] / shock[:-1] - 1.0
    d = np.zeros_like(base)
    d[1:] = np.cumsum(gs - gb, axis=0) * 100.0
    d[:shock_index] = 0.0
    return d


def pair_differences(pair: PairResult, shock_year: int) -> dict:
    """Difference series of one pair on the annual grid."""
    a, b = pair.baseline.annual(), pair.shocked.annual()
    k = int(np.searchsorted(a["year"], shock_year))
    return {
        "year": a["year"],
        "gdp": _cum_growth_diff(a["gdp"], b["gdp"], k),
        "unemployment": np.where(a["year"] >= shock_year, (b["unemployment"] - a["unemployment"]) * 100.0, 0.0),
        "debt_to_gdp": np.where(a["year"] >= shock_year, (b["debt_to_gdp"] - a["debt_to_gdp"]) * 100.0, 0.0),
        "gva": _cum_growth_diff(a["gva"], b["gva"], k),
    }


@dataclass
class DiffMetrics:
    """Ensemble mean and standard deviation of the difference series (pp)."""

    years: np.ndarray
    shock_year: int
    gdp_mean: np.ndarray
    gdp_std: np.ndarray
    unemployment_mean: np.ndarray
    unemployment_std: np.ndarray
    debt_mean: np.ndarray
    debt_std: np.ndarray
    gva_mean: np.ndarray  # (years, sectors)
    gva_std: np.ndarray
    samples: dict = field(default_factory=dict, repr=False)  # per-run series
    loss_fractions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seeds: tuple = ()

    @property
    def n_runs(self) -> int:
        return len(self.seeds)

    def year_index(self, year: int) -> int:
        return int(np.searchsorted(self.years, year))

    def okun_correlation(self) -> float:
        """Pearson correlation of annual GDP-growth and unemployment differences.

        The growth difference of a year is the step of the cumulative series.
        Pooled over runs and post-shock years.
        """
        post = self.years >= self.shock_year
        cum = self.samples["gdp"]
        annual = np.diff(cum, axis=1, prepend=0.0)
        g = annual[:, post].ravel()
        u = self.samples["unemployment"][:, post].ravel()
        if g.std() == 0 or u.std() == 0:
            return float("nan")
        return float(np.corrcoef(g, u)[0, 1])


def _aggregate(diffs: list[dict], shock_year: int, losses, seeds) -> DiffMetrics:
    stack = {k: np.stack([d[k] for d in diffs]) for k in ("gdp", "unemployment", "debt_to_gdp", "gva")}
    return DiffMetrics(
        years=diffs[0]["year"], shock_year=shock_year,
        gdp_mean=stack["gdp"].mean(0), gdp_std=stack["gdp"].std(0),
        unemployment_mean=stack["unemployment"].mean(0), unemployment_std=stack["unemployment"].std(0),
        debt_mean=stack["debt_to_gdp"].mean(0), debt_std=stack["debt_to_gdp"].std(0),
        gva_mean=stack["gva"].mean(0), gva_std=stack["gva"].std(0),
        samples=stack, loss_fractions=np.asarray(losses), seeds=tuple(seeds),
    )


# -- parallel execution -----------------------------------------------------

def worker_count(requested: int | None = None) -> int:
    """Pool size: the request, capped by ``CATACLYSM_THREADS`` when set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError as exc:
            raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    return max(1, int(n))


def _map(fn, jobs, workers):
    """Ordered map; results depend only on the job list, never on pool size."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _pair_job(args):
    model, seed, T, x, keep = args
    pair = run_pair(model, seed, return_period=T, loss_fraction=x)
    d = pair_differences(pair, model.config.shock_year)
    return d, pair.loss_fraction, (pair if keep else None)


def _run_ensemble(model, n_seeds, return_period, loss_fraction, base_seed, workers, keep):
    if n_seeds < 1:
        raise InvalidParameterError("n_seeds must be positive")
    seeds = [base_seed + i for i in range(n_seeds)]
    jobs = [(model, s, return_period, loss_fraction, keep) for s in seeds]
    res = _map(_pair_job, jobs, worker_count(workers))
    metrics = _aggregate([r[0] for r in res], model.config.shock_year, [r[1] for r in res], seeds)
    return metrics, [r[2] for r in res]


def ensemble(model: Model, n_seeds: int = 50, return_period: float | None = None,
             loss_fraction: float | None = None, base_seed: int = 0, workers: int | None = 1) -> DiffMetrics:
    """Mean and spread of the difference metrics over ``n_seeds`` pairs.

    Run ``i`` uses seed ``base_seed + i``.
    """
    return _run_ensemble(model, n_seeds, return_period, loss_fraction, base_seed, workers, False)[0]


def ensemble_with_pairs(model: Model, n_seeds: int = 50, return_period: float | None = None,
                        loss_fraction: float | None = None, base_seed: int = 0,
                        workers: int | None = 1) -> tuple[DiffMetrics, list[PairResult]]:
    """Like :func:`ensemble` but also returns every run pair."""
    return _run_ensemble(model, n_seeds, return_period, loss_fraction, base_seed, workers, True)


def run_baseline(model: Model, seed: int) -> TimeSeries:
    """Undisturbed run for one seed, identical to the baseline of a pair."""
    return _series(model, _baseline(model, seed).outcomes)


def _sweep_job(args):
    model, seed, grid = args
    base = _baseline(model, seed)
    _, hrng = _streams(seed)
    ref = sample_event_for_loss(model.hazard, float(np.max(grid)), hrng)
    bseries = _series(model, base.outcomes)
    out = []
    for x in grid:
        ev, loss = _event_for(model, base.snapshot, hrng, loss_fraction=x, reference=ref)
        outcomes, _ = _shocked(model, base, ev, loss)
        pair = PairResult(bseries, _series(model, outcomes), ev, None, loss)
        d = pair_differences(pair, model.config.shock_year)
        d["direct_loss_gdp"] = ev.total_direct_loss / float(bseries.annual()["gdp"][0])
        out.append(d)
    return out


@dataclass
class SweepResult:
    grid: np.ndarray  # loss fractions of physical capital
    year: int
    mean: np.ndarray
    std: np.ndarray
    years: np.ndarray
    mean_by_year: np.ndarray  # (gridpoints, years)
    std_by_year: np.ndarray
    loss_share_of_gdp: np.ndarray  # direct loss over pre-shock annual GDP
    inflection_point: float | None
    argmax: float | None
    smoothed: np.ndarray | None = None

    @property
    def has_threshold(self) -> bool:
        return self.argmax is not None


def damage_sweep(model: Model, grid, n_seeds: int = 50, year: int = 2, base_seed: int = 0,
                 workers: int | None = 1) -> SweepResult:
    """Year-``year`` cumulative GDP difference across direct-loss sizes.

    ``year`` counts from the shock year (1 = shock year). Every seed uses one
    spatial pattern, rescaled to each gridpoint.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise InvalidParameterError("grid must be a nonempty strictly increasing sequence")
    if np.any(grid <= 0):
        raise InvalidParameterError("grid loss fractions must be positive")
    seeds = [base_seed + i for i in range(n_seeds)]
    res = _map(_sweep_job, [(model, s, grid) for s in seeds], worker_count(workers))
    gdp = np.array([[d["gdp"] for d in r] for r in res])  # (seeds, grid, years)
    share = np.array([[d["direct_loss_gdp"] for d in r] for r in res]).mean(0)
    years = res[0][0]["year"]
    col = int(np.searchsorted(years, model.config.shock_year)) + year - 1
    if not 0 <= col < len(years):
        raise InvalidParameterError(f"year {year} outside the horizon")
    mean_by_year = gdp.mean(0)
    std_by_year = gdp.std(0)
    se = std_by_year[:, col] / np.sqrt(max(n_seeds - 1, 1))
    infl, amax, smooth = locate_threshold(grid, mean_by_year[:, col], se)
    return SweepResult(grid=grid, year=year, mean=mean_by_year[:, col], std=std_by_year[:, col],
                       years=years, mean_by_year=mean_by_year, std_by_year=std_by_year,
                       loss_share_of_gdp=share, inflection_point=infl, argmax=amax, smoothed=smooth)


def locate_threshold(grid, values, standard_error=None):
    """Interior maximum and the inflection point below it of a smoothed curve.

    With standard errors, a weighted cubic smoothing spline is fitted whose
    weighted residual sum of squares equals the number of points, i.e. the fit
    stays within the sampling noise. Without them the penalty is chosen by
    generalized cross-validation. The maximum is searched on a fine grid and
    the inflection is the last sign change of the second derivative from
    convex to concave below it. Returns ``(inflection, argmax,
    smoothed_values)``; absent points are None.
    """
    from scipy.interpolate import UnivariateSpline, make_smoothing_spline

    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.size < 5:
        return None, None, None
    if standard_error is None:
        spl = make_smoothing_spline(grid, values)
    else:
        floor = 1e-6 * max(float(np.max(np.abs(values))), 1e-9)
        se = np.maximum(np.broadcast_to(np.asarray(standard_error, dtype=float), values.shape), floor)
        spl = UnivariateSpline(grid, values, w=1.0 / se, k=3, s=float(grid.size))
    fine = np.linspace(grid[0], grid[-1], 2001)
    y = spl(fine)
    i = int(np.argmax(y))
    if i == 0 or i == len(fine) - 1:
        return None, None, spl(grid)
    argmax = float(fine[i])
    d2 = spl.derivative(2)(fine[: i + 1])
    cross = np.nonzero((d2[:-1] > 0) & (d2[1:] <= 0))[0]
    infl = None
    if cross.size:
        j = cross[-1]
        a, b = d2[j], d2[j + 1]
        infl = float(fine[j] + (fine[j + 1] - fine[j]) * a / (a - b)) if a != b else float(fine[j])
    return infl, argmax, spl(grid)


# -- reference dynamics -----------------------------------------------------

@dataclass(frozen=True)
class SamuelsonResult:
    income: np.ndarray
    roots: tuple[complex, complex]
    modulus: float
    regime: str  # "damped", "sustained" or "explosive"
    oscillatory: bool


def samuelson_oracle(alpha: float, beta: float, G: float = 1.0, n: int = 50,
                     y0: float | None = None, y1: float | None = None) -> SamuelsonResult:
    """Multiplier-accelerator income path ``Y_t = G + a(1+b)Y_{t-1} - a b Y_{t-2}``.

    The regime follows from the roots of ``z**2 - a(1+b) z + a b``: modulus
    below one is damped, one is sustained, above one is explosive.
    Initial values default to one step away from the fixed point.
    """
    a, b = float(alpha), float(beta)
    c1, c2 = a * (1.0 + b), a * b
    disc = complex(c1 * c1 - 4.0 * c2)
    r1 = (c1 + disc ** 0.5) / 2.0
    r2 = (c1 - disc ** 0.5) / 2.0
    modulus = max(abs(r1), abs(r2))
    tol = 1e-12
    regime = "damped" if modulus < 1 - tol else ("sustained" if modulus <= 1 + tol else "explosive")
    star = G / (1.0 - a) if a != 1 else 0.0
    y = np.empty(max(n, 2))
    y[0] = star if y0 is None else y0
    y[1] = (star + G) if y1 is None else y1
    for t in range(2, len(y)):
        y[t] = G + c1 * y[t - 1] - c2 * y[t - 2]
    return SamuelsonResult(income=y[:n], roots=(r1, r2), modulus=float(modulus), regime=regime,
                           oscillatory=bool(disc.real < 0))


def oracle_parameters(config: EconomyConfig, state: EconomyState | None = None) -> tuple[float, float]:
    """Map the economy's behaviour onto the oracle's ``(alpha, beta)``.

    ``alpha`` is the propensity to consume out of pre-tax income and ``beta``
    the accelerator times the expectation weight times the output-weighted
    capital-output ratio at target utilisation.
    """
    alpha = config.mpc * (1.0 - config.tax_rate_income)
    if state is not None:
        x = state.firms.expected_demand
        k = state.kappa[state.firms.sector]
        kbar = float(np.sum(k * x) / np.sum(x))
    else:
        kbar = float(np.mean(config.capital_output_ratio))
    beta = config.accelerator * config.expectation_weight * kbar / config.target_utilization
    return alpha, beta
