"""Probabilistic flood hazard on a grid of geolocated capital.

Each cell carries a logarithmic loss-exceedance marginal and a protection
level. Events of a requested return period are sampled by coupling the cells
through a Gumbel copula whose dependence grows with the event return period,
then rescaling so the mean national loss follows a calibrated exceedance
curve.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from cataclysm.copula import gumbel_exponents
from cataclysm.errors import (
    CalibrationInfeasibleError,
    CalibrationRequiredError,
    ConfigError,
    InvalidParameterError,
)

COPULA_FAMILIES = ("independence", "gumbel")


@dataclass(frozen=True)
class Cell:
    id: int
    coords: tuple[float, float]
    capital_by_sector: np.ndarray
    dwelling_stock: float
    protection_T: float = 1.0
    severity_scale: float = 1.0

    def __post_init__(self):
        cap = np.asarray(self.capital_by_sector, dtype=float)
        object.__setattr__(self, "capital_by_sector", cap)
        if np.any(cap < 0) or self.dwelling_stock < 0:
            raise InvalidParameterError(f"cell {self.id}: negative capital or dwellings")
        if not self.protection_T >= 1:
            raise InvalidParameterError(f"cell {self.id}: protection_T must be >= 1")
        if self.severity_scale < 0:
            raise InvalidParameterError(f"cell {self.id}: severity_scale must be >= 0")

    @property
    def total_value(self) -> float:
        return float(self.capital_by_sector.sum() + self.dwelling_stock)


@dataclass(frozen=True)
class FloodEvent:
    return_period_T: float
    cell_loss_fraction: np.ndarray
    total_direct_loss: float
    total_loss_fraction: float
    cell_ids: tuple[int, ...] = ()

    @classmethod
    def from_fractions(cls, model: "HazardModel", T: float, fractions: np.ndarray) -> "FloodEvent":
        fractions = np.asarray(fractions, dtype=float)
        loss = float(np.sum(fractions * model.cell_values))
        total = model.national_value
        return cls(
            return_period_T=float(T),
            cell_loss_fraction=fractions,
            total_direct_loss=loss,
            total_loss_fraction=loss / total if total > 0 else 0.0,
            cell_ids=model.cell_ids,
        )


@dataclass
class HazardModel:
    """Cell inventory plus marginal and dependence parameters.

    ``loss_scale`` and ``reference_T`` are the per-cell marginal parameters
    (``c_r`` and ``T0_r``). ``calibration_targets`` lists ``(T, national loss
    fraction)`` pairs; :func:`calibrate` fills ``multipliers`` with one global
    severity multiplier per target.
    """

    cells: Sequence[Cell]
    loss_scale: np.ndarray
    reference_T: np.ndarray
    copula_family: str = "gumbel"
    dependence_slope: float = 0.4
    calibration_targets: Sequence[tuple[float, float]] = ((100.0, 0.006), (250.0, 0.012), (1500.0, 0.10))
    t_max: float = 1e4
    calibration_seed: int = 20130101
    calibration_draws: int = 512
    multipliers: tuple[tuple[float, float], ...] | None = None
    loss_quantiles: tuple[tuple[float, np.ndarray], ...] | None = None
    _arrays: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.cells = tuple(self.cells)
        n = len(self.cells)
        self.loss_scale = np.broadcast_to(np.asarray(self.loss_scale, dtype=float), (n,)).copy()
        self.reference_T = np.broadcast_to(np.asarray(self.reference_T, dtype=float), (n,)).copy()
        if self.copula_family not in COPULA_FAMILIES:
            raise ConfigError(f"unknown copula family {self.copula_family!r}", key="copula_family")
        if self.dependence_slope < 0:
            raise ConfigError("dependence slope must be >= 0", key="dependence_slope")
        if np.any(self.reference_T < 1):
            raise InvalidParameterError("reference return periods must be >= 1")
        self.calibration_targets = tuple(sorted((float(t), float(y)) for t, y in self.calibration_targets))
        if n:
            cap = np.stack([c.capital_by_sector for c in self.cells])
        else:
            cap = np.zeros((0, 0))
        dw = np.array([c.dwelling_stock for c in self.cells], dtype=float)
        self._arrays = {
            "capital": cap,
            "dwellings": dw,
            "values": cap.sum(axis=1) + dw if n else dw,
            "protection": np.array([c.protection_T for c in self.cells], dtype=float),
            "severity": np.array([c.severity_scale for c in self.cells], dtype=float),
        }

    # array views -----------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def cell_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.cells)

    @property
    def capital_matrix(self) -> np.ndarray:
        return self._arrays["capital"]

    @property
    def dwellings(self) -> np.ndarray:
        return self._arrays["dwellings"]

    @property
    def cell_values(self) -> np.ndarray:
        return self._arrays["values"]

    @property
    def protection(self) -> np.ndarray:
        return self._arrays["protection"]

    @property
    def severity_scale(self) -> np.ndarray:
        return self._arrays["severity"]

    @property
    def national_value(self) -> float:
        return float(self.cell_values.sum())

    @property
    def is_calibrated(self) -> bool:
        return self.multipliers is not None

    def theta_of_T(self, T: float) -> float:
        if self.copula_family == "independence":
            return 1.0
        return 1.0 + self.dependence_slope * math.log(max(float(T), 1.0))

    def exceedance_target(self, T: float) -> float:
        """National loss fraction of the calibrated exceedance curve at ``T``.

        Log-log interpolation between targets, linear extrapolation in log-log
        space beyond them.
        """
        return float(np.exp(_loglog_interp(self.calibration_targets, T)))

    def return_period_for_loss(self, fraction: float) -> float:
        """Inverse of :meth:`exceedance_target`."""
        if fraction <= 0:
            return 1.0
        pts = [(math.log(y), math.log(t)) for t, y in self.calibration_targets]
        if len(pts) == 1:
            return self.calibration_targets[0][0]
        return float(np.exp(_interp_extrap([p[0] for p in pts], [p[1] for p in pts], math.log(fraction))))

    def loss_quantile(self, T: float, q: float) -> float:
        """National loss fraction at severity rank ``q`` for return period ``T``.

        Between calibration targets the quantile functions are blended
        geometrically in log T; beyond them they are extended along the
        end segment of the exceedance curve. Nondecreasing in both arguments.
        """
        if self.loss_quantiles is None:
            raise CalibrationRequiredError("hazard model must be calibrated before sampling")
        tables = self.loss_quantiles
        n = tables[0][1].size
        j = min(int(q * n), n - 1)
        vals = np.array([tab[j] for _, tab in tables])
        logt = np.log([t for t, _ in tables])
        x = math.log(max(float(T), 1.0))
        if len(tables) == 1:
            return float(vals[0])
        if x <= logt[0]:
            slope = math.log(self.calibration_targets[1][1] / self.calibration_targets[0][1]) / (logt[1] - logt[0])
            out = vals[0] * math.exp(slope * (x - logt[0]))
        elif x >= logt[-1]:
            slope = math.log(self.calibration_targets[-1][1] / self.calibration_targets[-2][1]) / (
                logt[-1] - logt[-2]
            )
            out = vals[-1] * math.exp(slope * (x - logt[-1]))
        else:
            i = int(np.searchsorted(logt, x, side="right")) - 1
            w = (x - logt[i]) / (logt[i + 1] - logt[i])
            a, b = vals[i], vals[i + 1]
            out = 0.0 if a <= 0 or b <= 0 else a ** (1 - w) * b**w
        return float(min(out, 0.9 * self.exposed_share(T)))

    def exposed_share(self, T: float) -> float:
        """Share of national value in cells whose protection a T-year flood overtops."""
        if self.national_value <= 0:
            return 0.0
        return float(self.cell_values[self.protection < T].sum() / self.national_value)

    def multiplier(self, T: float) -> float:
        if self.multipliers is None:
            raise CalibrationRequiredError("hazard model must be calibrated before sampling")
        return float(np.exp(_loglog_interp(self.multipliers, T)))


def _interp_extrap(xs, ys, x):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) == 1:
        return float(ys[0])
    if x <= xs[0]:
        i = 0
    elif x >= xs[-1]:
        i = len(xs) - 2
    else:
        return float(np.interp(x, xs, ys))
    slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
    return float(ys[i] + slope * (x - xs[i]))


def _loglog_interp(pairs, T):
    pairs = tuple(pairs)
    if not pairs:
        raise CalibrationRequiredError("no calibration points available")
    xs = [math.log(t) for t, _ in pairs]
    ys = [math.log(y) for _, y in pairs]
    return _interp_extrap(xs, ys, math.log(max(float(T), 1.0)))


def marginal_loss_fraction(cell: Cell, T: float, loss_scale: float, reference_T: float) -> float:
    """Loss fraction of ``cell`` in a local flood of return period ``T``.

    ``clamp(severity_scale * loss_scale * ln(T / reference_T), 0, 1)`` once the
    flood overtops the cell's protection, zero otherwise.

    >>> c = Cell(0, (0, 0), np.zeros(1), 0.0, protection_T=1.0)
    >>> round(marginal_loss_fraction(c, 250, 0.05, 30), 4)
    0.106
    """
    if T < 1:
        raise InvalidParameterError(f"return period must be >= 1, got {T}")
    if not T > cell.protection_T:
        return 0.0
    raw = cell.severity_scale * loss_scale * math.log(T / reference_T)
    return min(max(raw, 0.0), 1.0)


def _local_severity(model: HazardModel, s_exp: np.ndarray, T: float) -> np.ndarray:
    """Unclamped marginal severities for copula exponents ``s`` (``U = exp(-s)``)."""
    one_minus_u = -np.expm1(-s_exp)
    with np.errstate(divide="ignore"):
        t_local = np.clip(1.0 / one_minus_u, 1.0, model.t_max)
    z = model.severity_scale * model.loss_scale * np.log(t_local / model.reference_T)
    z = np.where(t_local > model.protection, z, 0.0)
    z = np.where(model.protection < T, z, 0.0)
    return np.maximum(z, 0.0)


def _copula_exponents(model: HazardModel, T: float, uniforms: np.ndarray) -> np.ndarray:
    return gumbel_exponents(model.theta_of_T(T), uniforms)


def _draw_pattern(model: HazardModel, T: float, rng: np.random.Generator) -> np.ndarray:
    w = rng.random((1, model.n_cells + 2))
    z = _local_severity(model, _copula_exponents(model, T, w)[0], T)
    return np.clip(model.multiplier(T) * z, 0.0, 1.0)


def _place_loss(
    model: HazardModel, T: float, loss_fraction: float, rng: np.random.Generator, max_tries: int = 1000
) -> FloodEvent:
    if loss_fraction <= 0 or model.n_cells == 0:
        return FloodEvent.from_fractions(model, T, np.zeros(model.n_cells))
    values = model.cell_values / model.national_value
    for _ in range(max_tries):
        pattern = _draw_pattern(model, T, rng)
        if values[pattern > 0].sum() > loss_fraction * 1.05:
            return scale_event(model, FloodEvent.from_fractions(model, T, pattern), loss_fraction)
    raise CalibrationInfeasibleError(
        f"no spatial pattern in {max_tries} draws can carry loss fraction {loss_fraction:g} at T={T:g}"
    )


def sample_event(
    model: HazardModel, T: float, rng: np.random.Generator, rank: float | None = None
) -> FloodEvent:
    """Draw one geolocated flood of return period ``T``.

    A severity rank ``q`` (uniform unless given) fixes the national loss at the
    calibrated quantile for ``T``; the copula at ``theta_of_T(T)`` fixes where
    it lands. For a fixed rank the total is nondecreasing in ``T``.
    """
    if T < 1:
        raise InvalidParameterError(f"return period must be >= 1, got {T}")
    model.multiplier(T)
    q = rng.random() if rank is None else float(rank)
    if not 0 <= q < 1:
        raise InvalidParameterError(f"severity rank must lie in [0, 1), got {q}")
    return _place_loss(model, T, model.loss_quantile(T, q), rng)


def sample_events(
    model: HazardModel, T: float, n: int, rng: np.random.Generator, stratified: bool = True
) -> list[FloodEvent]:
    """``n`` events at return period ``T``.

    With ``stratified`` the severity ranks form a randomly permuted Latin
    hypercube, which removes most of the heavy-tail noise from ensemble means.
    """
    if stratified:
        ranks = (rng.permutation(n) + rng.random(n)) / n
    else:
        ranks = rng.random(n)
    return [sample_event(model, T, rng, rank=q) for q in ranks]


def scale_fractions(fractions: np.ndarray, weights: np.ndarray, loss_fraction: float) -> np.ndarray:
    """Rescale cell fractions so that ``sum(fractions * weights)`` equals ``loss_fraction``.

    ``weights`` are cell value shares summing to one. Cells saturate at full
    destruction; the common factor is found by bisection and cells with zero
    loss stay at zero.
    """
    if loss_fraction < 0:
        raise InvalidParameterError("loss fraction must be >= 0")
    f = np.asarray(fractions, dtype=float)
    values = np.asarray(weights, dtype=float)
    if loss_fraction == 0:
        return np.zeros_like(f)
    reachable = float(values[f > 0].sum())
    if loss_fraction > reachable * (1 - 1e-12):
        raise CalibrationInfeasibleError(
            f"event touches only {reachable:.4f} of national capital, cannot reach {loss_fraction}"
        )

    def total(k):
        return float(np.sum(np.minimum(k * f, 1.0) * values))

    lo, hi = 0.0, loss_fraction / total(1.0) if total(1.0) > 0 else 1.0
    while total(hi) < loss_fraction:
        lo, hi = hi, hi * 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < loss_fraction:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    scaled = np.minimum(hi * f, 1.0)
    # absorb the last rounding error in the unsaturated cells
    free = scaled < 1.0
    resid = loss_fraction - float(np.sum(scaled * values))
    wfree = float(np.sum(scaled[free] * values[free]))
    if wfree > 0:
        scaled[free] *= 1.0 + resid / wfree
    return np.clip(scaled, 0.0, 1.0)


def scale_event(model: HazardModel, event: FloodEvent, loss_fraction: float) -> FloodEvent:
    """Rescale an event so the national loss equals ``loss_fraction``."""
    scaled = scale_fractions(event.cell_loss_fraction, model.cell_values / model.national_value, loss_fraction)
    return FloodEvent.from_fractions(model, event.return_period_T, scaled)


def sample_event_for_loss(model: HazardModel, loss_fraction: float, rng: np.random.Generator) -> FloodEvent:
    """Draw a spatial pattern at the matching return period and scale it to ``loss_fraction``."""
    if loss_fraction < 0:
        raise InvalidParameterError("loss fraction must be >= 0")
    if loss_fraction == 0:
        return FloodEvent.from_fractions(model, 1.0, np.zeros(model.n_cells))
    T = model.return_period_for_loss(loss_fraction)
    return _place_loss(model, T, loss_fraction, rng)


def _calibration_points(model: HazardModel) -> np.ndarray:
    sampler = qmc.Sobol(d=model.n_cells + 2, scramble=True, seed=model.calibration_seed)
    pts = sampler.random(model.calibration_draws)
    eps = np.finfo(float).eps
    return np.clip(pts, eps, 1 - eps)


def expected_loss_fraction(model: HazardModel, T: float, multiplier: float, points: np.ndarray) -> float:
    z = _local_severity(model, _copula_exponents(model, T, points), T)
    frac = np.clip(multiplier * z, 0.0, 1.0) @ model.cell_values / model.national_value
    return float(frac.mean())


def calibrate(model: HazardModel) -> HazardModel:
    """Fit one global severity multiplier per calibration target.

    Uses the same scrambled-Sobol draws for every target, so the result is a
    deterministic function of ``calibration_seed``. Returns a new model.
    """
    if not model.calibration_targets:
        raise CalibrationInfeasibleError("no calibration targets given")
    if model.n_cells == 0 or model.national_value <= 0:
        raise CalibrationInfeasibleError("empty grid: there is no capital to destroy")
    points = _calibration_points(model)
    values = model.cell_values / model.national_value
    fitted, quantiles = [], []
    for T, target in model.calibration_targets:
        exposed = float(values[model.protection < T].sum())
        if not 0 < target < exposed:
            raise CalibrationInfeasibleError(
                f"target (T={T:g}, loss={target:g}) exceeds unprotected capital share {exposed:.4f}"
            )
        z = _local_severity(model, _copula_exponents(model, T, points), T)
        ceiling = float(((z > 0) @ values).mean())
        if target >= ceiling:
            raise CalibrationInfeasibleError(
                f"target (T={T:g}, loss={target:g}) unreachable: at most {ceiling:.4f} of capital floods"
            )

        def mean_loss(k, z=z):
            return float((np.clip(k * z, 0.0, 1.0) @ values).mean())

        lo, hi = 0.0, 1.0
        while mean_loss(hi) < target:
            lo, hi = hi, hi * 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mean_loss(mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * hi:
                break
        k = 0.5 * (lo + hi)
        fitted.append((T, k))
        quantiles.append((T, np.sort(np.clip(k * z, 0.0, 1.0) @ values)))
    # Rank-wise monotone in T, so a fixed severity rank never shrinks with T.
    stacked = np.maximum.accumulate(np.stack([q for _, q in quantiles]), axis=0)
    quantiles = tuple((T, row) for (T, _), row in zip(quantiles, stacked))
    return replace(model, multipliers=tuple(fitted), loss_quantiles=quantiles)


# -- inventories ------------------------------------------------------------

def synthetic_grid(
    sector_capital: np.ndarray,
    dwelling_total: float,
    n_cells: int = 200,
    seed: int = 7,
    capital_city_share: float = 0.2,
) -> tuple[list[Cell], np.ndarray, np.ndarray]:
    """Lognormal capital landscape with one fully protected capital city.

    Returns ``(cells, loss_scale, reference_T)``. Sector totals and the
    dwelling total are matched exactly.
    """
    rng = np.random.default_rng(seed)
    sector_capital = np.asarray(sector_capital, dtype=float)
    n_sectors = sector_capital.size
    width = max(1, int(round(math.sqrt(2 * n_cells))))
    xs = np.arange(n_cells) % width
    ys = np.arange(n_cells) // width
    weight = rng.lognormal(0.0, 1.0, n_cells)
    city = n_cells - 1 - width // 3 if n_cells > 1 else 0
    weight[city] = 0.0
    weight *= (1 - capital_city_share) / weight.sum() if n_cells > 1 else 0.0
    weight[city] = capital_city_share if n_cells > 1 else 1.0

    mix = rng.lognormal(0.0, 0.3, (n_cells, n_sectors)) * weight[:, None]
    mix /= mix.sum(axis=0, keepdims=True)
    capital = mix * sector_capital[None, :]
    dw = weight * rng.lognormal(0.0, 0.2, n_cells)
    dw *= dwelling_total / dw.sum()

    protection = rng.choice([1.0, 30.0, 100.0, 300.0], size=n_cells, p=[0.6, 0.25, 0.12, 0.03])
    protection[city] = math.inf
    loss_scale = rng.uniform(0.02, 0.08, n_cells)
    reference_T = np.maximum(protection, rng.uniform(1.0, 3.0, n_cells))
    reference_T[city] = 1.0
    cells = [
        Cell(
            id=i,
            coords=(float(xs[i]), float(ys[i])),
            capital_by_sector=capital[i],
            dwelling_stock=float(dw[i]),
            protection_T=float(protection[i]),
        )
        for i in range(n_cells)
    ]
    return cells, loss_scale, reference_T


def read_inventory(path: str | Path) -> tuple[list[Cell], np.ndarray | None, np.ndarray | None]:
    """Read a cell inventory CSV.

    Required header: ``cell_id,x,y,dwellings,protection_T,capital_s1..capital_sS``.
    Optional trailing columns ``loss_scale``, ``reference_T`` and
    ``severity_scale`` set per-cell marginal parameters.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ["cell_id", "x", "y", "dwellings", "protection_T"]
        missing = [k for k in required if k not in header]
        if missing:
            raise ConfigError(f"{path}: missing inventory column {missing[0]!r}", key=missing[0])
        sector_cols = [h for h in header if h.startswith("capital_s")]
        if not sector_cols:
            raise ConfigError(f"{path}: no capital_s<k> columns", key="capital_s1")
        sector_cols.sort(key=lambda h: int(h[len("capital_s"):]))
        cells, scales, refs = [], [], []
        for row in reader:
            cells.append(
                Cell(
                    id=int(row["cell_id"]),
                    coords=(float(row["x"]), float(row["y"])),
                    capital_by_sector=np.array([float(row[h]) for h in sector_cols]),
                    dwelling_stock=float(row["dwellings"]),
                    protection_T=float(row["protection_T"]),
                    severity_scale=float(row.get("severity_scale") or 1.0),
                )
            )
            scales.append(row.get("loss_scale"))
            refs.append(row.get("reference_T"))
    loss_scale = None if any(s in (None, "") for s in scales) else np.array(scales, dtype=float)
    reference_T = None if any(r in (None, "") for r in refs) else np.array(refs, dtype=float)
    return cells, loss_scale, reference_T


def write_inventory(path: str | Path, cells: Sequence[Cell], loss_scale=None, reference_T=None) -> None:
    n_sectors = cells[0].capital_by_sector.size if cells else 0
    header = ["cell_id", "x", "y", "dwellings", "protection_T"]
    header += [f"capital_s{k + 1}" for k in range(n_sectors)]
    extra = loss_scale is not None and reference_T is not None
    if extra:
        header += ["loss_scale", "reference_T", "severity_scale"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, c in enumerate(cells):
            row = [c.id, repr(c.coords[0]), repr(c.coords[1]), repr(c.dwelling_stock), repr(c.protection_T)]
            row += [repr(float(v)) for v in c.capital_by_sector]
            if extra:
                row += [repr(float(loss_scale[i])), repr(float(reference_T[i])), repr(c.severity_scale)]
            w.writerow(row)
