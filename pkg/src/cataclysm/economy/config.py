"""Economy configuration: technology, behaviour and scale parameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from cataclysm.errors import ConfigError, NonProductiveEconomyError

SHARE_TOL = 1e-12

DEFAULT_SECTORS = (
    "agriculture",
    "manufacturing",
    "utilities",
    "construction",
    "trade",
    "transport",
    "business_services",
    "real_estate",
    "public_services",
    "other_services",
)

# Column j holds the inputs bought from each sector per unit output of sector j.
_DEFAULT_A = [
    # agr   man   utl   con   trd   trn   bsv   rea   pub   oth
    [0.10, 0.04, 0.00, 0.01, 0.01, 0.00, 0.00, 0.00, 0.01, 0.02],  # agriculture
    [0.12, 0.25, 0.08, 0.22, 0.06, 0.10, 0.04, 0.01, 0.06, 0.07],  # manufacturing
    [0.03, 0.03, 0.15, 0.01, 0.02, 0.02, 0.01, 0.01, 0.02, 0.02],  # utilities
    [0.01, 0.01, 0.03, 0.12, 0.01, 0.01, 0.01, 0.03, 0.02, 0.01],  # construction
    [0.04, 0.05, 0.02, 0.05, 0.05, 0.04, 0.02, 0.00, 0.02, 0.04],  # trade
    [0.03, 0.04, 0.02, 0.03, 0.07, 0.12, 0.03, 0.00, 0.02, 0.02],  # transport
    [0.04, 0.08, 0.06, 0.08, 0.10, 0.08, 0.18, 0.04, 0.07, 0.08],  # business services
    [0.01, 0.01, 0.01, 0.01, 0.04, 0.02, 0.04, 0.02, 0.02, 0.03],  # real estate
    [0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.01, 0.00],  # public services
    [0.01, 0.01, 0.01, 0.01, 0.02, 0.01, 0.03, 0.01, 0.02, 0.04],  # other services
]


@dataclass
class EconomyConfig:
    """All knobs of the economy. Arrays are length ``n_sectors`` unless noted.

    Time unit is one quarter; rates are per quarter.
    """

    sector_names: tuple[str, ...] = DEFAULT_SECTORS
    technical_coefficients: np.ndarray = field(default_factory=lambda: np.array(_DEFAULT_A))
    labor_share: np.ndarray = field(
        default_factory=lambda: np.array([0.45, 0.60, 0.40, 0.65, 0.62, 0.58, 0.60, 0.12, 0.75, 0.62])
    )
    capital_output_ratio: np.ndarray = field(
        default_factory=lambda: np.array([6.0, 3.5, 10.0, 2.0, 3.0, 6.0, 2.5, 1.0, 4.0, 3.0])
    )
    consumption_shares: np.ndarray = field(
        default_factory=lambda: np.array([0.03, 0.25, 0.05, 0.02, 0.20, 0.07, 0.08, 0.05, 0.10, 0.15])
    )
    government_shares: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.04, 0.0, 0.04, 0.0, 0.0, 0.08, 0.0, 0.80, 0.04])
    )
    investment_supply_shares: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.4, 0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    )
    construction_sector: int = 3
    manufacturing_sector: int = 1
    real_estate_sector: int = 7

    # scale
    population: float = 1e6
    n_cohorts: int = 1000
    participation: float = 0.5
    base_unemployment: float = 0.05
    mean_wage: float = 10.0
    wage_dispersion: float = 0.3

    # households
    mpc: float = 0.8
    wealth_effect: float = 0.02
    imputed_rent_rate: float = 0.015
    dwelling_depreciation: float = 0.005
    dwelling_ratio: float = 0.8
    household_rebuild_rate: float = 0.1

    # firms
    expectation_weight: float = 0.5
    depreciation: float = 0.0125
    accelerator: float = 0.25
    target_utilization: float = 0.85
    utilization_band: float = 0.05  # no capacity adjustment inside target +- band
    liquidity_buffer: float = 0.5
    firm_rebuild_rate: float = 0.3
    repair_deferral: float = 0.08  # damaged share at which rebuilding runs at half speed
    substitution: float = 0.5
    disruption: float = 0.6

    # prices
    price_sensitivity: float = 0.05
    max_price_change: float = 0.02

    # bank
    max_leverage: float = 10.0
    credit_capacity: float = 0.05
    loan_repayment: float = 0.05

    # government
    tax_rate_income: float = 0.30
    tax_rate_profit: float = 0.25
    unemployment_benefit: float = 0.5
    infrastructure_share: float = 0.15
    government_rebuild_rate: float = 0.3
    fiscal_rule: float = 0.5

    # exogenous noise and trend
    demand_noise: float = 0.003
    demand_persistence: float = 0.8
    sector_noise: float = 0.01
    drift: float = 0.0

    # grid
    n_cells: int = 200
    grid_seed: int = 7

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list) and f.name != "sector_names":
                try:
                    setattr(self, f.name, np.asarray(v, dtype=float))
                except ValueError as exc:
                    raise ConfigError(f"{f.name} must be numeric", key=f.name) from exc
        self.sector_names = tuple(self.sector_names)
        self.technical_coefficients = np.atleast_2d(np.asarray(self.technical_coefficients, dtype=float))

    @property
    def n_sectors(self) -> int:
        return len(self.sector_names)

    def validate(self) -> "EconomyConfig":
        S = self.n_sectors
        A = self.technical_coefficients
        if A.shape != (S, S):
            raise ConfigError(f"technical_coefficients must be {S}x{S}, got {A.shape}", key="technical_coefficients")
        for name in ("labor_share", "capital_output_ratio", "consumption_shares",
                     "government_shares", "investment_supply_shares"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (S,):
                raise ConfigError(f"{name} must have length {S}", key=name)
            if np.any(arr < 0):
                raise ConfigError(f"{name} must be nonnegative", key=name)
            setattr(self, name, arr)
        for name in ("consumption_shares", "government_shares", "investment_supply_shares"):
            total = float(getattr(self, name).sum())
            if abs(total - 1.0) > SHARE_TOL:
                raise ConfigError(f"{name} sums to {total!r}, expected 1", key=name)
        if np.any(A < 0):
            raise ConfigError("technical_coefficients must be nonnegative", key="technical_coefficients")
        rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if S else 0.0
        if rho >= 1.0:
            raise NonProductiveEconomyError(f"spectral radius of A is {rho:.6f} >= 1")
        if np.any(self.capital_output_ratio <= 0):
            raise ConfigError("capital_output_ratio must be positive", key="capital_output_ratio")
        for name in ("construction_sector", "manufacturing_sector", "real_estate_sector"):
            idx = getattr(self, name)
            if not 0 <= idx < S:
                raise ConfigError(f"{name} index {idx} out of range", key=name)
        for name in ("mpc", "participation", "expectation_weight", "target_utilization"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1]", key=name)
        if not 0 <= self.base_unemployment < 1:
            raise ConfigError("base_unemployment must lie in [0, 1)", key="base_unemployment")
        if self.n_cohorts < 1 or self.population <= 0:
            raise ConfigError("population and n_cohorts must be positive", key="population")
        for name in ("household_rebuild_rate", "firm_rebuild_rate", "government_rebuild_rate",
                     "disruption", "substitution", "infrastructure_share"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]", key=name)
        if self.repair_deferral < 0:
            raise ConfigError("repair_deferral must be nonnegative", key="repair_deferral")
        if not 0 <= self.utilization_band < self.target_utilization:
            raise ConfigError("utilization_band must lie in [0, target_utilization)", key="utilization_band")
        if self.max_leverage <= 0:
            raise ConfigError("max_leverage must be positive", key="max_leverage")
        return self

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, np.ndarray):
                v = v.tolist()
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EconomyConfig":
        names = {f.name for f in fields(cls)}
        for k in data:
            if k not in names:
                raise ConfigError(f"unknown economy key {k!r}", key=k)
        return cls(**data)


def spectral_radius(A: np.ndarray) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))
