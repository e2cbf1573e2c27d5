"""Quarterly stock-flow-consistent input-output agent-based economy."""

from cataclysm.economy.config import DEFAULT_SECTORS, EconomyConfig, spectral_radius
from cataclysm.economy.ops import leontief_requirements
from cataclysm.economy.state import (
    Bank,
    EconomyState,
    Firms,
    Government,
    Households,
    default_cells,
    default_sector_capital,
    init_economy,
    solve_steady_state,
)
from cataclysm.economy.step import QuarterOutcome, compute_national_accounts, step_quarter

__all__ = [
    "DEFAULT_SECTORS", "EconomyConfig", "spectral_radius", "leontief_requirements",
    "Bank", "EconomyState", "Firms", "Government", "Households", "default_cells",
    "default_sector_capital", "init_economy", "solve_steady_state",
    "QuarterOutcome", "compute_national_accounts", "step_quarter",
]
