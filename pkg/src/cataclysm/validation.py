"""Invariant suite shared by the ``validate`` command and the tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from cataclysm.damage import ReliefPolicy
from cataclysm.economy.ops import leontief_requirements
from cataclysm.runner import Model, TimeSeries, ensemble, oracle_parameters, run_pair, samuelson_oracle

GDP_TOL = 1e-6
NFA_TOL = 1e-9


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def accounting_violations(ts: TimeSeries) -> dict:
    """Worst relative errors of one run's accounting identities and caps."""
    gdp_gap = np.abs(ts.gdp_production - ts.gdp_expenditure) / np.abs(ts.gdp_production)
    nfa = np.abs(ts.net_financial_assets) / ts.financial_scale
    capacity = ts.capacity_excess / ts.gdp_production
    credit = (ts.loans - ts.credit_limit) / np.maximum(ts.credit_limit, 1.0)
    return {
        "gdp_identity": float(gdp_gap.max()),
        "net_financial_assets": float(nfa.max()),
        "capacity_excess": float(capacity.max()),
        "credit_excess": float(credit.max()),
    }


def accounting_checks(series: list[TimeSeries]) -> list[Check]:
    worst = {k: max(accounting_violations(ts)[k] for ts in series)
             for k in ("gdp_identity", "net_financial_assets", "capacity_excess", "credit_excess")}
    return [
        Check("gdp production = expenditure", worst["gdp_identity"] <= GDP_TOL,
              f"max relative gap {worst['gdp_identity']:.3e}"),
        Check("net financial assets = 0", worst["net_financial_assets"] <= NFA_TOL,
              f"max relative imbalance {worst['net_financial_assets']:.3e}"),
        Check("output within capacity", worst["capacity_excess"] <= NFA_TOL,
              f"max excess {worst['capacity_excess']:.3e} of GDP"),
        Check("loans within credit limit", worst["credit_excess"] <= NFA_TOL,
              f"max excess {worst['credit_excess']:.3e} of the limit"),
    ]


def run_suite(model: Model, seeds=(0, 1), loss_fraction: float = 0.012) -> list[Check]:
    """Accounting, pairing, null-event and oracle checks on a few runs."""
    cfg = model.config
    checks: list[Check] = []
    series, pairs = [], []
    for s in seeds:
        for x in (loss_fraction, 0.10):
            p = run_pair(model, s, loss_fraction=x)
            pairs.append(p)
            series += [p.baseline, p.shocked]
    checks += accounting_checks(series)

    k = 4 * cfg.pre_shock_years
    shared = all(np.array_equal(p.baseline.gdp_production[:k], p.shocked.gdp_production[:k]) for p in pairs)
    checks.append(Check("pairs share pre-shock draws", shared, f"{len(pairs)} pairs"))

    null = ensemble(model, n_seeds=len(seeds), loss_fraction=0.0, base_seed=int(seeds[0]))
    zero = all(not np.any(a) for a in (null.gdp_mean, null.unemployment_mean, null.debt_mean, null.gva_mean))
    checks.append(Check("zero loss gives zero metrics", zero, "exact zeros" if zero else "nonzero entries"))

    prof = cfg.relief.disbursement_profile
    try:
        ReliefPolicy(cfg.relief.severe_cap, prof)
        ok = True
    except ValueError:
        ok = False
    checks.append(Check("relief profile sums to 1", ok, f"sum {sum(prof)!r}"))

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(5):
        A = rng.uniform(0, 1, (10, 10))
        A *= 0.9 / np.max(np.abs(np.linalg.eigvals(A)))
        f = rng.uniform(0, 100, 10)
        x = leontief_requirements(A, f)
        ref = scipy.linalg.lu_solve(scipy.linalg.lu_factor(np.eye(10) - A), f)
        worst = max(worst, float(np.max(np.abs(x - ref) / np.abs(ref))))
    checks.append(Check("leontief solver vs dense solve", worst <= 1e-9, f"max relative error {worst:.2e}"))

    alpha, beta = oracle_parameters(cfg.economy, model.state)
    res = samuelson_oracle(alpha, beta)
    roots = np.roots([1.0, -alpha * (1 + beta), alpha * beta])
    err = min(abs(res.roots[0] - roots[0]) + abs(res.roots[1] - roots[1]),
              abs(res.roots[0] - roots[1]) + abs(res.roots[1] - roots[0]))
    checks.append(Check("samuelson roots", err <= 1e-12, f"alpha={alpha:.3f} beta={beta:.3f} regime={res.regime}"))
    return checks
