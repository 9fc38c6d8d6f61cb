"""Mixing and estimator diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .aux_variables import propose_cn, sample_prior

log = logging.getLogger(__name__)

MAX_LAG = 100


def autocorrelation(x, max_lag: int = MAX_LAG) -> np.ndarray:
    """Empirical autocorrelations ``rho_0 .. rho_max_lag``.

    Autocovariances use the fixed denominator ``n`` at every lag, so the
    sequence is positive semidefinite.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n <= max_lag:
        raise ValueError(f"series length {n} must exceed max_lag {max_lag}")
    d = x - x.mean()
    c0 = np.dot(d, d)
    if c0 == 0.0:
        raise ValueError("autocorrelation undefined for a constant series")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for lag in range(1, max_lag + 1):
        acf[lag] = np.dot(d[:-lag], d[lag:]) / c0
    return acf


def iact(samples, max_lag: int = MAX_LAG) -> float:
    """Integrated autocorrelation time ``1 + 2 sum_{tau=1}^{max_lag} rho_tau``.

    The truncation lag is fixed; the value is not floored at 1.
    """
    acf = autocorrelation(samples, max_lag)
    return float(1.0 + 2.0 * acf[1:].sum())


@dataclass(frozen=True)
class IACTReport:
    iact: np.ndarray
    acf: np.ndarray
    acceptance_rate: float

    @property
    def below_one(self) -> np.ndarray:
        return self.iact < 1.0


def iact_report(trace, burn_in: int = 0, max_lag: int = MAX_LAG) -> IACTReport:
    theta = trace.theta[burn_in:]
    acfs = np.array([autocorrelation(theta[:, j], max_lag) for j in range(theta.shape[1])])
    values = 1.0 + 2.0 * acfs[:, 1:].sum(axis=1)
    if np.any(values < 1.0):
        log.warning("IACT below 1 for parameters %s", np.flatnonzero(values < 1.0).tolist())
    return IACTReport(values, acfs, float(trace.accepted[burn_in:].mean()))


def loglik_correlation_scan(loglik, u_shape, sigma_u_grid, n_pairs: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Correlation of log-likelihood estimates before and after one CN step.

    ``loglik(u)`` evaluates the estimator at a fixed parameter. Returns an
    ``(len(grid), 2)`` array of ``(sigma_u, correlation)``. At ``sigma_u = 0``
    the pair is identical and the correlation is 1 by construction.
    """
    rows = []
    for s in sigma_u_grid:
        s = float(s)
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"sigma_u must lie in [0, 1], got {s}")
        a = np.empty(n_pairs)
        b = np.empty(n_pairs)
        for i in range(n_pairs):
            u = sample_prior(u_shape, rng)
            u2 = u if s == 0.0 else propose_cn(u, s, rng)
            a[i] = loglik(u)
            b[i] = loglik(u2)
        rows.append((s, 1.0 if s == 0.0 else float(np.corrcoef(a, b)[0, 1])))
    return np.array(rows)


def fit_correlation_line(table, min_sigma_u: float = 0.2):
    """Least-squares ``corr = intercept + slope * sigma_u`` over ``sigma_u > min_sigma_u``."""
    table = np.asarray(table)
    sel = table[:, 0] > min_sigma_u
    slope, intercept = np.polyfit(table[sel, 0], table[sel, 1], 1)
    return float(slope), float(intercept)


def loglik_stddev(loglik, u_shape, n_draws: int, rng: np.random.Generator) -> float:
    if n_draws < 2:
        raise ValueError("n_draws must be at least 2")
    values = np.array([loglik(sample_prior(u_shape, rng)) for _ in range(n_draws)])
    return float(np.std(values, ddof=1))


QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


def posterior_summary(trace, burn_in: int = 0, max_lag: int = MAX_LAG) -> dict:
    """Posterior means, stds, quantiles, acceptance rate and IACT after burn-in."""
    if not 0 <= burn_in < len(trace):
        raise ValueError("burn_in must lie in [0, len(trace))")
    theta = trace.theta[burn_in:]
    iacts = []
    for j in range(theta.shape[1]):
        try:
            iacts.append(iact(theta[:, j], max_lag))
        except ValueError:
            iacts.append(float("nan"))
    return {
        "mean": theta.mean(axis=0).tolist(),
        "std": theta.std(axis=0).tolist(),
        "quantiles": {str(q): np.quantile(theta, q, axis=0).tolist() for q in QUANTILES},
        "acceptance_rate": float(trace.accepted[burn_in:].mean()),
        "iact": iacts,
        "n_samples": int(theta.shape[0]),
    }
