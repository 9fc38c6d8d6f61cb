"""Tuning the CN step through a discretised one-dimensional surrogate chain.

Under a Gaussian approximation of the log-likelihood error, the auxiliary
chain reduces to a scalar ``z`` with target ``N(sigma_phi, 1)`` and CN
proposal ``N(sqrt(1 - sigma_z^2) z, sigma_z^2)``. The state space is cut into
``L`` equal bins, giving a finite Metropolis-Hastings transition matrix
whose jump probability and asymptotic variance can be computed exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

log = logging.getLogger(__name__)

# scan grids: sigma_phi in {0, 0.25, .., 3.5}, sigma_z in {0.05, 0.075, .., 1}
SIGMA_PHI_GRID = tuple(np.round(np.arange(0, 15) * 0.25, 10))
SIGMA_Z_GRID = tuple(np.round(0.05 + np.arange(0, 39) * 0.025, 10))
COND_WARN = 1e10


@dataclass(frozen=True)
class ZSpaceModel:
    sigma_phi: float
    sigma_z: float

    def __post_init__(self):
        if self.sigma_phi < 0:
            raise ValueError("sigma_phi must be non-negative")
        if not 0.0 < self.sigma_z <= 1.0:
            raise ValueError("sigma_z must lie in (0, 1]")


@dataclass(frozen=True)
class DiscretizedChain:
    grid: np.ndarray
    P: np.ndarray
    pi: np.ndarray
    delta: float


def z_acceptance(z, z_prime, sigma_phi: float):
    """``min(1, exp(sigma_phi * (z' - z)))``, elementwise."""
    out = np.minimum(1.0, np.exp(sigma_phi * (np.asarray(z_prime) - np.asarray(z))))
    return float(out) if out.ndim == 0 else out


def bin_centres(z_min: float, z_max: float, L: int):
    delta = (z_max - z_min) / L
    return z_min + (np.arange(1, L + 1) - 0.5) * delta, delta


def build_transition(model: ZSpaceModel, z_min: float = -4.0, z_max: float | None = None,
                     L: int = 1000) -> DiscretizedChain:
    """Discretised MH transition matrix on ``L`` bins of ``(z_min, z_max)``.

    ``z_max`` defaults to ``sigma_phi + 4``. Off-diagonal entries are
    proposal density times acceptance times bin width; the diagonal takes
    the remainder, including proposal mass that falls outside the grid.
    """
    if z_max is None:
        z_max = model.sigma_phi + 4.0
    if L < 2 or not z_min < z_max:
        raise ValueError("need L >= 2 and z_min < z_max")
    z, delta = bin_centres(z_min, z_max, L)
    s = model.sigma_z
    mean = math.sqrt(1.0 - s * s) * z
    r = (z[None, :] - mean[:, None]) / s
    q = np.exp(-0.5 * r * r) / (s * math.sqrt(2.0 * math.pi))
    P = q * z_acceptance(z[:, None], z[None, :], model.sigma_phi) * delta
    np.fill_diagonal(P, 0.0)
    stay = 1.0 - P.sum(axis=1)
    if np.any(stay < 0.0):
        raise ValueError(
            f"negative stay probability ({stay.min():.3g}) for sigma_z={s}, L={L}: "
            "the grid is too coarse, increase L")
    P[np.diag_indices(L)] = stay
    pi = np.exp(-0.5 * (z - model.sigma_phi) ** 2)
    return DiscretizedChain(z, P, pi / pi.sum(), delta)


def jump_probability(chain: DiscretizedChain) -> float:
    return float(np.dot(chain.pi, 1.0 - np.diag(chain.P)))


def asymptotic_variance(chain: DiscretizedChain, phi_values) -> float:
    """Asymptotic variance ``phi' (2 B Z - B - B A) phi`` of ergodic averages.

    ``Z = (I - P + A)^{-1}`` is the fundamental matrix, ``A`` has every row
    equal to ``pi`` and ``B = diag(pi)``. ``Z phi`` is obtained by an LU solve.
    """
    pi, P = chain.pi, chain.P
    f = np.asarray(phi_values, dtype=float)
    L = pi.size
    M = np.eye(L) - P + np.outer(np.ones(L), pi)
    lu, piv = lu_factor(M, check_finite=False)
    rcond, info = lapack.dgecon(lu, np.abs(M).sum(axis=0).max())
    if info != 0 or rcond == 0.0:
        raise np.linalg.LinAlgError("I - (P - A) is singular")
    if 1.0 / rcond > COND_WARN:
        log.warning("fundamental matrix is ill-conditioned (cond ~ %.3g)", 1.0 / rcond)
    zf = lu_solve((lu, piv), f, check_finite=False)
    pf = pi * f
    mean = pf.sum()
    return float(2.0 * np.dot(pf, zf) - np.dot(pf, f) - mean * mean)


def scan_optimal_sigma_z(sigma_phi_grid=SIGMA_PHI_GRID, sigma_z_grid=SIGMA_Z_GRID,
                         z_min: float = -4.0, z_margin: float = 4.0, L: int = 1000):
    """Jump probability and asymptotic variance of ``phi(z) = z`` over both grids.

    Returns ``(long_rows, optimal_rows)``: ``long_rows`` holds
    ``(sigma_phi, sigma_z, p_jump, nu)`` for every pair and ``optimal_rows``
    ``(sigma_phi, opt_sigma_z, opt_p_jump, opt_nu)`` with the variance-minimising
    ``sigma_z`` for each ``sigma_phi`` (ties go to the larger ``sigma_z``).
    """
    if len(sigma_phi_grid) == 0 or len(sigma_z_grid) == 0:
        raise ValueError("grids must be non-empty")
    long_rows, optimal = [], []
    for sp in sigma_phi_grid:
        best = None
        for sz in sigma_z_grid:
            chain = build_transition(ZSpaceModel(float(sp), float(sz)), z_min, sp + z_margin, L)
            row = (float(sp), float(sz), jump_probability(chain),
                   asymptotic_variance(chain, chain.grid))
            long_rows.append(row)
            if best is None or row[3] <= best[3]:
                best = row
        optimal.append(best)
    return long_rows, optimal
