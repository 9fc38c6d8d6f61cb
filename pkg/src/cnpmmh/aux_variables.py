"""Auxiliary Gaussian variables and the proposals that move them.

An auxiliary block is a plain ``(rows, cols)`` float array of standard
normal variates, row-major by time index. Every likelihood estimate in this
package is a deterministic function of such a block.

Random numbers are always consumed in the same order for a single proposal:
first one uniform for the local/global coin, then ``rows * cols`` fresh
Gaussians. Both move kinds draw the Gaussians, so chains that share a seed
stay aligned across different ``sigma_u`` / ``alpha`` settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

LOCAL = 0
GLOBAL = 1

UNIFORM_EPS = 1e-12


@dataclass(frozen=True)
class AuxProposalConfig:
    """Step length of the Crank-Nicolson move and global-move probability."""

    sigma_u: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sigma_u <= 1.0:
            raise ValueError(f"sigma_u must lie in [0, 1], got {self.sigma_u}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.sigma_u == 0.0 and self.alpha == 0.0:
            raise ValueError("sigma_u = 0 with alpha = 0 never moves u")

    @property
    def is_independent(self) -> bool:
        return self.sigma_u == 1.0 or self.alpha == 1.0


def sample_prior(shape, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    if rows < 1 or cols < 1:
        raise ValueError(f"block shape must be positive, got {shape}")
    return rng.standard_normal((rows, cols))


def _cn_step(u: np.ndarray, sigma_u: float, xi: np.ndarray) -> np.ndarray:
    if sigma_u == 1.0:
        return xi
    return math.sqrt(1.0 - sigma_u * sigma_u) * u + sigma_u * xi


def propose_cn(u: np.ndarray, sigma_u: float, rng: np.random.Generator) -> np.ndarray:
    """Crank-Nicolson move ``sqrt(1 - s^2) u + s xi`` with fresh ``xi``.

    The standard normal law is invariant under this move. ``sigma_u = 1``
    gives an independent redraw.
    """
    if not 0.0 < sigma_u <= 1.0:
        raise ValueError(f"sigma_u must lie in (0, 1], got {sigma_u}")
    xi = rng.standard_normal(u.shape)
    return _cn_step(u, sigma_u, xi)


def propose_mixture(u: np.ndarray, cfg: AuxProposalConfig, rng: np.random.Generator):
    """Global redraw with probability ``cfg.alpha``, otherwise a CN step.

    Returns ``(u_new, move_kind)`` where ``move_kind`` is ``LOCAL`` or
    ``GLOBAL``. A local move with ``sigma_u = 0`` keeps ``u`` (the
    refresh-or-stay scheme); this is only reachable with ``alpha > 0``.
    """
    coin = rng.random()
    xi = rng.standard_normal(u.shape)
    if coin < cfg.alpha:
        return xi, GLOBAL
    if cfg.sigma_u == 0.0:
        return u.copy(), LOCAL
    return _cn_step(u, cfg.sigma_u, xi), LOCAL


def gaussian_to_uniform(x):
    """Standard normal CDF, clamped to ``[1e-12, 1 - 1e-12]``.

    Accepts scalars or arrays; raises ``ValueError`` on non-finite input.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("gaussian_to_uniform requires finite input")
    # erfc keeps full relative precision in both tails
    out = 0.5 * erfc(-arr / math.sqrt(2.0))
    out = np.clip(out, UNIFORM_EPS, 1.0 - UNIFORM_EPS)
    if out.ndim == 0:
        return float(out)
    return out
