"""Likelihood estimators driven entirely by a fixed auxiliary block.

Both estimators return ``log p_hat = sum_t log(sum_i w_t^i) - T log N`` and
are deterministic in ``u``: the same block always yields the same bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .aux_variables import UNIFORM_EPS
from .models import LOG_2PI, VARIANCE_AS_PRINTED, PriorSpec, log_prior

IMPORTANCE_SAMPLING = "importance_sampling"
BOOTSTRAP_PF = "bootstrap_pf"
ESTIMATORS = (IMPORTANCE_SAMPLING, BOOTSTRAP_PF)


@dataclass(frozen=True)
class LogLikelihoodEstimate:
    log_likelihood: float
    per_time_log_terms: np.ndarray
    degenerate: bool = False


def _from_terms(terms: np.ndarray, degenerate: bool) -> LogLikelihoodEstimate:
    if degenerate:
        return LogLikelihoodEstimate(-math.inf, terms, True)
    return LogLikelihoodEstimate(float(np.sum(terms)), terms, False)


def is_loglik(model, y, u, is_scale: str = VARIANCE_AS_PRINTED) -> LogLikelihoodEstimate:
    """Importance-sampling estimate for the Gaussian IID model.

    ``u`` has shape ``(T, N)``; row ``t`` drives the ``N`` samples
    ``x_t^i = mu + s * u_t^i`` with ``s`` chosen by ``is_scale``.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if u.ndim != 2 or u.shape[0] != y.shape[0]:
        raise ValueError(f"u has {u.shape[0]} rows, expected T = {y.shape[0]}")
    terms, degenerate = _is_kernel(
        y, np.ascontiguousarray(u, dtype=float), model.mu,
        model.proposal_scale(is_scale), model.sigma_e,
    )
    return _from_terms(terms, degenerate)


@njit(cache=True)
def _is_kernel(y, u, mu, scale, sigma_e):
    T, n = u.shape
    terms = np.empty(T)
    log_norm = 0.5 * LOG_2PI + math.log(sigma_e) + math.log(n)
    logw = np.empty(n)
    for t in range(T):
        m = -np.inf
        for i in range(n):
            r = (y[t] - mu - scale * u[t, i]) / sigma_e
            logw[i] = -0.5 * r * r
            if logw[i] > m:
                m = logw[i]
        if not (m > -np.inf and m < np.inf):
            return terms, True
        total = 0.0
        for i in range(n):
            total += math.exp(logw[i] - m)
        terms[t] = m + math.log(total) - log_norm
    return terms, False


def systematic_resample(weights, uniform: float) -> np.ndarray:
    """Systematic resampling with a single uniform in ``(0, 1)``.

    Point ``i`` (0-based) sits at ``(uniform + i) / N`` and picks the first
    index whose cumulative weight reaches it. Returns 0-based ancestors.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be non-negative and sum to one")
    if not 0.0 < uniform < 1.0:
        raise ValueError("uniform must lie in (0, 1)")
    return _systematic(w, uniform, np.empty(w.size, dtype=np.int64))


@njit(cache=True)
def _systematic(w, uniform, out):
    n = w.size
    cum = w[0]
    j = 0
    for i in range(n):
        point = (uniform + i) / n
        while cum < point and j < n - 1:
            j += 1
            cum += w[j]
        out[i] = j
    return out


@njit(cache=True)
def _bpf_kernel(init, transition, log_obs, params, y, u):
    T = y.size
    n = u.shape[1] - 1
    log_n = math.log(n)
    terms = np.zeros(T)
    x = np.empty(n)
    xn = np.empty(n)
    w = np.full(n, 1.0 / n)
    logw = np.empty(n)
    anc = np.empty(n, dtype=np.int64)
    for i in range(n):
        x[i] = init(params, u[0, i + 1])
    for t in range(1, T + 1):
        ubar = 0.5 * math.erfc(-u[t, 0] / math.sqrt(2.0))
        ubar = min(max(ubar, UNIFORM_EPS), 1.0 - UNIFORM_EPS)
        _systematic(w, ubar, anc)
        has_prev = t >= 2
        y_prev = y[t - 2] if has_prev else 0.0
        for i in range(n):
            xn[i] = transition(params, x[anc[i]], y_prev, has_prev, u[t, i + 1])
            if math.isnan(xn[i]):
                return terms, True
        # ancestors are ordered, so xn is nearly sorted; stable insertion sort
        for i in range(n):
            v = xn[i]
            j = i - 1
            while j >= 0 and x[j] > v:
                x[j + 1] = x[j]
                j -= 1
            x[j + 1] = v
        m = -np.inf
        for i in range(n):
            logw[i] = log_obs(params, y[t - 1], x[i])
            if logw[i] > m:
                m = logw[i]
        if not (m > -np.inf and m < np.inf):
            return terms, True
        total = 0.0
        for i in range(n):
            w[i] = math.exp(logw[i] - m)
            total += w[i]
        for i in range(n):
            w[i] /= total
        terms[t - 1] = m + math.log(total) - log_n
    return terms, False


def bpf_loglik(model, y, u) -> LogLikelihoodEstimate:
    """Bootstrap particle filter with sorting and systematic resampling.

    ``u`` has shape ``(T + 1, N + 1)``. Row 0, columns ``1..N`` draw the
    initial particles. For step ``t >= 1``, ``u[t, 0]`` becomes the
    resampling uniform through the normal CDF and ``u[t, 1:]`` drive the
    propagation. Particles are sorted by their new state before weighting.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if u.ndim != 2 or u.shape[0] != y.size + 1 or u.shape[1] < 2:
        raise ValueError(f"u has shape {u.shape}, expected ({y.size + 1}, N + 1)")
    terms, degenerate = _bpf_kernel(
        model.init, model.transition, model.log_obs,
        model.kernel_params(), y, np.ascontiguousarray(u),
    )
    return _from_terms(terms, degenerate)


@dataclass(frozen=True)
class PotentialEvaluator:
    """``Phi(theta, u) = -(log p_hat(y; u) + log p(theta))``.

    ``build_model`` maps a parameter vector to a model instance and may raise
    ``ValueError`` for parameters outside the model's domain; such points,
    points outside the prior support and degenerate estimates all give
    ``Phi = +inf``.
    """

    build_model: Callable
    y: np.ndarray
    prior: PriorSpec
    estimator: str
    n_samples: int
    is_scale: str = VARIANCE_AS_PRINTED

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        object.__setattr__(self, "y", np.ascontiguousarray(self.y, dtype=float))

    @property
    def u_shape(self):
        T = self.y.size
        if self.estimator == IMPORTANCE_SAMPLING:
            return (T, self.n_samples)
        return (T + 1, self.n_samples + 1)

    def loglik(self, theta, u) -> LogLikelihoodEstimate:
        if u.shape != self.u_shape:
            raise ValueError(f"u has shape {u.shape}, evaluator expects {self.u_shape}")
        model = self.build_model(theta)
        if self.estimator == IMPORTANCE_SAMPLING:
            return is_loglik(model, self.y, u, self.is_scale)
        return bpf_loglik(model, self.y, u)

    def __call__(self, theta, u) -> float:
        return potential(self, theta, u)


def potential(evaluator: PotentialEvaluator, theta, u) -> float:
    lp = log_prior(evaluator.prior, theta)
    if lp == -math.inf:
        return math.inf
    try:
        est = evaluator.loglik(theta, u)
    except ValueError:
        if u.shape != evaluator.u_shape:
            raise
        return math.inf
    if est.degenerate:
        return math.inf
    return -(est.log_likelihood + lp)
