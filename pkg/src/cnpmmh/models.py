"""Models used in the experiments, their priors and exact-likelihood oracles.

Two models drive the experiments: a Gaussian IID latent model (importance
sampling) and a stochastic volatility model with leverage (particle filter).
A linear-Gaussian state space model is included as a Kalman-tractable test
case for the particle filter.

State space models expose three numba-compiled kernels used by the particle
filter, each taking the model's flat parameter vector first:

``init(params, z)``
    initial state driven by one standard normal ``z``.
``transition(params, x, y_prev, has_prev, z)``
    next state given the current state, the previous observation and one
    standard normal. Returns NaN if the conditional law is invalid.
``log_obs(params, y, x)``
    log observation density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)

VARIANCE_AS_PRINTED = "variance_as_printed"
STDDEV = "stddev"
IS_SCALES = (VARIANCE_AS_PRINTED, STDDEV)


def _normal_logpdf(x, mean, sd):
    r = (x - mean) / sd
    return -0.5 * LOG_2PI - np.log(sd) - 0.5 * r * r


# ---------------------------------------------------------------------------
# Gaussian IID model


@dataclass(frozen=True)
class GaussianIIDModel:
    """``x_t ~ N(mu, sigma_v^2)``, ``y_t | x_t ~ N(x_t, sigma_e^2)``."""

    mu: float
    sigma_v: float
    sigma_e: float

    def __post_init__(self):
        if not (self.sigma_v > 0 and self.sigma_e > 0):
            raise ValueError("sigma_v and sigma_e must be positive")

    def proposal_scale(self, is_scale: str = VARIANCE_AS_PRINTED) -> float:
        """Multiplier on ``u`` when drawing importance samples.

        ``variance_as_printed`` uses ``sigma_v**2`` (samples
        ``mu + sigma_v**2 * u``); ``stddev`` uses ``sigma_v`` and so samples
        from the latent prior.
        """
        if is_scale == VARIANCE_AS_PRINTED:
            return self.sigma_v ** 2
        if is_scale == STDDEV:
            return self.sigma_v
        raise ValueError(f"unknown is_scale {is_scale!r}; expected one of {IS_SCALES}")


def simulate_iid(model: GaussianIIDModel, T: int, rng: np.random.Generator) -> np.ndarray:
    if T < 1:
        raise ValueError("T must be at least 1")
    x = model.mu + model.sigma_v * rng.standard_normal(T)
    return x + model.sigma_e * rng.standard_normal(T)


def exact_iid_loglik(model: GaussianIIDModel, y, is_scale: str = STDDEV) -> float:
    """Exact log-likelihood ``sum_t log N(y_t; mu, s^2 + sigma_e^2)``.

    ``s`` is the latent spread implied by ``is_scale`` (``sigma_v`` for the
    model itself, ``sigma_v**2`` for the estimator read as printed).
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return 0.0
    s = model.proposal_scale(is_scale)
    sd = math.sqrt(s * s + model.sigma_e ** 2)
    return float(np.sum(_normal_logpdf(y, model.mu, sd)))


# ---------------------------------------------------------------------------
# Stochastic volatility with leverage

INIT_AS_PRINTED = "as_printed"
INIT_STATIONARY = "stationary"
LEVERAGE_CORRELATION = "correlation"
LEVERAGE_COVARIANCE = "covariance"


@njit(cache=True)
def _sv_init(params, z):
    return params[0] + math.sqrt(params[4]) * z


@njit(cache=True)
def _sv_transition(params, x, y_prev, has_prev, z):
    mu, phi, sigma_v, rho = params[0], params[1], params[2], params[3]
    mean = mu + phi * (x - mu)
    if not has_prev:
        return mean + sigma_v * z
    if params[5] > 0.5:
        # leverage as a covariance between innovations
        var = sigma_v * sigma_v - rho * rho * math.exp(-x)
        if var <= 0.0:
            return np.nan
        return mean + rho * math.exp(-x) * y_prev + math.sqrt(var) * z
    return (mean + rho * sigma_v * math.exp(-0.5 * x) * y_prev
            + sigma_v * math.sqrt(1.0 - rho * rho) * z)


@njit(cache=True)
def _sv_log_obs(params, y, x):
    return -0.5 * (LOG_2PI + x + y * y * math.exp(-x))


@dataclass(frozen=True)
class SVLeverageModel:
    """Stochastic volatility with leverage.

    ``(x_{t+1}, y_t) | x_t`` is bivariate normal with mean
    ``(mu + phi (x_t - mu), 0)``, variances ``sigma_v^2`` and ``exp(x_t)``.
    With ``leverage="correlation"`` (default) ``rho`` is the correlation of
    the two innovations, so the cross term is ``rho sigma_v exp(x_t / 2)``;
    ``leverage="covariance"`` uses ``rho`` itself as the cross term.

    ``init_variance="as_printed"`` draws ``x_0`` with variance
    ``sigma_v^2 / (1 - phi^2)^2``; ``"stationary"`` uses ``1 - phi^2``.
    """

    mu: float
    phi: float
    sigma_v: float
    rho: float
    init_variance: str = INIT_AS_PRINTED
    leverage: str = LEVERAGE_CORRELATION

    init = staticmethod(_sv_init)
    transition = staticmethod(_sv_transition)
    log_obs = staticmethod(_sv_log_obs)

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ValueError(f"|phi| must be < 1, got {self.phi}")
        if not self.sigma_v > 0.0:
            raise ValueError(f"sigma_v must be positive, got {self.sigma_v}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if self.init_variance not in (INIT_AS_PRINTED, INIT_STATIONARY):
            raise ValueError(f"unknown init_variance {self.init_variance!r}")
        if self.leverage not in (LEVERAGE_CORRELATION, LEVERAGE_COVARIANCE):
            raise ValueError(f"unknown leverage {self.leverage!r}")

    @property
    def x0_variance(self) -> float:
        denom = 1.0 - self.phi ** 2
        if self.init_variance == INIT_AS_PRINTED:
            denom = denom ** 2
        return self.sigma_v ** 2 / denom

    def cross_cov(self, x):
        if self.leverage == LEVERAGE_COVARIANCE:
            return self.rho + 0.0 * np.asarray(x)
        return self.rho * self.sigma_v * np.exp(0.5 * np.asarray(x))

    def joint_cov_is_pd(self, x) -> bool:
        c = self.cross_cov(x)
        return bool(np.all(self.sigma_v ** 2 * np.exp(x) - c * c > 0.0))

    def kernel_params(self) -> np.ndarray:
        return np.array([
            self.mu, self.phi, self.sigma_v, self.rho, self.x0_variance,
            1.0 if self.leverage == LEVERAGE_COVARIANCE else 0.0,
        ])


def simulate_sv(model: SVLeverageModel, T: int, rng: np.random.Generator):
    """Simulate ``T`` returns from the leverage model.

    Returns ``(x, y)`` with states ``x_0 .. x_T`` (length ``T + 1``) and
    observations ``y_1 .. y_T``. Each step draws ``(x_{t+1}, y_t)`` jointly
    given ``x_t``; the unobserved ``y_0`` and the trailing ``x_{T+1}`` are
    dropped.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    x = np.empty(T + 2)
    y = np.empty(T + 1)
    x[0] = model.mu + math.sqrt(model.x0_variance) * rng.standard_normal()
    for t in range(T + 1):
        e1, e2 = rng.standard_normal(2)
        c = float(model.cross_cov(x[t]))
        obs_var = math.exp(x[t])
        resid = obs_var - c * c / model.sigma_v ** 2
        if resid <= 0.0:
            raise ValueError(f"joint covariance not positive definite at x={x[t]:.4g}")
        x[t + 1] = model.mu + model.phi * (x[t] - model.mu) + model.sigma_v * e1
        y[t] = c / model.sigma_v * e1 + math.sqrt(resid) * e2
    return x[: T + 1], y[1:]


# ---------------------------------------------------------------------------
# Linear-Gaussian state space model (Kalman-tractable test case)


@njit(cache=True)
def _lg_init(params, z):
    return params[0] + math.sqrt(params[4]) * z


@njit(cache=True)
def _lg_transition(params, x, y_prev, has_prev, z):
    return params[0] + params[1] * (x - params[0]) + params[2] * z


@njit(cache=True)
def _lg_log_obs(params, y, x):
    r = (y - x) / params[3]
    return -0.5 * LOG_2PI - math.log(params[3]) - 0.5 * r * r


@dataclass(frozen=True)
class LinearGaussianSSM:
    """AR(1) state observed in Gaussian noise.

    ``x_0 ~ N(mu, sigma_v^2 / (1 - phi^2))``,
    ``x_t | x_{t-1} ~ N(mu + phi (x_{t-1} - mu), sigma_v^2)``,
    ``y_t | x_t ~ N(x_t, sigma_e^2)``.
    """

    mu: float
    phi: float
    sigma_v: float
    sigma_e: float

    init = staticmethod(_lg_init)
    transition = staticmethod(_lg_transition)
    log_obs = staticmethod(_lg_log_obs)

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ValueError("|phi| must be < 1")
        if not (self.sigma_v > 0 and self.sigma_e > 0):
            raise ValueError("sigma_v and sigma_e must be positive")

    @property
    def x0_variance(self) -> float:
        return self.sigma_v ** 2 / (1.0 - self.phi ** 2)

    def kernel_params(self) -> np.ndarray:
        return np.array([self.mu, self.phi, self.sigma_v, self.sigma_e, self.x0_variance])


def simulate_linear_gaussian(model: LinearGaussianSSM, T: int, rng: np.random.Generator):
    x = np.empty(T + 1)
    x[0] = model.mu + math.sqrt(model.x0_variance) * rng.standard_normal()
    for t in range(1, T + 1):
        x[t] = model.mu + model.phi * (x[t - 1] - model.mu) + model.sigma_v * rng.standard_normal()
    y = x[1:] + model.sigma_e * rng.standard_normal(T)
    return x, y


def kalman_loglik(model: LinearGaussianSSM, y) -> float:
    """Exact log-likelihood of ``y_1 .. y_T`` by the Kalman filter."""
    m, P = model.mu, model.x0_variance
    ll = 0.0
    for yt in np.asarray(y, dtype=float):
        m = model.mu + model.phi * (m - model.mu)
        P = model.phi ** 2 * P + model.sigma_v ** 2
        S = P + model.sigma_e ** 2
        r = yt - m
        ll += -0.5 * (LOG_2PI + math.log(S) + r * r / S)
        K = P / S
        m = m + K * r
        P = (1.0 - K) * P
    return ll


# ---------------------------------------------------------------------------
# Priors


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def logpdf(self, x: float) -> float:
        r = (x - self.mean) / self.sd
        return -0.5 * LOG_2PI - math.log(self.sd) - 0.5 * r * r

    def in_support(self, x: float) -> bool:
        return math.isfinite(x)


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float
    sd: float
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("truncation interval is empty")

    @property
    def log_mass(self) -> float:
        def cdf(v):
            return 0.5 * math.erfc(-(v - self.mean) / (self.sd * math.sqrt(2.0)))

        return math.log(cdf(self.high) - cdf(self.low))

    def in_support(self, x: float) -> bool:
        return self.low < x < self.high

    def logpdf(self, x: float) -> float:
        if not self.in_support(x):
            return -math.inf
        r = (x - self.mean) / self.sd
        return -0.5 * LOG_2PI - math.log(self.sd) - 0.5 * r * r - self.log_mass


@dataclass(frozen=True)
class Gamma:
    """Gamma with shape ``a`` and rate ``b`` (mean ``a / b``)."""

    shape: float
    rate: float

    def in_support(self, x: float) -> bool:
        return 0.0 < x < math.inf

    def logpdf(self, x: float) -> float:
        if not self.in_support(x):
            return -math.inf
        a, b = self.shape, self.rate
        return a * math.log(b) - math.lgamma(a) + (a - 1.0) * math.log(x) - b * x


@dataclass(frozen=True)
class PriorSpec:
    components: tuple

    def __len__(self):
        return len(self.components)

    def in_support(self, theta) -> bool:
        return all(c.in_support(float(v)) for c, v in zip(self.components, theta))


def log_prior(spec: PriorSpec, theta) -> float:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (len(spec),):
        raise ValueError(f"theta has shape {theta.shape}, prior expects ({len(spec)},)")
    total = 0.0
    for comp, value in zip(spec.components, theta):
        lp = comp.logpdf(float(value))
        if lp == -math.inf:
            return -math.inf
        total += lp
    return total


def iid_mu_prior(low: float = -1.0, high: float = 1.0) -> PriorSpec:
    return PriorSpec((TruncatedNormal(0.0, 1.0, low, high),))


def sv_prior() -> PriorSpec:
    return PriorSpec((
        Normal(0.0, 2.0),
        TruncatedNormal(0.9, 0.05, -1.0, 1.0),
        Gamma(2.0, 0.05),
        Normal(-0.5, 0.2),
    ))


# ---------------------------------------------------------------------------
# Parameter-vector to model maps (picklable, used by the potential evaluator)


@dataclass(frozen=True)
class IIDMeanOnly:
    """``theta = (mu,)`` with ``sigma_v`` and ``sigma_e`` held fixed."""

    sigma_v: float
    sigma_e: float

    def __call__(self, theta) -> GaussianIIDModel:
        return GaussianIIDModel(float(theta[0]), self.sigma_v, self.sigma_e)


@dataclass(frozen=True)
class SVFromTheta:
    """``theta = (mu, phi, sigma_v, rho)``."""

    init_variance: str = INIT_AS_PRINTED
    leverage: str = LEVERAGE_CORRELATION

    def __call__(self, theta) -> SVLeverageModel:
        mu, phi, sigma_v, rho = (float(v) for v in theta)
        return SVLeverageModel(mu, phi, sigma_v, rho, self.init_variance, self.leverage)
