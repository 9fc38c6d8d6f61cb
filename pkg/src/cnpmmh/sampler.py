"""Pseudo-marginal Metropolis-Hastings with correlated auxiliary variables.

Per iteration the chain's random stream is consumed in a fixed order:
``p`` normals for the parameter random walk, the mixture coin, the fresh
auxiliary Gaussians, then the acceptance uniform.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aux_variables import AuxProposalConfig, propose_mixture, sample_prior

log = logging.getLogger(__name__)

MOVE_NAMES = ("local", "global")


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThetaProposal:
    """Gaussian random walk ``theta' ~ N(theta, covariance)``."""

    covariance: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
            raise ValueError("proposal covariance must be a symmetric square matrix")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("proposal covariance is not positive definite") from None
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def propose(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return theta + self._chol @ rng.standard_normal(self.dim)

    def log_q_ratio(self, theta_old, theta_new) -> float:
        # symmetric walk: q(old | new) / q(new | old) = 1
        return 0.0


@dataclass(frozen=True)
class SamplerSettings:
    n_iter: int
    theta0: tuple
    proposal_cov: np.ndarray
    sigma_u: float = 1.0
    alpha: float = 0.0
    burn_in: int = 0
    init_retries: int = 100
    store_u: bool = False

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must lie in [0, n_iter)")
        object.__setattr__(self, "theta0", tuple(float(v) for v in np.atleast_1d(self.theta0)))

    @property
    def aux_config(self) -> AuxProposalConfig:
        return AuxProposalConfig(self.sigma_u, self.alpha)


@dataclass
class ChainState:
    theta: np.ndarray
    u: np.ndarray
    phi_value: float
    iteration: int = 0


@dataclass
class ChainTrace:
    """Per-iteration record of a run (iterations ``1..K``).

    ``theta[k]`` is the state after iteration ``k + 1``; ``u`` is only filled
    when the run was asked to keep auxiliary blocks.
    """

    theta: np.ndarray
    phi: np.ndarray
    accepted: np.ndarray
    move_kind: np.ndarray
    accept_prob: np.ndarray
    theta0: np.ndarray
    phi0: float
    init_attempts: int = 1
    u: list | None = field(default=None, repr=False)

    def __len__(self):
        return self.phi.size

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean())

    def write_csv(self, path) -> None:
        p = self.theta.shape[1]
        header = ["iter", *[f"theta_{j + 1}" for j in range(p)], "phi", "accepted",
                  "move_kind", "alpha_prob"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self)):
                w.writerow([k + 1, *(repr(float(v)) for v in self.theta[k]),
                            repr(float(self.phi[k])), int(self.accepted[k]),
                            MOVE_NAMES[self.move_kind[k]], repr(float(self.accept_prob[k]))])


def acceptance_probability(phi_old: float, phi_new: float, log_q_ratio: float = 0.0) -> float:
    """``min(1, exp(phi_old - phi_new + log_q_ratio))``; 0 when ``phi_new`` is infinite.

    The auxiliary-proposal ratio is absent: the CN kernel is reversible with
    respect to the Gaussian factor of the extended target, so it cancels.
    """
    if not math.isfinite(phi_old):
        raise ValueError("current potential must be finite")
    if phi_new == math.inf:
        return 0.0
    log_a = phi_old - phi_new + log_q_ratio
    return 1.0 if log_a >= 0.0 else math.exp(log_a)


def initial_state(evaluator, theta0, rng, retries: int = 100):
    """Draw ``u_0`` until the potential at ``theta0`` is finite."""
    theta = np.asarray(theta0, dtype=float)
    for attempt in range(1, retries + 1):
        u = sample_prior(evaluator.u_shape, rng)
        phi = evaluator(theta, u)
        if math.isfinite(phi):
            return ChainState(theta, u, phi), attempt
    raise InitializationError(
        f"potential at theta0={theta.tolist()} was not finite after {retries} draws of u0")


def run_pmmh(settings: SamplerSettings, evaluator, rng: np.random.Generator) -> ChainTrace:
    """Run ``settings.n_iter`` pmMH iterations and return the full trace."""
    walk = ThetaProposal(settings.proposal_cov)
    if walk.dim != len(settings.theta0):
        raise ValueError("proposal covariance does not match theta0")
    aux = settings.aux_config
    state, attempts = initial_state(evaluator, settings.theta0, rng, settings.init_retries)

    K, p = settings.n_iter, walk.dim
    thetas = np.empty((K, p))
    phis = np.empty(K)
    accepted = np.zeros(K, dtype=bool)
    kinds = np.empty(K, dtype=np.int8)
    probs = np.empty(K)
    us = [] if settings.store_u else None

    theta, u, phi = state.theta, state.u, state.phi_value
    for k in range(K):
        theta_new = walk.propose(theta, rng)
        u_new, kind = propose_mixture(u, aux, rng)
        phi_new = evaluator(theta_new, u_new)
        a = acceptance_probability(phi, phi_new, walk.log_q_ratio(theta, theta_new))
        omega = rng.random()
        # omega in [0, 1): strict comparison accepts with probability a and never when a = 0
        if omega < a:
            theta, u, phi = theta_new, u_new, phi_new
            accepted[k] = True
        thetas[k] = theta
        phis[k] = phi
        kinds[k] = kind
        probs[k] = a
        if us is not None:
            us.append(u)

    return ChainTrace(thetas, phis, accepted, kinds, probs,
                      np.asarray(settings.theta0), state.phi_value, attempts, us)


def replicate_seeds(seed: int, n: int):
    return np.random.SeedSequence(seed).spawn(n)


def _run_one(args):
    settings, evaluator, seed_seq = args
    return run_pmmh(settings, evaluator, np.random.default_rng(seed_seq))


def run_replicates(settings: SamplerSettings, evaluator, n_replicates: int, seed: int,
                   workers: int = 1) -> list:
    """Independent chains on child streams of ``seed``, returned in replicate order."""
    if n_replicates < 1:
        raise ValueError("n_replicates must be positive")
    jobs = [(settings, evaluator, s) for s in replicate_seeds(seed, n_replicates)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
