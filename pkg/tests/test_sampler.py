import csv
import math

import numpy as np
import pytest

from cnpmmh.aux_variables import GLOBAL
from cnpmmh.estimators import IMPORTANCE_SAMPLING, PotentialEvaluator
from cnpmmh.models import GaussianIIDModel, IIDMeanOnly, iid_mu_prior, simulate_iid
from cnpmmh.sampler import (InitializationError, SamplerSettings, ThetaProposal,
                            acceptance_probability, initial_state, replicate_seeds, run_pmmh,
                            run_replicates)


class Stub:
    """Potential with a fixed u-shape, defined by a plain function."""

    def __init__(self, fn, shape=(2, 3)):
        self.fn, self.u_shape = fn, shape

    def __call__(self, theta, u):
        return self.fn(np.asarray(theta), u)


def _settings(**kw):
    base = dict(n_iter=200, theta0=[0.0], proposal_cov=[[0.25]], sigma_u=0.5)
    base.update(kw)
    return SamplerSettings(**base)


def test_acceptance_probability_cases():
    assert acceptance_probability(3.0, 1.0) == 1.0
    assert acceptance_probability(1.0, 3.0) == pytest.approx(math.exp(-2.0))
    assert acceptance_probability(1.0, math.inf) == 0.0
    assert acceptance_probability(1.0, 1.5, 0.5) == 1.0
    with pytest.raises(ValueError):
        acceptance_probability(math.inf, 0.0)


def test_theta_proposal_validation():
    with pytest.raises(ValueError):
        ThetaProposal([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        ThetaProposal([[1.0, 0.1], [0.0, 1.0]])
    assert ThetaProposal([[0.5]]).dim == 1


def test_settings_validation():
    with pytest.raises(ValueError):
        _settings(n_iter=0)
    with pytest.raises(ValueError):
        _settings(burn_in=200)
    with pytest.raises(ValueError):
        run_pmmh(_settings(sigma_u=0.0), Stub(lambda t, u: 0.0), np.random.default_rng(0))


def test_flat_potential_accepts_everything():
    trace = run_pmmh(_settings(), Stub(lambda t, u: 0.0), np.random.default_rng(0))
    assert trace.accepted.all()
    assert trace.acceptance_rate == 1.0
    assert np.all(trace.accept_prob == 1.0)


def test_rejection_keeps_state_bitwise():
    # only theta0 has finite potential: every proposal is rejected
    ev = Stub(lambda t, u: 0.0 if t[0] == 0.0 else math.inf)
    trace = run_pmmh(_settings(store_u=True), ev, np.random.default_rng(1))
    assert not trace.accepted.any()
    assert np.all(trace.theta == 0.0)
    for u in trace.u:
        assert u is trace.u[0]


def test_random_stream_order():
    # theta normals, coin, xi, omega per iteration
    seen = []

    def fn(theta, u):
        seen.append((theta.copy(), u.copy()))
        return 0.0

    settings = _settings(n_iter=3, sigma_u=1.0, alpha=0.0)
    run_pmmh(settings, Stub(fn), np.random.default_rng(7))
    ref = np.random.default_rng(7)
    u0 = ref.standard_normal((2, 3))
    np.testing.assert_array_equal(seen[0][1], u0)
    theta = np.zeros(1)
    for k in range(3):
        theta = theta + 0.5 * ref.standard_normal(1)
        ref.random()
        xi = ref.standard_normal((2, 3))
        ref.random()
        np.testing.assert_allclose(seen[k + 1][0], theta, rtol=0, atol=1e-15)
        np.testing.assert_array_equal(seen[k + 1][1], xi)


def test_initialisation_retries_then_fails():
    calls = []

    def fn(theta, u):
        calls.append(1)
        return math.inf if len(calls) < 3 else 0.0

    state, attempts = initial_state(Stub(fn), [0.0], np.random.default_rng(0), retries=5)
    assert attempts == 3 and state.phi_value == 0.0
    with pytest.raises(InitializationError):
        initial_state(Stub(lambda t, u: math.inf), [0.0], np.random.default_rng(0), retries=4)


def test_samples_gaussian_target_with_u_free_potential():
    ev = Stub(lambda t, u: 0.5 * float(t[0]) ** 2)
    trace = run_pmmh(_settings(n_iter=60000, proposal_cov=[[4.0]]), ev, np.random.default_rng(3))
    x = trace.theta[1000:, 0]
    # loose bounds: IACT of this walk is about 4
    assert abs(x.mean()) < 0.05
    assert x.var() == pytest.approx(1.0, rel=0.05)


def test_brute_force_acceptance_frequency():
    # two-point check of P(accept) = min(1, exp(phi - phi')) with a u-dependent potential
    rng = np.random.default_rng(10)
    hits = 0
    n = 20000
    ev = Stub(lambda t, u: float(u[0, 0]) ** 2, shape=(1, 1))
    settings = _settings(n_iter=1, sigma_u=1.0, proposal_cov=[[1e-12]])
    expected = 0.0
    for _ in range(n):
        seed = rng.integers(2 ** 63)
        trace = run_pmmh(settings, ev, np.random.default_rng(seed))
        hits += int(trace.accepted[0])
        expected += trace.accept_prob[0]
    assert abs(hits - expected) < 4 * math.sqrt(n * 0.25)
    # oracle: E[min(1, exp(a^2 - b^2))] for a, b iid N(0, 1), on an independent stream
    a, b = np.random.default_rng(99).standard_normal((2, 400000))
    ref = np.minimum(1.0, np.exp(a ** 2 - b ** 2)).mean()
    assert hits / n == pytest.approx(ref, abs=4 * math.sqrt(0.25 / n))


def test_frozen_theta_u_chain_is_standard_normal():
    ev = Stub(lambda t, u: 0.0, shape=(4, 5))
    trace = run_pmmh(_settings(n_iter=30000, sigma_u=0.3, proposal_cov=[[1e-30]],
                               store_u=True), ev, np.random.default_rng(2))
    u = np.stack(trace.u[::200])
    assert abs(u.mean()) < 4 / math.sqrt(u.size)
    assert u.var() == pytest.approx(1.0, abs=4 * math.sqrt(2 / u.size))


def test_global_moves_recorded():
    trace = run_pmmh(_settings(n_iter=2000, sigma_u=0.2, alpha=0.25), Stub(lambda t, u: 0.0),
                     np.random.default_rng(4))
    frac = np.mean(trace.move_kind == GLOBAL)
    assert frac == pytest.approx(0.25, abs=0.04)


def test_same_seed_same_trace_and_csv(tmp_path):
    y = simulate_iid(GaussianIIDModel(0.5, 0.3, 0.1), 10, np.random.default_rng(0))
    ev = PotentialEvaluator(IIDMeanOnly(0.3, 0.1), y, iid_mu_prior(), IMPORTANCE_SAMPLING, 10)
    s = _settings(n_iter=500, theta0=[0.5], proposal_cov=[[0.01]])
    a = run_pmmh(s, ev, np.random.default_rng(12))
    b = run_pmmh(s, ev, np.random.default_rng(12))
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.phi, b.phi)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows[0] == ["iter", "theta_1", "phi", "accepted", "move_kind", "alpha_prob"]
    assert len(rows) == 501 and rows[1][0] == "1"
    assert 0.05 < a.acceptance_rate < 0.95


def test_replicates_are_distinct_and_worker_independent():
    y = simulate_iid(GaussianIIDModel(0.5, 0.3, 0.1), 10, np.random.default_rng(0))
    ev = PotentialEvaluator(IIDMeanOnly(0.3, 0.1), y, iid_mu_prior(), IMPORTANCE_SAMPLING, 10)
    s = _settings(n_iter=300, theta0=[0.5], proposal_cov=[[0.01]])
    serial = run_replicates(s, ev, 3, seed=5, workers=1)
    parallel = run_replicates(s, ev, 3, seed=5, workers=2)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.theta, b.theta)
    assert not np.array_equal(serial[0].theta, serial[1].theta)
    assert len(replicate_seeds(5, 3)) == 3
