import math

import numpy as np
import pytest
from scipy import stats

from cnpmmh.models import (STDDEV, VARIANCE_AS_PRINTED, Gamma, GaussianIIDModel, IIDMeanOnly,
                           LinearGaussianSSM, Normal, PriorSpec, SVFromTheta, SVLeverageModel,
                           TruncatedNormal, exact_iid_loglik, iid_mu_prior, kalman_loglik,
                           log_prior, simulate_iid, simulate_linear_gaussian, simulate_sv,
                           sv_prior)
from oracles import iid_marginal_loglik_quadrature


def test_normal_prior_peak_value():
    assert Normal(-0.5, 0.2).logpdf(-0.5) == pytest.approx(0.6904, abs=1e-4)
    assert Normal(-0.5, 0.2).logpdf(-0.5) == pytest.approx(-math.log(0.2 * math.sqrt(2 * math.pi)))


@pytest.mark.parametrize("x", [0.01, 0.18, 40.0, 123.0])
def test_gamma_uses_rate(x):
    expected = stats.gamma(a=2.0, scale=1 / 0.05).logpdf(x)
    assert Gamma(2.0, 0.05).logpdf(x) == pytest.approx(expected, rel=1e-12)
    assert Gamma(2.0, 0.05).logpdf(0.0) == -math.inf


@pytest.mark.parametrize("x", [-0.99, 0.0, 0.5, 0.98])
def test_truncated_normal_matches_scipy(x):
    tn = TruncatedNormal(0.9, 0.05, -1.0, 1.0)
    ref = stats.truncnorm((-1 - 0.9) / 0.05, (1 - 0.9) / 0.05, loc=0.9, scale=0.05)
    assert tn.logpdf(x) == pytest.approx(ref.logpdf(x), rel=1e-10, abs=1e-10)
    assert tn.logpdf(1.0) == -math.inf


def test_log_prior_support_and_shape():
    spec = sv_prior()
    assert math.isfinite(log_prior(spec, [0.19, 0.98, 0.18, -0.70]))
    assert log_prior(spec, [0.19, 1.0, 0.18, -0.70]) == -math.inf
    assert log_prior(spec, [0.19, 0.98, -0.18, -0.70]) == -math.inf
    with pytest.raises(ValueError):
        log_prior(spec, [0.1, 0.2])
    assert log_prior(iid_mu_prior(), [1.0]) == -math.inf
    assert not PriorSpec((Normal(0, 1),)).in_support([math.nan])


def test_iid_proposal_scale_conventions():
    m = GaussianIIDModel(0.5, 0.3, 0.1)
    assert m.proposal_scale(VARIANCE_AS_PRINTED) == pytest.approx(0.09)
    assert m.proposal_scale(STDDEV) == 0.3
    with pytest.raises(ValueError):
        m.proposal_scale("nope")
    with pytest.raises(ValueError):
        GaussianIIDModel(0.0, 0.0, 1.0)


@pytest.mark.parametrize("scale", [VARIANCE_AS_PRINTED, STDDEV])
def test_exact_iid_loglik_against_quadrature(scale):
    m = GaussianIIDModel(0.5, 0.3, 0.1)
    y = simulate_iid(m, 10, np.random.default_rng(4))
    s = m.proposal_scale(scale)
    expected = iid_marginal_loglik_quadrature(y, 0.5, s, 0.1)
    assert exact_iid_loglik(m, y, scale) == pytest.approx(expected, abs=1e-8)
    assert exact_iid_loglik(m, [], scale) == 0.0


def test_simulate_iid_moments():
    m = GaussianIIDModel(0.5, 0.3, 0.1)
    y = simulate_iid(m, 1_000_000, np.random.default_rng(0))
    assert abs(y.mean() - 0.5) < 4e-3 * math.sqrt(0.1)
    assert y.var() == pytest.approx(0.1, rel=0.01)


def test_kalman_against_dense_gaussian():
    m = LinearGaussianSSM(0.3, 0.8, 0.5, 0.7)
    _, y = simulate_linear_gaussian(m, 25, np.random.default_rng(2))
    t = np.arange(1, 26)
    v0 = m.x0_variance  # stationary, so every x_t has this variance
    cov = v0 * m.phi ** np.abs(t[:, None] - t[None, :]) + 0.49 * np.eye(25)
    expected = stats.multivariate_normal(np.full(25, 0.3), cov).logpdf(y)
    assert kalman_loglik(m, y) == pytest.approx(expected, rel=1e-10)


def test_sv_initial_variance_variants():
    printed = SVLeverageModel(0.0, 0.9, 0.3, -0.5)
    stat = SVLeverageModel(0.0, 0.9, 0.3, -0.5, init_variance="stationary")
    assert printed.x0_variance == pytest.approx(0.09 / 0.19 ** 2)
    assert stat.x0_variance == pytest.approx(0.09 / 0.19)


@pytest.mark.parametrize("kwargs", [dict(phi=1.0), dict(sigma_v=0.0), dict(rho=-1.0),
                                    dict(init_variance="x"), dict(leverage="x")])
def test_sv_validation(kwargs):
    base = dict(mu=0.0, phi=0.9, sigma_v=0.2, rho=-0.5)
    base.update(kwargs)
    with pytest.raises(ValueError):
        SVLeverageModel(**base)


def test_sv_simulation_leverage_correlation():
    m = SVLeverageModel(0.2, 0.9, 0.25, -0.6, init_variance="stationary")
    x, y = simulate_sv(m, 200000, np.random.default_rng(8))
    assert x.shape == (200001,) and y.shape == (200000,)
    # y_t pairs with the innovation of x_{t+1}
    eps = y * np.exp(-0.5 * x[1:])
    eta = x[1:][1:] - (0.2 + 0.9 * (x[1:][:-1] - 0.2))
    r = np.corrcoef(eps[:-1], eta)[0, 1]
    assert r == pytest.approx(-0.6, abs=0.01)
    assert np.var(eps) == pytest.approx(1.0, rel=0.02)
    assert x.mean() == pytest.approx(0.2, abs=0.03)
    assert x.var() == pytest.approx(0.0625 / 0.19, rel=0.05)


def test_covariance_leverage_cross_term():
    m = SVLeverageModel(0.0, 0.9, 0.3, -0.05, leverage="covariance")
    assert float(m.cross_cov(1.3)) == -0.05
    assert m.joint_cov_is_pd(0.0)
    assert not m.joint_cov_is_pd(-6.0)


def test_theta_maps():
    assert IIDMeanOnly(0.3, 0.1)([0.2]) == GaussianIIDModel(0.2, 0.3, 0.1)
    m = SVFromTheta()([0.19, 0.98, 0.18, -0.70])
    assert (m.mu, m.phi, m.sigma_v, m.rho) == (0.19, 0.98, 0.18, -0.70)
    with pytest.raises(ValueError):
        SVFromTheta()([0.0, 1.2, 0.1, 0.0])


def test_sv_stationary_state_variance():
    m = SVLeverageModel(0.0, 0.9, 0.2, -0.5, init_variance="stationary")
    x, _ = simulate_sv(m, 1_000_000, np.random.default_rng(31))
    assert x.var() == pytest.approx(0.04 / 0.19, rel=0.02)
