"""Correlated pseudo-marginal Metropolis-Hastings with Crank-Nicolson auxiliary moves."""

from .aux_variables import (AuxProposalConfig, gaussian_to_uniform, propose_cn,
                            propose_mixture, sample_prior)
from .diagnostics import (iact, loglik_correlation_scan, loglik_stddev,
                          posterior_summary)
from .estimators import (LogLikelihoodEstimate, PotentialEvaluator, bpf_loglik,
                         is_loglik, potential, systematic_resample)
from .models import (GaussianIIDModel, LinearGaussianSSM, PriorSpec, SVLeverageModel,
                     exact_iid_loglik, kalman_loglik, log_prior, simulate_iid, simulate_sv)
from .peskun import (asymptotic_variance, build_transition, jump_probability,
                     scan_optimal_sigma_z, z_acceptance)
from .sampler import (ChainTrace, SamplerSettings, acceptance_probability, run_pmmh,
                      run_replicates)

__version__ = "0.1.0"
