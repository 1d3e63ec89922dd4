"""Exact-transition stochastic-gradient MCMC on the probability simplex.

Gamma-distributed coordinates are updated with the exact transition law of a
square-root diffusion, driven by minibatch shape estimates; normalizing the
coordinates yields simplex samples.  Control-variate variants recentre the
minibatch estimate around a full-data snapshot, which shrinks the stationary
overdispersion caused by subsampling noise.
"""
from .corpus import (Corpus, HeldOutDoc, HoldoutSplit, load_corpus,
                     save_corpus, split_holdout, synthetic_corpus)
from .errors import (CirsimplexError, ConfigError, DataError, DomainError,
                     ParameterError)
from .estimators import (CategoricalData, MinibatchEstimate, cv_estimate,
                         cv_gradient, mode_snapshot, one_hot_data,
                         per_datum_gradient, simple_estimate)
from .kernels import (KERNELS, ChainTrace, StepsizeSchedule, cv_step_alt,
                      cv_step_main, cv_transition, exact_step, run_chain,
                      scir_step, sgrld_step, to_simplex)
from .lda import (LDA_KERNELS, LdaConfig, PerplexityAccumulator, TopicState,
                  TrainResult, enumerate_assignment_pmf,
                  gibbs_assignment_samples, gibbs_doc_counts, refresh_anchor,
                  topic_simplex, train_lda)
from .moments import (MinibatchLaw, MomentReport, NoiseSequence,
                      approx_chain_moments, asymptotic_bias, chain_mgf,
                      conditional_chain_moments, cv_chain_moments,
                      exact_chain_moments, law_from_fraction, log_chain_mgf,
                      log_chain_mgf_product, mgf_in_domain,
                      scir_chain_moments, simulate_fixed_noise)
from .rng import (RngStream, make_stream, sample_gamma,
                  sample_hypergeometric, sample_noncentral_chisq,
                  sample_without_replacement)

__version__ = "0.1.0"

__all__ = [
    "CategoricalData", "ChainTrace", "CirsimplexError", "ConfigError",
    "Corpus", "DataError", "DomainError", "HeldOutDoc", "HoldoutSplit",
    "KERNELS", "LDA_KERNELS", "LdaConfig", "MinibatchEstimate",
    "MinibatchLaw", "MomentReport", "NoiseSequence", "ParameterError",
    "PerplexityAccumulator", "RngStream", "StepsizeSchedule", "TopicState",
    "TrainResult", "approx_chain_moments", "asymptotic_bias", "chain_mgf",
    "conditional_chain_moments", "cv_chain_moments", "cv_estimate",
    "cv_gradient", "cv_step_alt", "cv_step_main", "cv_transition",
    "enumerate_assignment_pmf", "exact_chain_moments", "exact_step",
    "gibbs_assignment_samples", "gibbs_doc_counts", "law_from_fraction",
    "load_corpus", "log_chain_mgf", "log_chain_mgf_product", "make_stream",
    "mgf_in_domain", "mode_snapshot", "one_hot_data", "per_datum_gradient",
    "refresh_anchor", "run_chain", "sample_gamma", "sample_hypergeometric",
    "sample_noncentral_chisq", "sample_without_replacement", "save_corpus",
    "scir_chain_moments", "scir_step", "sgrld_step", "simple_estimate",
    "simulate_fixed_noise", "split_holdout", "synthetic_corpus",
    "to_simplex", "topic_simplex", "train_lda",
]
