"""Beta scale mixture distributions and mean regression on (0, 1)."""

from .distributions import (BetaParams, BsmParams, MomentSummary, beta_log_pdf, beta_moments,
                            bsm_log_pdf, bsm_moments, bsm_pdf, bsm_sample, to_classical,
                            tpb_classify, tpb_posterior_prob)
from .exceptions import BSMError, ConvergenceError, DomainError, EvaluationError
from .mixing import MixingKind, MixingSpec, mixing_density, sample_mixing
from .numeric import QuadratureRule, build_quadrature, expect_mixing, log_beta_fn, minimize, numeric_hessian
from .regression import (Dataset, FitOptions, FitResult, RegressionModel, fit_mle, link,
                         link_inverse, log_likelihood, standard_errors)
from .selection import aic, bic, rank_models

__version__ = "0.1.0"
