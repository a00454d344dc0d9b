"""Reference priors for one-parameter models.

Closed-form oracles, the Monte Carlo f_k construction, expected-discrepancy
permissibility diagnostics and expected-information probes.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, ImproperPosteriorError, InvariantViolation,
                     NonRegularModelError, QuadratureError, RangeError, RefPriorError,
                     UnsupportedOperationError)
from .numerics import (PriorTable, QuadratureSettings, digamma, integrate, interpolate_table,
                       log_integrate, normalize_at)
from .models import (BUILTINS, Model, ParameterSpace, SufficientStat, UniformPair,
                     UniformPairSpec, get_model, iid_replicate, loglik_product, logpdf, sample,
                     sufficient_stat)
from .priors import CompactSequence, CompactSet, PriorFn, flat_prior, get_prior, reciprocal_prior
from .divergence import (DiscrepancyEstimate, closed_form_location_discrepancy,
                         discrepancy_monotonicity, expected_discrepancy, fmn_discrepancy_exact,
                         kl_divergence, permissibility_verdict, posterior_logpdf,
                         propriety_check, tail_condition_check, truncation_kl_identity)
from .information import (expected_information, information_additivity_check, mmi_gap,
                          standard_model_check)
from .reference import (MCConfig, beta_half_density, fisher_information, fk_quadrature,
                        j2_closed_form, j2_series_oracle, jeffreys_prior, mc_reference_prior,
                        nonregular_prior, pushforward_prior, root_estimator_prior,
                        theta_theta2_prior, triangular_root_estimator, uniform_pair_prior)

__all__ = [name for name in dir() if not name.startswith("_")]
