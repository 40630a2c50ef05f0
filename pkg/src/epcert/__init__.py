"""Gaussian EP and the canonical Gaussian approximation for 1-D factorized
log-concave targets, with numerical certificates of their error bounds."""

from .cga import CgaResult, ModeSearchError, cga_approx, find_mode
from .certificates import (BoundCertificate, ExcessKL, NotApplicable, brascamp_lieb_even,
                           cga_leading_error, excess_kl, extension_suite, hybrid_suite,
                           moment_matching, target_suite, theorem_suite, vinv_decomposition)
from .ep import (DivergenceError, EPError, EpState, FixedPoint, NaturalGaussian,
                 NumericalFailure, cavity, fixed_point_diagnostics, hybrid_moments,
                 solve_fixed_point, update_site)
from .model import (CertificationError, DomainError, GammaSite, GaussianSite, LogCoshSite,
                    RegularityConstants, Site, Target, certify_constants, load_target,
                    site_logphi_deriv, target_logphi_deriv)
from .oracle import AccuracyError, GridSpec, MomentSummary, QuadratureError, moments, target_moments
from .scaling import (InsufficientData, RateFit, SweepRecord, check_rates, fit_rate,
                      make_family, run_sweep)

__version__ = "0.1.0"
