"""Relative-belief source discrimination with mode-sorted (SPADE) measurements.

Calibrated HG-mode intensity curves of two point sources feed a Gaussian
measurement model; relative-belief ratios decide between one-source and
two-source explanations of the data and map plausible separations.
"""

from .analysis import (PlausibleMap, SeparationSweep, critical_distance,
                       expansion_coefficients, mahalanobis2, mc_success_sweep,
                       mismatch_study, plausible_map, rb_two_hypothesis,
                       success_probability_theory, success_threshold,
                       variances_for_critical_distance)
from .calibration import (GaussianFit, SourceCalibration, fit_gaussian, load_calibration,
                          poisson_mode_profile, rayleigh_limit, synth_calibration,
                          write_calibration)
from .errors import (ConfigurationError, DegenerateDataError, DomainError, FitError,
                     InputError, UndefinedRBError)
from .inference import (DiscriminationConfig, HypothesisSpec, Prior1D, QuadratureConfig,
                        RBResult, discriminate, evidence_strength, marginal_log_likelihood,
                        posteriors, rb_ratios, three_hypotheses)
from .numerics import (Grid1D, SplineFunction, adaptive_log_integrate, erf, erf_inv,
                       fit_cubic_spline, integrate, log_integrate, log_sum_exp)
from .scene import (Dataset, SceneParams, dataset_log_likelihood, log_likelihood,
                    mixture_model, model_intensity, read_dataset, simulate_dataset,
                    write_dataset)

__version__ = "0.1.0"
