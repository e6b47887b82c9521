"""gstlab: ground-state-transformed Levy processes at desk scale.

Construct a Levy model and a potential, solve for the ground state of
H = -L + V spectrally, transform to the associated stationary Markov process,
sample it, and test long-time envelope profiles against closed-form escape
constants and integral tests.
"""

from .envelopes import (EnvelopeEstimate, EscapeCase, EscapeConstant,
                        InconclusiveError, IntegralClassification,
                        KappaFunction, ProfileFunction, RegVarFunction,
                        UncataloguedCaseError, bisect_escape_constant,
                        classify_log_integral, conjugate_slowly_varying,
                        empirical_limsup, escape_constant,
                        integral_test_general, integral_test_profile,
                        tail_bound_check)
from .gst import (ComparisonReport, GstError, GstFields, IntrinsicKernel,
                  NotApplicableError, Phi0Interpolant, SandwichReport,
                  StationaryDensity, StationarySurvival, TailModel, Window,
                  certified_window, compare_ground_states, default_tail_power,
                  fit_tail_model, gst_fields, intrinsic_kernel, load_fields,
                  load_kernel, sandwich_check, save_fields, save_kernel,
                  stationary_density)
from .levy import (DensityProfile, JumpParingReport, LevyModel,
                   QuadratureError, brownian_model, check_jump_paring,
                   classify_profile, density_eval, jump_tail_mass,
                   levy_density, radial_levy_density, relativistic_model,
                   stable_model, symbol_eval)
from .potentials import (Potential, UnitBallEnvelope, finite_well, g_profiles,
                         harmonic_potential, ou_potential, potential_eval,
                         unit_ball_envelope)
from .simulate import (GstPath, RngSpec, farm_sde_paths, ks_critical,
                       ks_distance, ks_distance_atoms, sample_stationary,
                       simulate_chain, simulate_chain_ensemble, simulate_sde,
                       simulate_sde_ensemble, stationary_cdf)
from .spectral import (DiscreteOperator, EigensolverError, FeynmanKacKernel,
                       Grid, NoBoundStateError, SpectralSolution,
                       build_operator, fk_kernel, ground_state, load_solution,
                       save_solution, solve_ground_state, well_eigenvalue)

__version__ = "0.1.0"
