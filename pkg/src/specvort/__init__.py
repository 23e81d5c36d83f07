"""Spectral Fourier-Galerkin lab for the 3D vorticity equation on the
torus with divergence-free transport noise."""

__version__ = "0.1.0"

from .lattice import (ThetaWeights, frame, frames, lattice_ball,
                      lattice_shell, sign_class, theta_ball, theta_norms,
                      theta_shell)
from .field import (GridConvolver, ModeSet, SpectralField, advect_by_sigma,
                    biot_savart, curl, grad_norm, inner, laplacian,
                    leray_perp, leray_project, lie_by_sigma, lie_derivative,
                    mode_set, random_divergence_free, sigma_field,
                    sobolev_norm)
from .corrector import (advection_double_lie, advection_energy_J,
                        coefficient_covariance, lemma31_dissipation,
                        limit_defect, perp_block, perp_blocks, perp_pairing,
                        prop54_continuum, prop54_sum, s_theta_apply,
                        s_theta_direct, s_theta_perp_apply)
from .sde import (GalerkinIntegrator, IntegrationFailure, NoiseDriver,
                  TimeSeries, cutoff_fR, simulate)
from .experiments import (decay_check, deterministic_solve,
                          enhanced_viscosity, lemma43_envelope,
                          long_horizon_experiment, prop45_envelope,
                          scaling_limit_experiment, small_data_radius)
from .config import ConfigError, SimConfig
