"""Wiener-chaos machinery for the parabolic and hyperbolic Anderson models
with space-time homogeneous Gaussian noise, plus coupled continuity-in-law
diagnostics on a shared driving noise."""

__version__ = "0.1.0"

from .params import (EquationKind, ExistenceReport, NoiseParam, Regime,
                     TemporalKernel, lower_endpoint_ell, regular, rough,
                     validate_existence)
from .kernels import (OrderedTimes, SpaceTimePoint, chaos_kernel_fourier,
                      green_fourier, green_physical,
                      symmetrized_kernel_fourier)
from .closed_forms import (ConstantsBundle, chaos_tail_bound, dalang_constant,
                           freq_pair_integral, gamma0_window,
                           gaussian_freq_moment, heat_k_alpha,
                           riesz_space_constant, riesz_time_constants,
                           rough_constants, simplex_power_integral,
                           sphere_area, wave_freq_moment)
from .quadrature import (Method, MomentResult, MultiIndexSet, QuadratureError,
                         QuadratureGrid, chaos_cross_moment, chaos_moment,
                         continuity_gap, lh_ratio, multiindex_set,
                         product_bound_check)
from .noise import (Lattice, NoiseDraw, SpectralWeight, coupling_covariance,
                    draw_noise, indicator_fhat, isometry_variance,
                    linear_functional, load_draw, save_draw, spectral_weight,
                    weight_grid)
from .ensemble import (EnsembleTable, IncrementStat, coupled_ensemble,
                       discrete_multiple_integral, increment_moments,
                       max_cells_for_order, truncated_solution)
from .cli import ks_two_sample
