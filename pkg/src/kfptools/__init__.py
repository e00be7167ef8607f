"""Numerical toolkit for degenerate Kolmogorov-Fokker-Planck semigroups.

Explicit Gaussian heat kernels for hypoelliptic operators with constant
matrices (Q, B), intrinsic dimension estimation from pseudo-ball volume
growth, fractional generator powers, seminorms and nonlocal perimeters, and
verification suites for the associated coarea formula, Sobolev-type
embeddings, and isoperimetric inequalities.
"""

from .errors import *  # noqa: F401,F403
from .operators import (OperatorSpec, KernelParams, unit_ball_volume,
                        validate_spec, kalman_rank, propagator, gramian,
                        volume, log_volume, hormander_grid_check)
from .fields import GaussianTerm, ScalarField, RegionSet, tent_field, staircase_field
from .rng import SamplerState
from .reports import VerificationReport
from .kernel import (mt_distance, kernel_eval, sample_transition,
                     apply_semigroup, box_probability, chapman_kolmogorov_check)
from .dimensions import (DimensionProfile, dim_zero, dim_infinity,
                         classify_regime, volume_lower_constant)
from .fractional import (FractionalParams, TimeQuadrature, fractional_power,
                         riesz_potential, maximal_function,
                         heat_content_deficit, perimeter, perimeter_star,
                         besov_seminorm, mollified_fractional_norm)
from .embeddings import (LevelSetProfile, EmbeddingReport, level_profile,
                         lq_norm, weak_lq_norm, sum_space_split,
                         split_min_constant, check_coarea, check_blowup,
                         check_embedding_uniform, check_embedding_mixed)
from .scenarios import Scenario, load_config, builtin_scenario_path

__version__ = "0.1.0"
