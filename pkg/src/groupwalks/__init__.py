"""groupwalks: random walks on countable groups.

Exact sparse/dense convolution of finitely supported measures, entropy
profiles and asymptotic-entropy brackets, escape-probability estimation by
Monte Carlo, Green sums and characteristic-function quadrature, explicit
heat-kernel comparison constants, and coarse-trajectory partition entropies
on wreath products.
"""

__version__ = "0.1.0"

from .errors import (ConfigurationError, GroupwalksError, ResourceError,
                     UsageError, ValidationError)
from .groups import (Element, GeneratingSet, GroupHandle, GroupSpec,
                     ball_size, canonical_key, closure_power, inv, make_group,
                     mul, project_to_base)
from .measures import (EXACT, MeasureFamily, ProbMeasure, TruncationPolicy,
                       convergence_report, convolve, convolve_power, delta,
                       dumps_measure, entropy_tail, heavy_tail_family,
                       is_symmetric, load_measure, loads_measure,
                       make_measure, mixture_family, pushforward, reflect,
                       save_measure, shannon_entropy, tv_distance)
from .walks import (EscapeEstimates, EstimateWithCI, GreenEscape, Trajectory,
                    WalkConfig, chung_fuchs_escape, escape_from_green,
                    escape_mc, green_sum, range_rate_profile, range_stat,
                    sample_path, symmetry_certificate, tail_visit_prob,
                    tail_visit_profile)
from .entropy import (EntropyBracket, EntropyProfile, avez_profile,
                      continuity_experiment, entropy_bracket,
                      semicontinuity_check)
from .heatkernel import (CSCInputs, CSCTrace, KernelProfile, csc_constant,
                         fit_decay_constant, sup_kernel_profile,
                         tail_model_from_profile, verify_comparison)
from .coarse import (STATISTICS, CoarseSpec, EntropyEstimate, base_path,
                     classify_increments, coarse_neighborhood,
                     coarse_trajectory, exact_conditional_entropy,
                     exact_joint_law, exact_partition_entropy, lamp_split,
                     plugin_partition_entropy, realize_statistic,
                     unstable_increments, unstable_points, unstable_visits)
from .config import ExperimentConfig, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
