"""Simulation laboratory for directed last passage percolation in
hierarchical random environments: exact solvers, constructive lower-bound
paths, and a replicate experiment harness."""

__version__ = "0.1.0"

from .env import (EnvironmentSpec, PoissonLayers, WeightField, field_eval,
                  gen_poisson_layers, make_field, sample_logcorrected,
                  sample_pareto2, scale_of)
from .errors import (DegenerateError, DomainError, InfeasibleError,
                     InternalError, SizeError)
from .geometry import (Cylinder, Rect, cancellation_gap, check_slope_bound,
                       cyl_contains, lattice_count_in_cyl, slope)
from .lpp import (PassageResult, geodesic, last_passage, passage_between,
                  poisson_last_passage, scale_decomposition, skeleton,
                  transversal_fluctuation)
from .construct import (LevelSets, MultiScaleParams, SkeletonChoice,
                        build_brw_path, build_heavy_path, cylinder_hit_stats,
                        heavy_params, reference_bound, verify_apriori)
from .stats import (ExperimentConfig, ReplicateRecord, concentration_tail,
                    fit_log_correction, run_experiment, variance_curve)
