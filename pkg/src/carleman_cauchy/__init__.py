"""Carleman-weighted Tikhonov reconstruction for lateral Cauchy problems of a
1-D quasilinear parabolic equation."""

__version__ = "0.1.0"

from .grid import Grid, build_grid, derivative_bundle, h2_norm_sq  # noqa: E402
from .forward import (  # noqa: E402
    CauchyTrace,
    ProblemSpec,
    add_noise,
    differentiate_trace,
    extract_trace,
    study_problem,
    solve_forward,
)
from .carleman import CwfSpec, cwf_value, cwf_weight_grid, lambda_for_noise  # noqa: E402
from .functional import FunctionalConfig, TikhonovFunctional, build_extension  # noqa: E402
from .optimize import (  # noqa: E402
    OptimizerConfig,
    estimate_constants,
    fixed_step_cg,
    gradient_projection,
    project_ball,
)
from .experiments import ExperimentConfig, line_error, preset_config, run_preset  # noqa: E402

__all__ = [
    "Grid", "build_grid", "derivative_bundle", "h2_norm_sq",
    "CauchyTrace", "ProblemSpec", "add_noise", "differentiate_trace", "extract_trace", "study_problem",
    "solve_forward",
    "CwfSpec", "cwf_value", "cwf_weight_grid", "lambda_for_noise",
    "FunctionalConfig", "TikhonovFunctional", "build_extension",
    "OptimizerConfig", "estimate_constants", "fixed_step_cg", "gradient_projection", "project_ball",
    "ExperimentConfig", "line_error", "preset_config", "run_preset",
]
