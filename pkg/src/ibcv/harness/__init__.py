"""Case registry, configuration, run loop and CLI."""

from .cases import builtin, builtin_cases, builtin_tree, dimensionless_groups, scale_tree
from .config import CaseConfig, load_config, validate_tree
from .metrics import jump_metric, relative_linf, smoothness_ratio
from .run import CaseResult, load_forces, load_momentum, run_case, select

__all__ = [
    "CaseConfig",
    "CaseResult",
    "builtin",
    "builtin_cases",
    "builtin_tree",
    "dimensionless_groups",
    "jump_metric",
    "load_config",
    "load_forces",
    "load_momentum",
    "relative_linf",
    "run_case",
    "scale_tree",
    "select",
    "smoothness_ratio",
    "validate_tree",
]
