"""Sequential Pomeau-Manneville maps: transfer operators and limit theorems."""

from ._seqpm import (
    ConfigError,
    DomainError,
    GridBreakdown,
    __version__,
    apply_map,
    decomposition,
    default_config,
    experiment_kinds,
    inverse_left,
    kolmogorov_tail,
    map_derivative,
    orbit,
    run,
    ulam_matrix,
    validate,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "GridBreakdown",
    "__version__",
    "apply_map",
    "decomposition",
    "default_config",
    "experiment_kinds",
    "inverse_left",
    "kolmogorov_tail",
    "map_derivative",
    "orbit",
    "run",
    "ulam_matrix",
    "validate",
]
