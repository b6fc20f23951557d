"""Neural-field multiscale topology optimization."""

from ._core import (
    ConfigError,
    Error,
    FeError,
    IoError,
    Material,
    NetworkParams,
    RunConfig,
    RunResult,
    backward,
    forward,
    homogenize,
    hs_upper_bound,
    init_params,
    load_checkpoint,
    parse_config,
    parse_config_text,
    render_densities,
    run,
    threshold_and_evaluate,
)

__all__ = [
    "ConfigError",
    "Error",
    "FeError",
    "IoError",
    "Material",
    "NetworkParams",
    "RunConfig",
    "RunResult",
    "backward",
    "forward",
    "homogenize",
    "hs_upper_bound",
    "init_params",
    "load_checkpoint",
    "parse_config",
    "parse_config_text",
    "render_densities",
    "run",
    "threshold_and_evaluate",
]
