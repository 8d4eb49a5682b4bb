"""Multi-face manipulation detection and localization.

Thin wrapper over the compiled core. Images are float64 numpy arrays shaped
[3, h, w] with values in [0, 1]; masks are uint8 [h, w] with 1 marking
tampered pixels.
"""

from ._monfap import (
    CheckpointError,
    ConfigError,
    Model,
    __version__,
    auc,
    build_split,
    canonical_config,
    default_config,
    generate_scene,
    perturb,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "Model",
    "__version__",
    "auc",
    "build_split",
    "canonical_config",
    "default_config",
    "generate_scene",
    "perturb",
]
