"""Python face of the pose-lifting core.

The heavy lifting lives in the compiled ``_htnet`` extension; this package
just re-exports it. Build the extension with CMake and put its directory on
``PYTHONPATH`` (the ctest ``python_smoke`` target wires this up).
"""

from _htnet import (  # noqa: F401
    ModelConfig,
    ModelParams,
    SkeletonSpec,
    TrainConfig,
    auc,
    gradcheck,
    h36m17,
    init_params,
    load_checkpoint,
    load_poseset,
    load_skeleton,
    metrics_report,
    model_forward,
    mpjpe,
    normalize_2d,
    normalized_adjacency,
    p_mpjpe,
    param_count,
    pck,
    replacement_masks,
    save_checkpoint,
    synth_generate,
    train,
)

__all__ = [
    "ModelConfig",
    "ModelParams",
    "SkeletonSpec",
    "TrainConfig",
    "auc",
    "gradcheck",
    "h36m17",
    "init_params",
    "load_checkpoint",
    "load_poseset",
    "load_skeleton",
    "metrics_report",
    "model_forward",
    "mpjpe",
    "normalize_2d",
    "normalized_adjacency",
    "p_mpjpe",
    "param_count",
    "pck",
    "replacement_masks",
    "save_checkpoint",
    "synth_generate",
    "train",
]
