"""Self-influence membership inference: python surface over the C++ core."""

from sifmi._core import (
    AttackModel,
    Augmentation,
    Checkpoint,
    Dataset,
    LissaConfig,
    ModelSpec,
    SifRecord,
    SifmiError,
    Split,
    TrainConfig,
    ada_sif_score,
    avg_sif_score,
    balanced_accuracy,
    crop_flip,
    evaluate_accuracy,
    forward_loss,
    gap_attack,
    grad,
    hvp,
    load_csv,
    load_idx,
    make_splits,
    predict,
    set_thresholds,
    sif_score,
    spearman,
    synth_blobs,
    train_target,
)

__all__ = [
    "AttackModel",
    "Augmentation",
    "Checkpoint",
    "Dataset",
    "LissaConfig",
    "ModelSpec",
    "SifRecord",
    "SifmiError",
    "Split",
    "TrainConfig",
    "ada_sif_score",
    "avg_sif_score",
    "balanced_accuracy",
    "crop_flip",
    "evaluate_accuracy",
    "forward_loss",
    "gap_attack",
    "grad",
    "hvp",
    "load_csv",
    "load_idx",
    "make_splits",
    "predict",
    "set_thresholds",
    "sif_score",
    "spearman",
    "synth_blobs",
    "train_target",
]
