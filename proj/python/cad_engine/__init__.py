"""Confidence-aware adaptive displacement: region search, replacement, losses and metrics."""

from ._cad import (
    CadError,
    apply_replacement,
    asd,
    best_placement,
    ce_loss,
    confidence_grid,
    cps_loss,
    dice_loss,
    dsc,
    find_region,
    hd95,
    jaccard,
    kl_divergence,
    mt_loss,
    ramp,
    softmax,
    thresholds_at,
    train_demo,
)

__all__ = [
    "CadError",
    "apply_replacement",
    "asd",
    "best_placement",
    "ce_loss",
    "confidence_grid",
    "cps_loss",
    "dice_loss",
    "dsc",
    "find_region",
    "hd95",
    "jaccard",
    "kl_divergence",
    "mt_loss",
    "ramp",
    "softmax",
    "thresholds_at",
    "train_demo",
]
