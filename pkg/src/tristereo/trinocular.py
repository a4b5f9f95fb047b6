"""Trinocular fusion: gradient-weighted combination of the horizontal-pair and
vertical-pair cost volumes, sharing the census/hierarchy/SGM back-end.

The horizontal pair is unreliable along structures parallel to its baseline
(horizontal edges) and vice versa, so each pixel weights the pair whose
baseline is perpendicular to the local edge more heavily.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .census import MatchDirection
from .disparity import finalize_disparity
from .hierarchy import accumulate_hierarchy, build_cost_pyramid
from .imgcore import (
    CostVolume,
    DisparityMap,
    GradientPair,
    GrayImage,
    PipelineConfig,
    ValidationError,
    compute_gradients,
)
from .parallel import ordered_map


@dataclass(frozen=True)
class WeightField:
    """Per-pixel convex weights for the horizontal and vertical pair costs."""

    w_h: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        wh = np.asarray(self.w_h, dtype=np.float64)
        wv = np.asarray(self.w_v, dtype=np.float64)
        if wh.shape != wv.shape or wh.ndim != 2:
            raise ValidationError("weight rasters must be 2-D and share a shape")
        if wh.min(initial=0.0) < 0 or wv.min(initial=0.0) < 0:
            raise ValidationError("weights must be non-negative")
        object.__setattr__(self, "w_h", wh)
        object.__setattr__(self, "w_v", wv)


def gradient_weights(grad: GradientPair, epsilon: float = 1.0) -> WeightField:
    """Weights from the base image's gradient orientation.

    w_h = (|H| + eps/2) / (|H| + |V| + eps); a strong horizontal gradient
    (vertical structure) favors the horizontal pair. The epsilon floor keeps
    the split at 0.5 on gradient-free regions and guards the division.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    ah = np.abs(grad.horiz)
    av = np.abs(grad.vert)
    w_h = (ah + epsilon / 2.0) / (ah + av + epsilon)
    return WeightField(w_h=w_h, w_v=1.0 - w_h)


def fuse_volumes(vol_h: CostVolume, vol_v: CostVolume, weights: WeightField) -> CostVolume:
    """fused(r, c, d) = 2 * (w_h * vol_h + w_v * vol_v).

    The factor 2 keeps the fused magnitude on the scale of a plain two-volume
    sum, so the SGM penalties transfer unchanged; equal weights reduce the
    fusion to exactly vol_h + vol_v.
    """
    if vol_h.costs.shape != vol_v.costs.shape:
        raise ValidationError(
            f"volume shapes differ: {vol_h.costs.shape} vs {vol_v.costs.shape}"
        )
    if weights.w_h.shape != (vol_h.height, vol_h.width):
        raise ValidationError("weight field does not match the volumes")
    fused = 2.0 * (
        weights.w_h[:, :, None] * vol_h.costs + weights.w_v[:, :, None] * vol_v.costs
    )
    return CostVolume(fused)


def trinocular_pipeline(
    right: GrayImage,
    left: GrayImage,
    top: GrayImage,
    cfg: PipelineConfig,
    apply_uniqueness: bool = True,
    baseline_ratio: float = 1.0,
    weight_fn: Callable[[GradientPair], WeightField] | None = None,
    threads: int = 1,
) -> DisparityMap:
    """Dense disparity from a perpendicular-baseline camera triple.

    Both pair pyramids are built and hierarchically accumulated, fused with
    per-pixel gradient weights of the base (right) image, then run through
    the shared SGM back-end. baseline_ratio rescales the vertical pair's
    match offsets when the two baselines are unequal; weight_fn may replace
    the gradient-ratio weighting.
    """
    if right.shape != left.shape or right.shape != top.shape:
        raise ValidationError("all three images must share dimensions")

    def build(args: tuple[GrayImage, MatchDirection, float]) -> CostVolume:
        match, direction, scale = args
        return accumulate_hierarchy(build_cost_pyramid(right, match, cfg, direction, scale))

    vol_h, vol_v = ordered_map(
        build,
        [
            (left, MatchDirection.LEFTWARD, 1.0),
            (top, MatchDirection.UPWARD, baseline_ratio),
        ],
        threads=threads,
    )

    weigher = weight_fn if weight_fn is not None else gradient_weights
    weights = weigher(compute_gradients(right))
    fused = fuse_volumes(vol_h, vol_v, weights)
    return finalize_disparity(fused, cfg, apply_uniqueness=apply_uniqueness, threads=threads)
