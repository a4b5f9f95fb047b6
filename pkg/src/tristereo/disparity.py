"""Winner-take-all selection, uniqueness filtering, subpixel refinement, and
the binocular pipeline that chains them behind hierarchical census/SGM costs."""

from __future__ import annotations

import numpy as np

from .census import MatchDirection
from .hierarchy import accumulate_hierarchy, build_cost_pyramid
from .imgcore import (
    INVALID_DISPARITY,
    CostVolume,
    DisparityMap,
    GrayImage,
    PipelineConfig,
    ValidationError,
)
from .sgm import PathSet, sgm_aggregate

# Largest subpixel offset strictly inside (-0.5, 0.5); keeps the integer part
# of every refined disparity unchanged.
_MAX_OFFSET = np.nextafter(0.5, 0.0)


def select_wta(vol: CostVolume) -> DisparityMap:
    """Per-pixel integer argmin disparity; ties go to the smaller disparity."""
    return DisparityMap(np.argmin(vol.costs, axis=2).astype(np.float64))


def uniqueness_filter(vol: CostVolume, disp: DisparityMap, ratio: float) -> DisparityMap:
    """Invalidate pixels whose best cost is not clearly below the runner-up.

    A pixel survives only if best_cost < (1 - ratio) * second_cost, where
    second_cost is the minimum over disparities more than one bin away from
    the argmin. Pixels already invalid stay invalid; pixels with no
    non-adjacent competitor (tiny disparity counts) are kept.
    """
    if disp.shape != (vol.height, vol.width):
        raise ValidationError("disparity map does not match the cost volume")
    costs = vol.costs
    d_idx = np.arange(vol.num_disparities)

    valid = disp.valid_mask()
    best_d = np.where(valid, disp.values, 0).astype(np.int64)
    best_cost = np.take_along_axis(costs, best_d[:, :, None], axis=2)[:, :, 0]

    non_adjacent = np.abs(d_idx[None, None, :] - best_d[:, :, None]) > 1
    second_cost = np.where(non_adjacent, costs, np.inf).min(axis=2)

    keep = valid & (best_cost < (1.0 - ratio) * second_cost)
    return DisparityMap(np.where(keep, disp.values, INVALID_DISPARITY))


def subpixel_refine(vol: CostVolume, disp: DisparityMap) -> DisparityMap:
    """Refine integer disparities by the vertex of a quadratic through the
    argmin cost and its two neighbors.

    refined = d + (C(d-1) - C(d+1)) / (2 * (C(d-1) - 2 C(d) + C(d+1)))

    Argmins on the disparity range boundary and degenerate (flat) triples keep
    their integer value; offsets are clamped into the open interval
    (-0.5, 0.5).
    """
    if disp.shape != (vol.height, vol.width):
        raise ValidationError("disparity map does not match the cost volume")
    costs = vol.costs
    num_d = vol.num_disparities

    valid = disp.valid_mask()
    d = np.where(valid, disp.values, 0).astype(np.int64)
    interior = valid & (d > 0) & (d < num_d - 1)

    def gather(off: int) -> np.ndarray:
        idx = np.clip(d + off, 0, num_d - 1)
        return np.take_along_axis(costs, idx[:, :, None], axis=2)[:, :, 0]

    c_lo, c_mid, c_hi = gather(-1), gather(0), gather(1)

    denom = c_lo - 2.0 * c_mid + c_hi
    usable = interior & (denom > 0)
    offset = np.zeros_like(costs[:, :, 0])
    np.divide(c_lo - c_hi, 2.0 * denom, out=offset, where=usable)
    offset = np.clip(offset, -_MAX_OFFSET, _MAX_OFFSET)

    refined = np.where(usable, d + offset, disp.values)
    refined = np.where(valid, refined, INVALID_DISPARITY)
    return DisparityMap(refined)


def aggregate_pipeline_volume(vol: CostVolume, cfg: PipelineConfig, threads: int = 1) -> CostVolume:
    """SGM aggregation with the config's penalties scaled to the census length."""
    p1, p2 = cfg.scaled_penalties()
    return sgm_aggregate(vol, p1, p2, PathSet(), threads=threads)


def finalize_disparity(
    vol: CostVolume,
    cfg: PipelineConfig,
    apply_uniqueness: bool = True,
    threads: int = 1,
) -> DisparityMap:
    """Shared back-end: SGM -> WTA -> uniqueness -> subpixel on a cost volume."""
    aggregated = aggregate_pipeline_volume(vol, cfg, threads=threads)
    disp = select_wta(aggregated)
    if apply_uniqueness:
        disp = uniqueness_filter(aggregated, disp, cfg.uniqueness_ratio)
    return subpixel_refine(aggregated, disp)


def binocular_pipeline(
    left: GrayImage,
    right: GrayImage,
    cfg: PipelineConfig,
    apply_uniqueness: bool = True,
    threads: int = 1,
) -> DisparityMap:
    """Dense disparity for a rectified horizontal pair; the right image is the base."""
    pyramid = build_cost_pyramid(right, left, cfg, MatchDirection.LEFTWARD)
    volume = accumulate_hierarchy(pyramid)
    return finalize_disparity(volume, cfg, apply_uniqueness=apply_uniqueness, threads=threads)
