"""Hierarchical cost computation: per-scale volumes and coarse-to-fine accumulation.

Instead of letting coarse scales bound the disparity search, coarse costs are
interpolated up and summed into the finer costs, so a wrong coarse minimum
cannot lock out the true disparity while extra context still disambiguates
repeating patterns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .census import MatchDirection, census_transform, hamming_cost_volume
from .imgcore import CostVolume, GrayImage, PipelineConfig, ValidationError, downsample_half


@dataclass(frozen=True)
class CostPyramid:
    """Cost volumes from fine (level 0, full resolution) to coarse.

    Level s covers floor(width / 2^s) x floor(height / 2^s) pixels and
    ceil(num_disparities / 2^s) disparities.
    """

    levels: tuple[CostVolume, ...]

    def __post_init__(self):
        if not self.levels:
            raise ValidationError("pyramid needs at least one level")

    @property
    def num_levels(self) -> int:
        return len(self.levels)


def build_cost_pyramid(
    base: GrayImage,
    match: GrayImage,
    cfg: PipelineConfig,
    direction: MatchDirection,
    disparity_scale: float = 1.0,
) -> CostPyramid:
    """Census + Hamming volumes of the repeatedly halved image pair.

    Level s uses the s-times-halved images and a proportionally halved
    disparity count. If the images run out of pixels before max_scale levels,
    the pyramid is truncated with a warning rather than failing.
    """
    if base.shape != match.shape:
        raise ValidationError(f"image sizes differ: {base.shape} vs {match.shape}")

    levels = []
    cur_base, cur_match = base, match
    for scale in range(cfg.max_scale):
        if scale > 0:
            if cur_base.height < 2 or cur_base.width < 2:
                warnings.warn(
                    f"pyramid truncated to {scale} level(s): "
                    f"{cur_base.height}x{cur_base.width} image cannot be halved",
                    stacklevel=2,
                )
                break
            cur_base = downsample_half(cur_base)
            cur_match = downsample_half(cur_match)
        num_disp = -(-cfg.num_disparities // (1 << scale))  # ceil division
        cb = census_transform(cur_base, cfg.window_radius)
        cm = census_transform(cur_match, cfg.window_radius)
        levels.append(hamming_cost_volume(cb, cm, num_disp, direction, disparity_scale))
    return CostPyramid(tuple(levels))


def accumulate_hierarchy(pyr: CostPyramid) -> CostVolume:
    """Fold coarse costs into fine ones, coarsest first.

    Each level-s cost at (r, c, d) gains the mean of the already-accumulated
    level-(s+1) costs at (r//2, c//2) for disparity bins d//2 and d//2 + 1,
    indices clamped to the coarse level's extent. Returns the accumulated
    full-resolution volume.
    """
    acc = [lvl.costs.copy() for lvl in pyr.levels]
    for s in range(len(acc) - 2, -1, -1):
        fine, coarse = acc[s], acc[s + 1]
        fh, fw, fd = fine.shape
        ch, cw, cd = coarse.shape
        rows = np.minimum(np.arange(fh) // 2, ch - 1)
        cols = np.minimum(np.arange(fw) // 2, cw - 1)
        d_lo = np.minimum(np.arange(fd) // 2, cd - 1)
        d_hi = np.minimum(np.arange(fd) // 2 + 1, cd - 1)
        spatial = coarse[np.ix_(rows, cols)]
        fine += (spatial[:, :, d_lo] + spatial[:, :, d_hi]) / 2.0
    return CostVolume(acc[0])
