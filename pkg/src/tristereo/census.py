"""Census transform and Hamming-distance cost volume construction.

The census descriptor compares every window neighbor against the center
pixel, so it is invariant to any strictly monotone remapping of the image
intensities; matching cost is the Hamming distance between descriptors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .imgcore import CostVolume, GrayImage, ValidationError


class MatchDirection(enum.Enum):
    """Where the match camera sits relative to the base camera.

    LEFTWARD: match camera left of base; a pixel at column c in the base
    image corresponds to column c + d in the match image.
    UPWARD: match camera above base; row r corresponds to row r + d.
    """

    LEFTWARD = "leftward"
    UPWARD = "upward"


@dataclass(frozen=True)
class CensusImage:
    """Per-pixel census bit strings packed into 64-bit planes.

    Neighbor k (row-major window order, center excluded) maps to bit
    (k % 64) of plane (k // 64); the bit is 1 iff that neighbor is strictly
    darker than the center pixel. Out-of-image neighbors contribute 0.
    """

    planes: np.ndarray
    window_radius: int
    num_bits: int

    @property
    def height(self) -> int:
        return self.planes.shape[0]

    @property
    def width(self) -> int:
        return self.planes.shape[1]


def census_transform(img: GrayImage, window_radius: int) -> CensusImage:
    """Compute the census descriptor of every pixel.

    Border pixels keep full-width bit strings: neighbors falling outside the
    image are treated as equal to the center (bit 0).
    """
    if window_radius < 1:
        raise ValidationError("window_radius must be >= 1")
    side = 2 * window_radius + 1
    num_bits = side * side - 1
    num_planes = (num_bits + 63) // 64

    h, w = img.shape
    center = img.pixels
    padded = np.pad(center, window_radius, mode="constant", constant_values=0)
    inside = np.pad(
        np.ones((h, w), dtype=bool), window_radius, mode="constant", constant_values=False
    )

    planes = np.zeros((h, w, num_planes), dtype=np.uint64)
    bit = 0
    for dy in range(-window_radius, window_radius + 1):
        for dx in range(-window_radius, window_radius + 1):
            if dy == 0 and dx == 0:
                continue
            r0, c0 = window_radius + dy, window_radius + dx
            neighbor = padded[r0 : r0 + h, c0 : c0 + w]
            valid = inside[r0 : r0 + h, c0 : c0 + w]
            darker = (neighbor < center) & valid
            planes[:, :, bit // 64] |= darker.astype(np.uint64) << np.uint64(bit % 64)
            bit += 1
    return CensusImage(planes=planes, window_radius=window_radius, num_bits=num_bits)


def hamming_distance(a: CensusImage, b: CensusImage) -> np.ndarray:
    """Per-pixel Hamming distance between two census images of equal shape."""
    if a.planes.shape != b.planes.shape or a.window_radius != b.window_radius:
        raise ValidationError("census images must share dimensions and window radius")
    return np.bitwise_count(a.planes ^ b.planes).sum(axis=2).astype(np.float64)


def hamming_cost_volume(
    base: CensusImage,
    match: CensusImage,
    num_disparities: int,
    direction: MatchDirection,
    disparity_scale: float = 1.0,
) -> CostVolume:
    """Matching cost for every (row, col, disparity).

    cost(r, c, d) = popcount(base(r, c) XOR match(r, c + d)) for LEFTWARD
    pairs and XOR match(r + d, c) for UPWARD pairs. Disparities whose match
    pixel falls outside the image cost the full bit string length, keeping
    the volume total for the downstream dynamic programming.

    disparity_scale rescales the match offset (offset = round(d * scale)) for
    rigs whose two baselines differ in length; 1.0 leaves d untouched.
    """
    if base.planes.shape != match.planes.shape or base.window_radius != match.window_radius:
        raise ValidationError("base and match census images must share dimensions and radius")
    if num_disparities < 1:
        raise ValidationError("num_disparities must be >= 1")
    if disparity_scale <= 0:
        raise ValidationError("disparity_scale must be positive")

    h, w, _ = base.planes.shape
    costs = np.full((h, w, num_disparities), float(base.num_bits), dtype=np.float64)
    for d in range(num_disparities):
        offset = round(d * disparity_scale)
        if direction is MatchDirection.LEFTWARD:
            if offset >= w:
                continue
            span = w - offset
            diff = base.planes[:, :span] ^ match.planes[:, offset:]
            costs[:, :span, d] = np.bitwise_count(diff).sum(axis=2)
        else:
            if offset >= h:
                continue
            span = h - offset
            diff = base.planes[:span, :] ^ match.planes[offset:, :]
            costs[:span, :, d] = np.bitwise_count(diff).sum(axis=2)
    return CostVolume(costs)
