"""Micropolarizer mosaic decoding and polarization-guided specular filling.

A division-of-focal-plane sensor polarizes each pixel of a 2x2 super-pixel at
0/45/90/135 degrees. Decoding gives Stokes parameters per super-pixel, from
which the degree (DOLP) and angle (AOP) of linear polarization follow.
Specular surfaces (glass, water) show high DOLP; connected high-DOLP regions
are treated as planes and their disparities re-estimated from the surrounding
low-DOLP pixels, replacing the reflection-corrupted dense estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgcore import DisparityMap, GrayImage, ValidationError

DEFAULT_LAYOUT = ((0, 45), (135, 90))

# Reject ring point sets whose x-y scatter matrix is this ill-conditioned;
# the ring is then effectively collinear and a plane is not recoverable.
_CONDITION_LIMIT = 1.0e8

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class PolarMosaic:
    """Raw micropolarizer raster; the 2x2 pattern defaults to [[0,45],[135,90]]."""

    data: np.ndarray
    layout: tuple[tuple[int, int], tuple[int, int]] = DEFAULT_LAYOUT

    def __post_init__(self):
        img = GrayImage(self.data)  # reuses intensity validation
        if img.height % 2 or img.width % 2:
            raise ValidationError(
                f"mosaic dimensions must be even, got {img.height}x{img.width}"
            )
        angles = sorted(a for row in self.layout for a in row)
        if angles != [0, 45, 90, 135]:
            raise ValidationError(f"layout must contain each of 0/45/90/135 once, got {self.layout}")
        object.__setattr__(self, "data", img.pixels)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PolarChannels:
    """Decoded per-angle images plus DOLP/AOP, all at half mosaic resolution."""

    i0: GrayImage
    i45: GrayImage
    i90: GrayImage
    i135: GrayImage
    dolp: np.ndarray
    aop: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.i0.shape


@dataclass(frozen=True)
class SpecularRegion:
    """One 4-connected high-DOLP component with its low-DOLP boundary ring."""

    pixels: np.ndarray  # boolean mask over the channel grid
    ring: np.ndarray  # boolean mask, 8-adjacent to pixels, below threshold

    @property
    def area(self) -> int:
        return int(self.pixels.sum())


def stokes_from_channels(
    i0: np.ndarray, i45: np.ndarray, i90: np.ndarray, i135: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear Stokes parameters (S0, S1, S2) from the four angle images."""
    i0 = np.asarray(i0, dtype=np.float64)
    i45 = np.asarray(i45, dtype=np.float64)
    i90 = np.asarray(i90, dtype=np.float64)
    i135 = np.asarray(i135, dtype=np.float64)
    s0 = (i0 + i45 + i90 + i135) / 2.0
    return s0, i0 - i90, i45 - i135


def dolp_aop_from_stokes(
    s0: np.ndarray, s1: np.ndarray, s2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """DOLP = sqrt(S1^2 + S2^2) / S0 clamped to [0, 1] (0 where S0 == 0) and
    AOP = atan2(S2, S1) / 2 wrapped into [-pi/2, pi/2)."""
    amplitude = np.hypot(s1, s2)
    dolp = np.zeros_like(np.asarray(s0, dtype=np.float64))
    np.divide(amplitude, s0, out=dolp, where=np.asarray(s0) != 0)
    dolp = np.clip(dolp, 0.0, 1.0)
    aop = 0.5 * np.arctan2(s2, s1)
    aop = np.mod(aop + np.pi / 2.0, np.pi) - np.pi / 2.0
    return dolp, aop


def decode_mosaic(mosaic: PolarMosaic) -> PolarChannels:
    """Split the mosaic into its four angle images and derive DOLP/AOP.

    Each angle keeps exactly its own sample per 2x2 block (no interpolation),
    so the channels live on the half-resolution super-pixel grid.
    """
    slices = {
        mosaic.layout[0][0]: (slice(0, None, 2), slice(0, None, 2)),
        mosaic.layout[0][1]: (slice(0, None, 2), slice(1, None, 2)),
        mosaic.layout[1][0]: (slice(1, None, 2), slice(0, None, 2)),
        mosaic.layout[1][1]: (slice(1, None, 2), slice(1, None, 2)),
    }
    channels = {angle: mosaic.data[sl] for angle, sl in slices.items()}
    s0, s1, s2 = stokes_from_channels(
        channels[0], channels[45], channels[90], channels[135]
    )
    dolp, aop = dolp_aop_from_stokes(s0, s1, s2)
    return PolarChannels(
        i0=GrayImage(channels[0]),
        i45=GrayImage(channels[45]),
        i90=GrayImage(channels[90]),
        i135=GrayImage(channels[135]),
        dolp=dolp,
        aop=aop,
    )


def segment_dolp(dolp: np.ndarray, dolp_threshold: float, min_area: int = 50) -> list[SpecularRegion]:
    """Specular regions from a raw DOLP raster (possibly resampled to another grid)."""
    if not (0.0 < dolp_threshold < 1.0):
        raise ValidationError("dolp_threshold must lie in (0, 1)")
    high = np.asarray(dolp) >= dolp_threshold
    labels, count = ndimage.label(high, structure=_FOUR_CONNECTED)
    regions = []
    for idx in range(1, count + 1):
        pixels = labels == idx
        if int(pixels.sum()) < min_area:
            continue
        neighborhood = ndimage.binary_dilation(pixels, structure=_EIGHT_CONNECTED)
        ring = neighborhood & ~pixels & ~high
        regions.append(SpecularRegion(pixels=pixels, ring=ring))
    return regions


def segment_specular(
    channels: PolarChannels, dolp_threshold: float, min_area: int = 50
) -> list[SpecularRegion]:
    """4-connected components of high-DOLP pixels with their boundary rings.

    Components smaller than min_area are discarded; the ring of a component is
    every below-threshold pixel 8-adjacent to it.
    """
    return segment_dolp(channels.dolp, dolp_threshold, min_area)


@dataclass(frozen=True)
class PlaneFit:
    """Outcome of fitting one specular region; coeffs are (a, b, c) in
    disparity = a*x + b*y + c, or None when the fit was rejected."""

    region_index: int
    filled: bool
    coeffs: tuple[float, float, float] | None
    reason: str | None = None


def _fit_plane(xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> tuple | None:
    """Least-squares plane through (x, y, value) samples via normal equations.

    Returns None when fewer than 3 samples or the point scatter is too close
    to collinear for a stable solution.
    """
    if xs.size < 3:
        return None
    design = np.stack([xs, ys, np.ones_like(xs)], axis=1)
    normal = design.T @ design
    if np.linalg.cond(normal) > _CONDITION_LIMIT:
        return None
    a, b, c = np.linalg.solve(normal, design.T @ values)
    return float(a), float(b), float(c)


def plane_fill(
    dense: DisparityMap,
    regions: list[SpecularRegion],
    max_disparity: float | None = None,
) -> tuple[DisparityMap, list[PlaneFit]]:
    """Replace each specular region's disparities with a plane fitted to the
    valid disparities on its boundary ring.

    Regions whose ring offers fewer than 3 valid, non-collinear samples are
    left untouched and reported. Filled values are clamped to [0,
    max_disparity] when a bound is given; all pixels outside the regions stay
    bit-identical.
    """
    values = dense.values.copy()
    valid = dense.valid_mask()
    fits = []
    for index, region in enumerate(regions):
        if region.pixels.shape != values.shape:
            raise ValidationError("region mask does not match the disparity map")
        sample = region.ring & valid
        ys, xs = np.nonzero(sample)
        coeffs = _fit_plane(xs.astype(np.float64), ys.astype(np.float64), values[ys, xs])
        if coeffs is None:
            reason = "fewer than 3 valid ring pixels" if xs.size < 3 else "collinear ring"
            fits.append(PlaneFit(index, False, None, reason))
            continue
        a, b, c = coeffs
        ry, rx = np.nonzero(region.pixels)
        plane = a * rx + b * ry + c
        if max_disparity is not None:
            plane = np.clip(plane, 0.0, max_disparity)
        else:
            plane = np.maximum(plane, 0.0)
        values[ry, rx] = plane
        fits.append(PlaneFit(index, True, (a, b, c)))
    return DisparityMap(values), fits


def resize_nearest(raster: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor rescale used to register the DOLP grid to the
    disparity image grid."""
    raster = np.asarray(raster)
    h, w = raster.shape
    th, tw = shape
    rows = np.minimum((np.arange(th) * h) // th, h - 1)
    cols = np.minimum((np.arange(tw) * w) // tw, w - 1)
    return raster[np.ix_(rows, cols)]
