"""Core raster types shared by every pipeline stage, plus gradient and pyramid primitives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INVALID_DISPARITY = -1.0


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition (dimensions, ranges, ordering)."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit intensity raster, row-major.

    Immutable after construction; the backing array is marked read-only so
    instances can be shared freely between worker threads.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValidationError(f"image must be 2-D, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError(f"image dimensions must be >= 1, got {px.shape}")
        if px.dtype != np.uint8:
            if np.issubdtype(px.dtype, np.floating):
                px = np.rint(px)
            if px.min(initial=0) < 0 or px.max(initial=0) > 255:
                raise ValidationError("intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class GradientPair:
    """Signed per-pixel horizontal and vertical gradients of a source image."""

    horiz: np.ndarray
    vert: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.horiz, dtype=np.float64)
        v = np.asarray(self.vert, dtype=np.float64)
        if h.shape != v.shape or h.ndim != 2:
            raise ValidationError(
                f"gradient rasters must be 2-D and share a shape, got {h.shape} / {v.shape}"
            )
        object.__setattr__(self, "horiz", _freeze(h))
        object.__setattr__(self, "vert", _freeze(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.horiz.shape


@dataclass(frozen=True)
class CostVolume:
    """Per-(row, col, disparity) matching cost tensor; costs finite and >= 0."""

    costs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=np.float64)
        if c.ndim != 3:
            raise ValidationError(f"cost volume must be 3-D, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("cost volume contains non-finite entries")
        if c.size and c.min() < 0:
            raise ValidationError("cost volume contains negative entries")
        object.__setattr__(self, "costs", _freeze(c))

    @property
    def height(self) -> int:
        return self.costs.shape[0]

    @property
    def width(self) -> int:
        return self.costs.shape[1]

    @property
    def num_disparities(self) -> int:
        return self.costs.shape[2]


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel subpixel disparity with INVALID_DISPARITY marking rejected pixels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValidationError(f"disparity map must be 2-D, got shape {v.shape}")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid_mask(self) -> np.ndarray:
        return self.values >= 0

    @staticmethod
    def full_invalid(height: int, width: int) -> "DisparityMap":
        return DisparityMap(np.full((height, width), INVALID_DISPARITY))


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs for the dense matching pipelines.

    sgm_p1/sgm_p2 are expressed per 48-bit census descriptor (the 7x7 window);
    the pipelines rescale them by the actual descriptor length.
    """

    window_radius: int = 3
    num_disparities: int = 64
    max_scale: int = 3
    sgm_p1: float = 7.0
    sgm_p2: float = 86.0
    uniqueness_ratio: float = 0.15
    dolp_threshold: float = 0.3
    wire_prob_threshold: float = 0.5

    def __post_init__(self):
        if self.window_radius < 1:
            raise ValidationError("window_radius must be >= 1")
        if self.num_disparities < 2:
            raise ValidationError("num_disparities must be >= 2")
        if self.max_scale < 1:
            raise ValidationError("max_scale must be >= 1")
        if not (0 <= self.sgm_p1 <= self.sgm_p2):
            raise ValidationError("penalties must satisfy 0 <= sgm_p1 <= sgm_p2")
        for name in ("uniqueness_ratio", "dolp_threshold", "wire_prob_threshold"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise ValidationError(f"{name} must lie in (0, 1), got {val}")

    @property
    def census_bits(self) -> int:
        side = 2 * self.window_radius + 1
        return side * side - 1

    def scaled_penalties(self) -> tuple[float, float]:
        """Effective SGM penalties for the configured census descriptor length."""
        scale = self.census_bits / 48.0
        return self.sgm_p1 * scale, self.sgm_p2 * scale


def compute_gradients(img: GrayImage) -> GradientPair:
    """Central-difference gradients, one-sided at the borders.

    Interior pixels use (I[x+1] - I[x-1]) / 2 per axis; border pixels fall back
    to the first-order one-sided difference.
    """
    data = img.pixels.astype(np.float64)
    if img.height == 1:
        vert = np.zeros_like(data)
    else:
        vert = np.gradient(data, axis=0)
    if img.width == 1:
        horiz = np.zeros_like(data)
    else:
        horiz = np.gradient(data, axis=1)
    return GradientPair(horiz=horiz, vert=vert)


def downsample_half(img: GrayImage) -> GrayImage:
    """Halve an image by 2x2 block averaging.

    Output dimensions are floor(input / 2); a trailing odd row/column is
    dropped. Block means are rounded to the nearest intensity, halves up.
    """
    if img.height < 2 or img.width < 2:
        raise ValidationError(
            f"cannot halve a {img.height}x{img.width} image; both dimensions must be >= 2"
        )
    hh, ww = img.height // 2, img.width // 2
    blocks = img.pixels[: 2 * hh, : 2 * ww].astype(np.uint32)
    sums = blocks.reshape(hh, 2, ww, 2).sum(axis=(1, 3))
    return GrayImage(((sums + 2) // 4).astype(np.uint8))
