"""Semantic wire triangulation.

Thin wires vanish inside dense matching windows, so they are handled
sparsely: an externally produced per-pixel wire-probability map gates Canny
edges down to wire edge pixels, those pixels are matched across the camera
triple with intensity+gradient costs weighted by the gradient component
perpendicular to each baseline, and a 1-D SGM along each edge chain picks the
disparities that get merged back into the dense map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgcore import (
    INVALID_DISPARITY,
    DisparityMap,
    GradientPair,
    GrayImage,
    PipelineConfig,
    ValidationError,
    compute_gradients,
)
from .parallel import ordered_map

# Finite stand-in cost for disparities whose match pixel is out of bounds;
# far above any attainable (|dI| + |dgrad|) * |grad| value.
OUT_OF_BOUNDS_COST = 1.0e6

MIN_CHAIN_LENGTH = 5
WIRE_MASK_DILATION = 2

# 5-tap sigma = 1.0 smoothing kernel
_GAUSS5 = np.exp(-0.5 * np.arange(-2.0, 3.0) ** 2)
_GAUSS5 /= _GAUSS5.sum()


@dataclass(frozen=True)
class WireProbabilityMap:
    """Per-pixel probability in [0, 1] of belonging to a wire."""

    prob: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prob, dtype=np.float64)
        if p.ndim != 2:
            raise ValidationError("probability map must be 2-D")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValidationError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "prob", p)

    @property
    def shape(self) -> tuple[int, int]:
        return self.prob.shape

    @staticmethod
    def from_image(img: GrayImage) -> "WireProbabilityMap":
        """Decode the PGM convention: probability = intensity / 255."""
        return WireProbabilityMap(img.pixels.astype(np.float64) / 255.0)


@dataclass(frozen=True)
class EdgeChain:
    """Ordered path of 8-connected edge pixels, endpoint first, no repeats."""

    pixels: tuple[tuple[int, int], ...]  # (x, y)

    def __post_init__(self):
        pts = tuple((int(x), int(y)) for x, y in self.pixels)
        if len(set(pts)) != len(pts):
            raise ValidationError("edge chain repeats a pixel")
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if max(abs(x1 - x0), abs(y1 - y0)) != 1:
                raise ValidationError("consecutive chain pixels must be 8-neighbors")
        object.__setattr__(self, "pixels", pts)

    def __len__(self) -> int:
        return len(self.pixels)


@dataclass(frozen=True)
class WireDisparitySet:
    """Sparse (x, y, disparity) estimates at wire edge pixels."""

    entries: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        ents = tuple((int(x), int(y), float(d)) for x, y, d in self.entries)
        if len({(x, y) for x, y, _ in ents}) != len(ents):
            raise ValidationError("duplicate pixel in wire disparity set")
        object.__setattr__(self, "entries", ents)

    def __len__(self) -> int:
        return len(self.entries)

    def to_map(self, height: int, width: int) -> DisparityMap:
        """Sparse set as a map that is INVALID everywhere else."""
        return merge_wire_disparities(DisparityMap.full_invalid(height, width), self)


def _smooth5(data: np.ndarray) -> np.ndarray:
    k = _GAUSS5
    padded = np.pad(data, ((0, 0), (2, 2)), mode="symmetric")
    out = sum(k[i] * padded[:, i : i + data.shape[1]] for i in range(5))
    padded = np.pad(out, ((2, 2), (0, 0)), mode="symmetric")
    return sum(k[i] * padded[i : i + data.shape[0], :] for i in range(5))


def canny_edges(img: GrayImage, low: float, high: float) -> np.ndarray:
    """Boolean edge raster via smoothing, non-maximum suppression, hysteresis.

    5-tap sigma=1 Gaussian, central-difference gradients, 4-sector NMS with a
    deterministic tie-break so an ideal step yields a single-pixel line, then
    double-threshold hysteresis (8-connected).
    """
    if not (0 < low <= high):
        raise ValidationError(f"thresholds must satisfy 0 < low <= high, got {low}, {high}")

    smooth = _smooth5(img.pixels.astype(np.float64))
    gy, gx = np.gradient(smooth)
    mag = np.hypot(gx, gy)

    # Gradient angle folded into [0, pi), quantized to 4 sectors.
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.zeros(angle.shape, dtype=np.int8)
    sector[(angle >= np.pi / 8) & (angle < 3 * np.pi / 8)] = 1
    sector[(angle >= 3 * np.pi / 8) & (angle < 5 * np.pi / 8)] = 2
    sector[(angle >= 5 * np.pi / 8) & (angle < 7 * np.pi / 8)] = 3

    padded = np.pad(mag, 1, mode="constant")

    def shifted(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + mag.shape[0], 1 + dx : 1 + dx + mag.shape[1]]

    # Forward neighbor per sector; ties along the gradient are resolved by
    # requiring strict dominance over the forward side only.
    forward = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in forward.items():
        ahead = shifted(dy, dx)
        behind = shifted(-dy, -dx)
        keep |= (sector == s) & (mag >= behind) & (mag > ahead)
    keep &= mag > 0

    strong = keep & (mag >= high)
    candidate = keep & (mag >= low)
    # Hysteresis: weak pixels survive only when 8-connected to a strong one.
    return ndimage.binary_propagation(
        strong, mask=candidate, structure=np.ones((3, 3), dtype=bool)
    )


def _link_chains(mask: np.ndarray) -> list[EdgeChain]:
    """Greedy endpoint-first walk splitting an 8-connected pixel set into chains."""
    ys, xs = np.nonzero(mask)
    remaining = {(int(x), int(y)) for x, y in zip(xs, ys)}
    offsets = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]

    def free_neighbors(p: tuple[int, int]) -> list[tuple[int, int]]:
        x, y = p
        return [(x + dx, y + dy) for dx, dy in offsets if (x + dx, y + dy) in remaining]

    chains = []
    while remaining:
        start = min(remaining, key=lambda p: (len(free_neighbors(p)), p[1], p[0]))
        remaining.discard(start)
        chain = [start]
        cur = start
        while True:
            nbrs = free_neighbors(cur)
            if not nbrs:
                break
            cur = min(nbrs, key=lambda p: (len(free_neighbors(p)), p[1], p[0]))
            remaining.discard(cur)
            chain.append(cur)
        chains.append(EdgeChain(tuple(chain)))
    return chains


def wire_edge_pixels(
    edges: np.ndarray,
    wires: WireProbabilityMap,
    threshold: float,
    dilation: int = WIRE_MASK_DILATION,
) -> list[EdgeChain]:
    """Edge pixels inside the (dilated) thresholded wire mask, linked into chains.

    The probability mask marks small regions around wires, so it is dilated
    before intersecting with the edge raster; chains shorter than
    MIN_CHAIN_LENGTH pixels are dropped as clutter.
    """
    edges = np.asarray(edges, dtype=bool)
    if edges.shape != wires.shape:
        raise ValidationError(f"edge raster {edges.shape} does not match wire map {wires.shape}")
    mask = wires.prob >= threshold
    if dilation > 0 and mask.any():
        mask = ndimage.binary_dilation(
            mask, structure=np.ones((3, 3), dtype=bool), iterations=dilation
        )
    survivors = edges & mask
    return [c for c in _link_chains(survivors) if len(c) >= MIN_CHAIN_LENGTH]


def wire_match_cost_h(
    x: int,
    y: int,
    d: int,
    right: GrayImage,
    left: GrayImage,
    grad_r: GradientPair,
    grad_l: GradientPair,
) -> float:
    """(|I_r(x,y) - I_l(x+d,y)| + |H_r(x,y) - H_l(x+d,y)|) * |H_r(x,y)|.

    The horizontal-pair cost is weighted by the horizontal gradient magnitude:
    edges parallel to the horizontal baseline carry no horizontal gradient and
    contribute nothing, which is exactly where this pair is unreliable.
    """
    if x + d >= right.width or x + d < 0:
        return OUT_OF_BOUNDS_COST
    di = abs(float(right.pixels[y, x]) - float(left.pixels[y, x + d]))
    dg = abs(grad_r.horiz[y, x] - grad_l.horiz[y, x + d])
    return (di + dg) * abs(grad_r.horiz[y, x])


def wire_match_cost_v(
    x: int,
    y: int,
    d: int,
    right: GrayImage,
    top: GrayImage,
    grad_r: GradientPair,
    grad_t: GradientPair,
) -> float:
    """(|I_r(x,y) - I_t(x,y+d)| + |V_r(x,y) - V_t(x,y+d)|) * |V_r(x,y)|."""
    if y + d >= right.height or y + d < 0:
        return OUT_OF_BOUNDS_COST
    di = abs(float(right.pixels[y, x]) - float(top.pixels[y + d, x]))
    dg = abs(grad_r.vert[y, x] - grad_t.vert[y + d, x])
    return (di + dg) * abs(grad_r.vert[y, x])


def _chain_cost_matrix(
    chain: EdgeChain,
    right: GrayImage,
    left: GrayImage,
    top: GrayImage,
    grad_r: GradientPair,
    grad_l: GradientPair,
    grad_t: GradientPair,
    num_disparities: int,
) -> np.ndarray:
    """Combined Cost_h + Cost_v for every (chain pixel, disparity)."""
    xs = np.array([p[0] for p in chain.pixels])
    ys = np.array([p[1] for p in chain.pixels])
    ds = np.arange(num_disparities)
    h, w = right.shape

    ir = right.pixels[ys, xs].astype(np.float64)[:, None]
    hr = grad_r.horiz[ys, xs][:, None]
    vr = grad_r.vert[ys, xs][:, None]

    xm = xs[:, None] + ds[None, :]
    ok_h = xm < w
    xm_safe = np.minimum(xm, w - 1)
    il = left.pixels[ys[:, None], xm_safe].astype(np.float64)
    hl = grad_l.horiz[ys[:, None], xm_safe]
    cost_h = np.where(ok_h, (np.abs(ir - il) + np.abs(hr - hl)) * np.abs(hr), OUT_OF_BOUNDS_COST)

    ym = ys[:, None] + ds[None, :]
    ok_v = ym < h
    ym_safe = np.minimum(ym, h - 1)
    it = top.pixels[ym_safe, xs[:, None]].astype(np.float64)
    vt = grad_t.vert[ym_safe, xs[:, None]]
    cost_v = np.where(ok_v, (np.abs(ir - it) + np.abs(vr - vt)) * np.abs(vr), OUT_OF_BOUNDS_COST)

    return cost_h + cost_v


def _edge_step(cur: np.ndarray, prev: np.ndarray, p1: float, p2: float) -> np.ndarray:
    prev_min = prev.min()
    best = np.minimum(prev, prev_min + p2)
    best[1:] = np.minimum(best[1:], prev[:-1] + p1)
    best[:-1] = np.minimum(best[:-1], prev[1:] + p1)
    return cur + best - prev_min


def edge_sgm(
    chain: EdgeChain,
    costs: np.ndarray,
    p1: float,
    p2: float,
    uniqueness_ratio: float,
) -> np.ndarray:
    """Best disparity per chain pixel from a bidirectional 1-D SGM.

    The dense recurrence runs forward and backward along the chain and the two
    path costs are summed; each pixel is then finished with WTA, the
    uniqueness test, and quadratic subpixel refinement. Returns one value per
    chain pixel, INVALID where uniqueness rejects.
    """
    costs = np.asarray(costs, dtype=np.float64)
    n, num_d = costs.shape
    if n != len(chain):
        raise ValidationError("cost matrix does not match the chain length")
    if p1 > p2 or p1 < 0:
        raise ValidationError("penalties must satisfy 0 <= p1 <= p2")

    fwd = np.empty_like(costs)
    fwd[0] = costs[0]
    for i in range(1, n):
        fwd[i] = _edge_step(costs[i], fwd[i - 1], p1, p2)
    bwd = np.empty_like(costs)
    bwd[-1] = costs[-1]
    for i in range(n - 2, -1, -1):
        bwd[i] = _edge_step(costs[i], bwd[i + 1], p1, p2)
    total = fwd + bwd

    out = np.full(n, INVALID_DISPARITY)
    d_idx = np.arange(num_d)
    for i in range(n):
        row = total[i]
        d = int(np.argmin(row))
        best = row[d]
        non_adjacent = np.abs(d_idx - d) > 1
        second = row[non_adjacent].min() if non_adjacent.any() else np.inf
        if best >= (1.0 - uniqueness_ratio) * second:
            continue
        value = float(d)
        if 0 < d < num_d - 1:
            denom = row[d - 1] - 2.0 * row[d] + row[d + 1]
            if denom > 0:
                off = (row[d - 1] - row[d + 1]) / (2.0 * denom)
                limit = np.nextafter(0.5, 0.0)
                value = d + float(np.clip(off, -limit, limit))
        out[i] = value
    return out


def wire_disparities(
    right: GrayImage,
    left: GrayImage,
    top: GrayImage,
    prob: WireProbabilityMap,
    cfg: PipelineConfig,
    canny_low: float = 20.0,
    canny_high: float = 60.0,
    threads: int = 1,
) -> WireDisparitySet:
    """Sparse wire disparities for a camera triple and a wire-probability map.

    Pixels where both gradient weights vanish have all-zero matching costs and
    are skipped rather than defaulting to disparity 0.
    """
    if right.shape != left.shape or right.shape != top.shape:
        raise ValidationError("all three images must share dimensions")
    if prob.shape != right.shape:
        raise ValidationError("wire probability map must match the image dimensions")

    edges = canny_edges(right, canny_low, canny_high)
    chains = wire_edge_pixels(edges, prob, cfg.wire_prob_threshold)
    grad_r = compute_gradients(right)
    grad_l = compute_gradients(left)
    grad_t = compute_gradients(top)

    def solve(chain: EdgeChain) -> list[tuple[int, int, float]]:
        costs = _chain_cost_matrix(
            chain, right, left, top, grad_r, grad_l, grad_t, cfg.num_disparities
        )
        disps = edge_sgm(chain, costs, cfg.sgm_p1, cfg.sgm_p2, cfg.uniqueness_ratio)
        entries = []
        for (x, y), d in zip(chain.pixels, disps):
            if d == INVALID_DISPARITY:
                continue
            if grad_r.horiz[y, x] == 0.0 and grad_r.vert[y, x] == 0.0:
                continue
            entries.append((x, y, float(d)))
        return entries

    collected = ordered_map(solve, chains, threads=threads)
    return WireDisparitySet(tuple(e for chunk in collected for e in chunk))


def merge_wire_disparities(dense: DisparityMap, wires: WireDisparitySet) -> DisparityMap:
    """Overwrite the dense map with wire estimates at their pixels.

    Wire values win unconditionally: dense windows inflate backgrounds over
    thin structures, so the sparse estimate is the trustworthy one there.
    """
    values = dense.values.copy()
    h, w = values.shape
    for x, y, d in wires.entries:
        if not (0 <= x < w and 0 <= y < h):
            raise ValidationError(f"wire entry ({x}, {y}) outside the {h}x{w} map")
        values[y, x] = d
    return DisparityMap(values)
