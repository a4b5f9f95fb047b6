"""Semi-global matching: smoothness-penalized cost aggregation along 1-D paths.

Along each path the running cost is

    L(p, d) = C(p, d) + min(L(q, d),
                            L(q, d-1) + p1, L(q, d+1) + p1,
                            min_k L(q, k) + p2) - min_k L(q, k)

with q the previous pixel on the path and L = C at path starts. The final
volume is the sum over all path directions. The min_k subtraction keeps L
bounded by max(C) + p2 so long paths cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import CostVolume, ValidationError
from .parallel import ordered_map

DEFAULT_DIRECTIONS: tuple[tuple[int, int], ...] = (
    (0, 1),
    (0, -1),
    (1, 0),
    (-1, 0),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
)


@dataclass(frozen=True)
class PathSet:
    """Aggregation directions as (drow, dcol) steps; default 8 paths."""

    directions: tuple[tuple[int, int], ...] = DEFAULT_DIRECTIONS

    def __post_init__(self):
        dirs = tuple((int(dr), int(dc)) for dr, dc in self.directions)
        if not dirs:
            raise ValidationError("path set must contain at least one direction")
        if any(d == (0, 0) for d in dirs):
            raise ValidationError("path direction (0, 0) is not allowed")
        if len(set(dirs)) != len(dirs):
            raise ValidationError("duplicate path directions")
        object.__setattr__(self, "directions", dirs)

    def __len__(self) -> int:
        return len(self.directions)


def _step(cur: np.ndarray, prev: np.ndarray, p1: float, p2: float) -> np.ndarray:
    """One DP transition for a front of pixels; cur/prev are (N, D)."""
    prev_min = prev.min(axis=1, keepdims=True)
    best = np.minimum(prev, prev_min + p2)
    np.minimum(best[:, 1:], prev[:, :-1] + p1, out=best[:, 1:])
    np.minimum(best[:, :-1], prev[:, 1:] + p1, out=best[:, :-1])
    return cur + best - prev_min


def _aggregate_direction(costs: np.ndarray, p1: float, p2: float, dr: int, dc: int) -> np.ndarray:
    h, w, _ = costs.shape
    out = np.empty_like(costs)

    if dr != 0:
        rows = range(h) if dr > 0 else range(h - 1, -1, -1)
        for r in rows:
            pr = r - dr
            if pr < 0 or pr >= h:
                out[r] = costs[r]
                continue
            if dc == 0:
                out[r] = _step(costs[r], out[pr], p1, p2)
            elif dc > 0:
                out[r, :dc] = costs[r, :dc]
                out[r, dc:] = _step(costs[r, dc:], out[pr, :-dc], p1, p2)
            else:
                k = -dc
                out[r, w - k :] = costs[r, w - k :]
                out[r, : w - k] = _step(costs[r, : w - k], out[pr, k:], p1, p2)
    else:
        cols = range(w) if dc > 0 else range(w - 1, -1, -1)
        for c in cols:
            pc = c - dc
            if pc < 0 or pc >= w:
                out[:, c] = costs[:, c]
            else:
                out[:, c] = _step(costs[:, c], out[:, pc], p1, p2)
    return out


def sgm_aggregate(
    vol: CostVolume,
    p1: float,
    p2: float,
    paths: PathSet = PathSet(),
    threads: int = 1,
) -> CostVolume:
    """Sum the per-direction path costs over the whole volume.

    Directions aggregate independently into private buffers which are summed
    in PathSet order, so results do not depend on the worker count.
    """
    if p1 < 0 or p2 < 0:
        raise ValidationError("penalties must be non-negative")
    if p1 > p2:
        raise ValidationError(f"penalty ordering violated: p1={p1} > p2={p2}")

    costs = vol.costs
    buffers = ordered_map(
        lambda d: _aggregate_direction(costs, p1, p2, d[0], d[1]),
        paths.directions,
        threads=threads,
    )
    total = buffers[0]
    for buf in buffers[1:]:
        total = total + buf
    return CostVolume(total)
