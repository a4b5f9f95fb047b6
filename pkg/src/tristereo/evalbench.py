"""Evaluation metrics and the synthetic-scene harness.

The metrics mirror the benchmark protocol the pipelines are judged by: the
percentage of bad disparity pixels (off by more than a tolerance from ground
truth, invalid counting as bad) and the percentage of detected wire pixels.

The scene generator renders camera triples by shifting seeded textures
according to the ground-truth disparity of each object, so every stage of the
system can be verified against exact, reproducible ground truth: textured
planes, repeating stripe patterns, thin wires at known disparity, and
"window" rectangles whose image content encodes a wrong (reflected) disparity
while a synthetic micropolarizer mosaic marks them high-DOLP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import formats
from .imgcore import INVALID_DISPARITY, DisparityMap, GrayImage, ValidationError
from .polar import PolarMosaic
from .wires import WireProbabilityMap

# ---------------------------------------------------------------------------
# metrics


def bad_pixel_pct(est: DisparityMap, truth: DisparityMap, tol: float = 2.0) -> float:
    """Percentage of truth-valid pixels where the estimate is invalid or off
    by more than tol."""
    if est.shape != truth.shape:
        raise ValidationError(f"estimate {est.shape} does not match truth {truth.shape}")
    truth_valid = truth.valid_mask()
    total = int(truth_valid.sum())
    if total == 0:
        raise ValidationError("ground truth has no valid pixels")
    off = np.abs(est.values - truth.values) > tol
    bad = truth_valid & (~est.valid_mask() | off)
    return 100.0 * int(bad.sum()) / total


def wire_detection_pct(
    est: DisparityMap,
    wire_mask: np.ndarray,
    truth: DisparityMap,
    tol: float = 2.0,
) -> float:
    """Percentage of wire pixels detected by a disparity map.

    A wire pixel counts as detected when any pixel within its 1-px dilation
    (8-neighborhood) holds a valid estimate within tol of the wire pixel's
    ground truth; window-based methods inflate thin structures, so demanding
    an exact pixel match would undercount them.
    """
    wire_mask = np.asarray(wire_mask, dtype=bool)
    if wire_mask.shape != est.shape or truth.shape != est.shape:
        raise ValidationError("estimate, truth, and wire mask must share dimensions")
    total = int(wire_mask.sum())
    if total == 0:
        raise ValidationError("wire mask is empty")

    padded_vals = np.pad(est.values, 1, constant_values=INVALID_DISPARITY)
    hits = np.zeros(est.shape, dtype=bool)
    h, w = est.shape
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            vals = padded_vals[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
            hits |= (vals >= 0) & (np.abs(vals - truth.values) <= tol)
    hits &= truth.valid_mask()
    return 100.0 * int((hits & wire_mask).sum()) / total


def restrict_truth(truth: DisparityMap, mask: np.ndarray) -> DisparityMap:
    """Truth limited to mask: pixels outside become INVALID (excluded from metrics)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != truth.shape:
        raise ValidationError("mask does not match the truth map")
    return DisparityMap(np.where(mask, truth.values, INVALID_DISPARITY))


# ---------------------------------------------------------------------------
# deterministic textures


def _mix64(h: np.ndarray) -> np.ndarray:
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    return h


def _lattice01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic pseudo-random value in [0, 1) per integer lattice point."""
    seed_term = np.uint64((seed * 0x165667B19E3779F9) & 0xFFFFFFFFFFFFFFFF)
    h = (
        ix.astype(np.int64).astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        + iy.astype(np.int64).astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        + seed_term
    )
    return (_mix64(h) >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(xs: np.ndarray, ys: np.ndarray, seed: int, cell: float = 8.0) -> np.ndarray:
    """Smoothly interpolated lattice noise in [0, 1), defined at any global
    coordinate (including negatives), so shifted samplings stay consistent."""
    gx = np.asarray(xs, dtype=np.float64) / cell
    gy = np.asarray(ys, dtype=np.float64) / cell
    ix = np.floor(gx)
    iy = np.floor(gy)
    fx = gx - ix
    fy = gy - iy
    sx = fx * fx * (3.0 - 2.0 * fx)
    sy = fy * fy * (3.0 - 2.0 * fy)
    v00 = _lattice01(ix, iy, seed)
    v10 = _lattice01(ix + 1, iy, seed)
    v01 = _lattice01(ix, iy + 1, seed)
    v11 = _lattice01(ix + 1, iy + 1, seed)
    top = v00 + (v10 - v00) * sx
    bot = v01 + (v11 - v01) * sx
    return top + (bot - top) * sy


_TEXTURE_KINDS = {"constant", "noise", "hstripes", "vstripes", "dots"}


def sparse_dots(
    xs: np.ndarray, ys: np.ndarray, seed: int, pitch: float = 24.0, size: int = 2
) -> np.ndarray:
    """Unit impulse field: one size x size dot per pitch x pitch cell at a
    hashed position. Sparse enough that most small matching windows see none
    of them while large (coarse) windows always do. Scale by a negative
    amplitude for dark dots, which every census window containing them can
    see (the transform only encodes darker-than-center neighbors)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    out = np.zeros(np.broadcast(xs, ys).shape, dtype=np.float64)
    span = max(int(pitch) - size, 1)
    # a dot may straddle a cell border into the next cell, so check 2x2 cells
    for cdx in (0, -1):
        for cdy in (0, -1):
            cx = np.floor(xs / pitch) + cdx
            cy = np.floor(ys / pitch) + cdy
            ox = np.floor(_lattice01(cx, cy, seed) * span)
            oy = np.floor(_lattice01(cx, cy, seed + 1) * span)
            dot_x = cx * pitch + ox
            dot_y = cy * pitch + oy
            hit = (xs >= dot_x) & (xs < dot_x + size) & (ys >= dot_y) & (ys < dot_y + size)
            out = np.where(hit, 1.0, out)
    return out


def texture_field(components, xs: np.ndarray, ys: np.ndarray, seed: int) -> np.ndarray:
    """Evaluate a texture (list of additive components) at global coordinates.

    Components: {"kind": "constant", "value": v} |
    {"kind": "noise", "amplitude": a, "cell": c} (zero-mean value noise) |
    {"kind": "hstripes"/"vstripes", "amplitude": a, "period": p, "phase": 0} |
    {"kind": "dots", "amplitude": a, "pitch": p, "size": s} (sparse impulses).
    """
    if isinstance(components, dict):
        components = [components]
    out = np.zeros(np.broadcast(xs, ys).shape, dtype=np.float64)
    for i, comp in enumerate(components):
        kind = comp.get("kind")
        if kind not in _TEXTURE_KINDS:
            raise ValidationError(f"unknown texture kind {kind!r}")
        if kind == "constant":
            out += float(comp["value"])
        elif kind == "noise":
            amp = float(comp["amplitude"])
            cell = float(comp.get("cell", 8.0))
            out += amp * (2.0 * value_noise(xs, ys, seed + 7919 * i, cell) - 1.0)
        elif kind == "dots":
            amp = float(comp["amplitude"])
            pitch = float(comp.get("pitch", 24.0))
            size = int(comp.get("size", 2))
            out += amp * sparse_dots(xs, ys, seed + 104729 * i, pitch, size)
        else:
            amp = float(comp["amplitude"])
            period = float(comp["period"])
            phase = float(comp.get("phase", 0.0))
            coord = ys if kind == "hstripes" else xs
            out += amp * np.sin(2.0 * np.pi * (np.asarray(coord, dtype=np.float64) + phase) / period)
    return out


# ---------------------------------------------------------------------------
# scene description


@dataclass(frozen=True)
class PlaneSpec:
    """Fronto-parallel textured rectangle at a fixed integer disparity."""

    rect: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)
    disparity: int
    texture: tuple = (({"kind": "constant", "value": 128}),)


@dataclass(frozen=True)
class WireSpec:
    """Thin constant-intensity segment; horizontal wires run along a row."""

    orientation: str  # "horizontal" | "vertical"
    position: int  # row for horizontal, column for vertical
    start: int
    stop: int
    disparity: int
    thickness: int = 1
    intensity: int = 20


@dataclass(frozen=True)
class SpecularSpec:
    """Window-like rectangle: truth is the surface disparity but the rendered
    content is consistent at the (wrong) reflected disparity; the mosaic marks
    the region with the given DOLP."""

    rect: tuple[int, int, int, int]
    surface_disparity: int
    reflected_disparity: int
    texture: tuple
    dolp: float = 0.85


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    seed: int
    num_disparities: int
    trinocular: bool = True
    planes: tuple = ()
    wires: tuple = ()
    speculars: tuple = ()
    wire_prob_dilation: int = 3

    @staticmethod
    def from_dict(data: dict) -> "SceneSpec":
        def tup(items, cls):
            return tuple(cls(**item) for item in items)

        try:
            return SceneSpec(
                width=int(data["width"]),
                height=int(data["height"]),
                seed=int(data["seed"]),
                num_disparities=int(data["num_disparities"]),
                trinocular=bool(data.get("trinocular", True)),
                planes=tup(data.get("planes", []), _plane_from_dict),
                wires=tup(data.get("wires", []), WireSpec),
                speculars=tup(data.get("speculars", []), _specular_from_dict),
                wire_prob_dilation=int(data.get("wire_prob_dilation", 3)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed scene spec: {exc}") from exc


def _plane_from_dict(**item) -> PlaneSpec:
    return PlaneSpec(
        rect=tuple(item["rect"]),
        disparity=item["disparity"],
        texture=tuple(item.get("texture", [{"kind": "constant", "value": 128}])),
    )


def _specular_from_dict(**item) -> SpecularSpec:
    return SpecularSpec(
        rect=tuple(item["rect"]),
        surface_disparity=item["surface_disparity"],
        reflected_disparity=item["reflected_disparity"],
        texture=tuple(item["texture"]),
        dolp=float(item.get("dolp", 0.85)),
    )


def _validate_spec(spec: SceneSpec) -> None:
    if spec.width < 1 or spec.height < 1:
        raise ValidationError("scene dimensions must be >= 1")
    if spec.num_disparities < 2:
        raise ValidationError("num_disparities must be >= 2")

    def check_disp(d, what):
        if not (0 <= d < spec.num_disparities):
            raise ValidationError(f"{what} disparity {d} outside [0, {spec.num_disparities})")

    def check_rect(rect, what):
        x0, y0, x1, y1 = rect
        if not (0 <= x0 < x1 <= spec.width and 0 <= y0 < y1 <= spec.height):
            raise ValidationError(f"{what} rect {rect} outside the {spec.height}x{spec.width} scene")

    for plane in spec.planes:
        check_rect(plane.rect, "plane")
        check_disp(plane.disparity, "plane")
    for wire in spec.wires:
        if wire.orientation not in ("horizontal", "vertical"):
            raise ValidationError(f"wire orientation must be horizontal/vertical, got {wire.orientation!r}")
        if wire.thickness not in (1, 2):
            raise ValidationError("wires must be 1-2 px thick")
        check_disp(wire.disparity, "wire")
        limit = spec.height if wire.orientation == "horizontal" else spec.width
        span = spec.width if wire.orientation == "horizontal" else spec.height
        if not (0 <= wire.position < limit and 0 <= wire.start < wire.stop <= span):
            raise ValidationError(f"wire segment {wire} outside the scene")
    for spec_rect in spec.speculars:
        check_rect(spec_rect.rect, "specular")
        check_disp(spec_rect.surface_disparity, "specular surface")
        check_disp(spec_rect.reflected_disparity, "specular reflected")
        if not (0.0 < spec_rect.dolp <= 1.0):
            raise ValidationError("specular dolp must lie in (0, 1]")


# ---------------------------------------------------------------------------
# scene rendering


@dataclass
class SceneBundle:
    """A rendered scene: camera triple, optional polar/wire rasters, ground truth.

    left_disparity / top_disparity are render-time depth buffers kept for the
    consistency audit; they are not persisted.
    """

    right: GrayImage
    left: GrayImage
    top: GrayImage
    truth: DisparityMap
    wire_mask: np.ndarray
    specular_mask: np.ndarray
    manifest: dict
    mosaic: PolarMosaic | None = None
    wire_prob: WireProbabilityMap | None = None
    left_disparity: np.ndarray | None = None
    top_disparity: np.ndarray | None = None


@dataclass(frozen=True)
class _Paintable:
    order: int  # painter order key: true (surface) disparity
    truth_disparity: int
    content_disparity: int
    region: np.ndarray  # boolean mask in the base frame
    texture: tuple
    seed: int
    is_wire: bool = False
    is_specular: bool = False
    dolp: float = 0.0


def _rect_mask(shape, rect) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    x0, y0, x1, y1 = rect
    mask[y0:y1, x0:x1] = True
    return mask


def _wire_mask(shape, wire: WireSpec) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    if wire.orientation == "horizontal":
        mask[wire.position : wire.position + wire.thickness, wire.start : wire.stop] = True
    else:
        mask[wire.start : wire.stop, wire.position : wire.position + wire.thickness] = True
    return mask


def generate_scene(spec: SceneSpec) -> SceneBundle:
    """Render a SceneBundle from a scene description.

    Objects paint far-to-near. The right image holds each object's texture in
    place; the left image holds it shifted right by the object's disparity and
    the top image shifted down (so the base pixel (x, y) matches left
    (x + d, y) and top (x, y + d)). Specular rectangles shift their aperture
    by the surface disparity but sample their content at the reflected
    disparity, and the mosaic marks them high-DOLP.

    Ground truth is invalidated where the matching search band leaves the
    frame (rightmost columns, plus the bottom rows of trinocular scenes).
    """
    _validate_spec(spec)
    h, w, num_d = spec.height, spec.width, spec.num_disparities
    shape = (h, w)

    right = np.full(shape, 128.0)
    left = np.full(shape, 128.0)
    top = np.full(shape, 128.0)
    truth = np.full(shape, INVALID_DISPARITY)
    left_disp = np.full(shape, INVALID_DISPARITY)
    top_disp = np.full(shape, INVALID_DISPARITY)
    wire_mask = np.zeros(shape, dtype=bool)
    specular_mask = np.zeros(shape, dtype=bool)
    dolp_field = np.zeros(shape)

    paintables: list[_Paintable] = []
    for i, plane in enumerate(spec.planes):
        paintables.append(
            _Paintable(
                order=plane.disparity,
                truth_disparity=plane.disparity,
                content_disparity=plane.disparity,
                region=_rect_mask(shape, plane.rect),
                texture=tuple(plane.texture),
                seed=spec.seed * 1000003 + i,
            )
        )
    for i, spc in enumerate(spec.speculars):
        paintables.append(
            _Paintable(
                order=spc.surface_disparity,
                truth_disparity=spc.surface_disparity,
                content_disparity=spc.reflected_disparity,
                region=_rect_mask(shape, spc.rect),
                texture=tuple(spc.texture),
                seed=spec.seed * 1000033 + i,
                is_specular=True,
                dolp=spc.dolp,
            )
        )
    for i, wire in enumerate(spec.wires):
        paintables.append(
            _Paintable(
                order=wire.disparity,
                truth_disparity=wire.disparity,
                content_disparity=wire.disparity,
                region=_wire_mask(shape, wire),
                texture=({"kind": "constant", "value": wire.intensity},),
                seed=spec.seed * 1000211 + i,
                is_wire=True,
            )
        )
    paintables.sort(key=lambda p: p.order)

    for obj in paintables:
        ys, xs = np.nonzero(obj.region)
        d_true, d_content = obj.truth_disparity, obj.content_disparity

        right[ys, xs] = texture_field(obj.texture, xs, ys, obj.seed)
        truth[ys, xs] = d_true
        if obj.is_wire:
            wire_mask[ys, xs] = True
        if obj.is_specular:
            specular_mask[ys, xs] = True
            dolp_field[ys, xs] = obj.dolp

        ul = xs + d_true
        ok = ul < w
        left[ys[ok], ul[ok]] = texture_field(obj.texture, ul[ok] - d_content, ys[ok], obj.seed)
        left_disp[ys[ok], ul[ok]] = d_true

        vt = ys + d_true
        ok = vt < h
        top[vt[ok], xs[ok]] = texture_field(obj.texture, xs[ok], vt[ok] - d_content, obj.seed)
        top_disp[vt[ok], xs[ok]] = d_true

    # The rightmost search band (and bottom band for trinocular rigs) cannot
    # be evaluated fairly: the matcher's window leaves the frame there.
    if num_d > 1:
        truth[:, w - num_d + 1 :] = INVALID_DISPARITY
        if spec.trinocular:
            truth[h - num_d + 1 :, :] = INVALID_DISPARITY

    def quantize(img: np.ndarray) -> GrayImage:
        return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))

    right_img, left_img, top_img = quantize(right), quantize(left), quantize(top)

    wire_prob = None
    if spec.wires:
        prob = ndimage.binary_dilation(
            wire_mask, structure=np.ones((3, 3), dtype=bool), iterations=spec.wire_prob_dilation
        )
        wire_prob = WireProbabilityMap(prob.astype(np.float64))

    mosaic = None
    if spec.speculars:
        mosaic = _render_mosaic(right_img.pixels.astype(np.float64), dolp_field)

    manifest = {
        "width": w,
        "height": h,
        "seed": spec.seed,
        "num_disparities": num_d,
        "trinocular": spec.trinocular,
    }
    return SceneBundle(
        right=right_img,
        left=left_img,
        top=top_img,
        truth=DisparityMap(truth),
        wire_mask=wire_mask,
        specular_mask=specular_mask,
        manifest=manifest,
        mosaic=mosaic,
        wire_prob=wire_prob,
        left_disparity=left_disp,
        top_disparity=top_disp,
    )


def _render_mosaic(intensity: np.ndarray, dolp: np.ndarray) -> PolarMosaic:
    """Malus-law mosaic for per-pixel total intensity and DOLP at AOP 0."""
    i0 = intensity * (1.0 + dolp) / 2.0
    i90 = intensity * (1.0 - dolp) / 2.0
    i45 = intensity / 2.0
    i135 = intensity / 2.0
    h, w = intensity.shape
    mosaic = np.zeros((2 * h, 2 * w))
    mosaic[0::2, 0::2] = i0
    mosaic[0::2, 1::2] = i45
    mosaic[1::2, 0::2] = i135
    mosaic[1::2, 1::2] = i90
    return PolarMosaic(np.clip(np.rint(mosaic), 0, 255).astype(np.uint8))


def audit_scene(bundle: SceneBundle) -> dict:
    """Verify that every rendered shift matches the ground truth.

    For every truth-valid, non-specular pixel whose shifted location is in
    frame and not occluded by a nearer object, the left (and top, for
    trinocular scenes) image must repeat the base pixel exactly. Raises
    ValidationError on any mismatch; returns the number of audited pixels.
    """
    if bundle.left_disparity is None or bundle.top_disparity is None:
        raise ValidationError("bundle lacks render-time buffers; audit only freshly generated scenes")
    truth = bundle.truth.values
    right = bundle.right.pixels
    h, w = right.shape
    ys, xs = np.nonzero((truth >= 0) & ~bundle.specular_mask)
    ds = truth[ys, xs].astype(np.int64)

    ul = xs + ds
    ok = (ul < w) & (bundle.left_disparity[ys, np.minimum(ul, w - 1)] == ds)
    if not np.array_equal(bundle.left.pixels[ys[ok], ul[ok]], right[ys[ok], xs[ok]]):
        raise ValidationError("left image does not match the ground-truth shift")
    checked = {"horizontal": int(ok.sum())}

    if bundle.manifest.get("trinocular", True):
        vt = ys + ds
        ok = (vt < h) & (bundle.top_disparity[np.minimum(vt, h - 1), xs] == ds)
        if not np.array_equal(bundle.top.pixels[vt[ok], xs[ok]], right[ys[ok], xs[ok]]):
            raise ValidationError("top image does not match the ground-truth shift")
        checked["vertical"] = int(ok.sum())
    return checked


# ---------------------------------------------------------------------------
# persistence


def save_bundle(bundle: SceneBundle, directory) -> None:
    """Persist a bundle as the documented directory layout."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    formats.write_pgm(bundle.right, directory / "right.pgm")
    formats.write_pgm(bundle.left, directory / "left.pgm")
    formats.write_pgm(bundle.top, directory / "top.pgm")
    formats.write_disparity_pfm(bundle.truth, directory / "truth.pfm")
    formats.write_mask_pgm(bundle.wire_mask, directory / "wiremask.pgm")
    formats.write_mask_pgm(bundle.specular_mask, directory / "specmask.pgm")
    if bundle.mosaic is not None:
        formats.write_pgm(GrayImage(bundle.mosaic.data), directory / "mosaic.pgm")
    if bundle.wire_prob is not None:
        prob = np.clip(np.rint(bundle.wire_prob.prob * 255.0), 0, 255).astype(np.uint8)
        formats.write_pgm(GrayImage(prob), directory / "wires.pgm")
    manifest = json.dumps(bundle.manifest, indent=2, sort_keys=True) + "\n"
    (directory / "manifest.json").write_text(manifest)


def load_bundle(directory) -> SceneBundle:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    mosaic = None
    if (directory / "mosaic.pgm").exists():
        mosaic = PolarMosaic(formats.read_pgm(directory / "mosaic.pgm").pixels)
    wire_prob = None
    if (directory / "wires.pgm").exists():
        wire_prob = WireProbabilityMap.from_image(formats.read_pgm(directory / "wires.pgm"))
    return SceneBundle(
        right=formats.read_pgm(directory / "right.pgm"),
        left=formats.read_pgm(directory / "left.pgm"),
        top=formats.read_pgm(directory / "top.pgm"),
        truth=formats.read_disparity_pfm(directory / "truth.pfm"),
        wire_mask=formats.read_mask_pgm(directory / "wiremask.pgm"),
        specular_mask=formats.read_mask_pgm(directory / "specmask.pgm"),
        manifest=manifest,
        mosaic=mosaic,
        wire_prob=wire_prob,
    )
