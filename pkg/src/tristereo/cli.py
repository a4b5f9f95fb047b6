"""Command-line interface and pipeline orchestration.

Subcommands: stereo, trinocular, wires, polar, eval, synth. All rasters
travel as PGM (images, masks) or PFM (float maps); metrics and manifests are
JSON. Every numeric knob can come from a JSON config file (--config or the
TRISTEREO_CONFIG environment variable) with command-line flags winning.

Exit codes: 0 success, 1 usage, 2 I/O, 3 dimension/validation. Failures emit
one machine-readable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import formats
from .disparity import binocular_pipeline
from .evalbench import (
    SceneSpec,
    bad_pixel_pct,
    generate_scene,
    save_bundle,
    wire_detection_pct,
)
from .imgcore import GrayImage, PipelineConfig, ValidationError
from .polar import PolarMosaic, decode_mosaic, plane_fill, resize_nearest, segment_dolp
from .trinocular import trinocular_pipeline
from .wires import WireProbabilityMap, merge_wire_disparities, wire_disparities

CONFIG_ENV_VAR = "TRISTEREO_CONFIG"

_CONFIG_KEYS = (
    "window_radius",
    "num_disparities",
    "max_scale",
    "sgm_p1",
    "sgm_p2",
    "uniqueness_ratio",
    "dolp_threshold",
    "wire_prob_threshold",
)
_EXTRA_KEYS = ("canny_low", "canny_high", "min_specular_area", "baseline_ratio", "threads")
_EXTRA_DEFAULTS = {
    "canny_low": 20.0,
    "canny_high": 60.0,
    "min_specular_area": 50,
    "baseline_ratio": 1.0,
    "threads": 1,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that for I/O
        raise _UsageError(message)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--window-radius", type=int, dest="window_radius")
    p.add_argument("--num-disparities", type=int, dest="num_disparities")
    p.add_argument("--max-scale", type=int, dest="max_scale")
    p.add_argument("--p1", type=float, dest="sgm_p1")
    p.add_argument("--p2", type=float, dest="sgm_p2")
    p.add_argument("--uniqueness-ratio", type=float, dest="uniqueness_ratio")
    p.add_argument("--dolp-threshold", type=float, dest="dolp_threshold")
    p.add_argument("--wire-prob-threshold", type=float, dest="wire_prob_threshold")
    p.add_argument("--canny-low", type=float, dest="canny_low")
    p.add_argument("--canny-high", type=float, dest="canny_high")
    p.add_argument("--min-specular-area", type=int, dest="min_specular_area")
    p.add_argument("--baseline-ratio", type=float, dest="baseline_ratio")
    p.add_argument("--threads", type=int, dest="threads")
    p.add_argument(
        "--no-uniqueness",
        action="store_true",
        help="skip the uniqueness filter (unrefined output, for comparisons)",
    )


def _effective_config(args) -> tuple[PipelineConfig, dict]:
    """Merge defaults, the JSON config file, and explicit flags (flags win)."""
    merged = dict(_EXTRA_DEFAULTS)
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if path:
        loaded = json.loads(Path(path).read_text())
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(loaded) - set(_CONFIG_KEYS) - set(_EXTRA_KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in _CONFIG_KEYS + _EXTRA_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    cfg = PipelineConfig(**{k: merged[k] for k in _CONFIG_KEYS if k in merged})
    extras = {k: merged[k] for k in _EXTRA_KEYS}
    extras["apply_uniqueness"] = not getattr(args, "no_uniqueness", False)
    return cfg, extras


def _write_manifest(out_path: Path, command: str, cfg: PipelineConfig, extras: dict, inputs: dict) -> None:
    manifest = {
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "config": {
            **{k: getattr(cfg, k) for k in _CONFIG_KEYS},
            **{k: v for k, v in extras.items()},
        },
    }
    path = out_path.with_suffix(".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cmd_stereo(args) -> int:
    cfg, extras = _effective_config(args)
    right = formats.read_pgm(args.right)
    left = formats.read_pgm(args.left)
    disp = binocular_pipeline(
        left,
        right,
        cfg,
        apply_uniqueness=extras["apply_uniqueness"],
        threads=extras["threads"],
    )
    out = Path(args.output)
    formats.write_disparity_pfm(disp, out)
    _write_manifest(out, "stereo", cfg, extras, {"right": args.right, "left": args.left})
    return 0


def _cmd_trinocular(args) -> int:
    cfg, extras = _effective_config(args)
    right = formats.read_pgm(args.right)
    left = formats.read_pgm(args.left)
    top = formats.read_pgm(args.top)
    disp = trinocular_pipeline(
        right,
        left,
        top,
        cfg,
        apply_uniqueness=extras["apply_uniqueness"],
        baseline_ratio=extras["baseline_ratio"],
        threads=extras["threads"],
    )
    out = Path(args.output)
    formats.write_disparity_pfm(disp, out)
    _write_manifest(
        out, "trinocular", cfg, extras,
        {"right": args.right, "left": args.left, "top": args.top},
    )
    return 0


def _cmd_wires(args) -> int:
    cfg, extras = _effective_config(args)
    right = formats.read_pgm(args.right)
    left = formats.read_pgm(args.left)
    top = formats.read_pgm(args.top)
    prob = WireProbabilityMap.from_image(formats.read_pgm(args.wire_prob))

    dense = trinocular_pipeline(
        right,
        left,
        top,
        cfg,
        apply_uniqueness=extras["apply_uniqueness"],
        baseline_ratio=extras["baseline_ratio"],
        threads=extras["threads"],
    )
    wires = wire_disparities(
        right,
        left,
        top,
        prob,
        cfg,
        canny_low=extras["canny_low"],
        canny_high=extras["canny_high"],
        threads=extras["threads"],
    )
    merged = merge_wire_disparities(dense, wires)

    out = Path(args.output)
    formats.write_disparity_pfm(merged, out)
    csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
    lines = ["x,y,disparity"] + [f"{x},{y},{d:.6f}" for x, y, d in wires.entries]
    csv_path.write_text("\n".join(lines) + "\n")
    _write_manifest(
        out, "wires", cfg, extras,
        {"right": args.right, "left": args.left, "top": args.top, "wire_prob": args.wire_prob},
    )
    return 0


def _cmd_polar(args) -> int:
    cfg, extras = _effective_config(args)
    right = formats.read_pgm(args.right)
    left = formats.read_pgm(args.left)
    mosaic = PolarMosaic(formats.read_pgm(args.mosaic).pixels)

    if args.top:
        top = formats.read_pgm(args.top)
        dense = trinocular_pipeline(
            right,
            left,
            top,
            cfg,
            apply_uniqueness=extras["apply_uniqueness"],
            baseline_ratio=extras["baseline_ratio"],
            threads=extras["threads"],
        )
    else:
        dense = binocular_pipeline(
            left, right, cfg,
            apply_uniqueness=extras["apply_uniqueness"], threads=extras["threads"],
        )

    channels = decode_mosaic(mosaic)
    dolp, aop = channels.dolp, channels.aop
    if dolp.shape != dense.shape:
        # register the polar grid to the disparity grid
        dolp = resize_nearest(dolp, dense.shape)
        aop = resize_nearest(aop, dense.shape)

    regions = segment_dolp(dolp, cfg.dolp_threshold, extras["min_specular_area"])
    filled, fits = plane_fill(dense, regions, max_disparity=cfg.num_disparities - 1)

    out = Path(args.output)
    formats.write_disparity_pfm(filled, out)
    formats.write_pfm(dolp, args.dolp_out or out.with_name(out.stem + "_dolp.pfm"))
    formats.write_pfm(aop, args.aop_out or out.with_name(out.stem + "_aop.pfm"))
    _write_manifest(
        out, "polar", cfg, extras,
        {"right": args.right, "left": args.left, "top": args.top or "", "mosaic": args.mosaic},
    )
    skipped = [f.region_index for f in fits if not f.filled]
    if skipped:
        print(json.dumps({"skipped_regions": skipped, "reason": "unfittable ring"}))
    return 0


def _cmd_eval(args) -> int:
    est = formats.read_disparity_pfm(args.estimate)
    truth = formats.read_disparity_pfm(args.truth)
    metrics = {"bad_pixel_pct": bad_pixel_pct(est, truth, tol=args.tol)}
    if args.wire_mask:
        mask = formats.read_mask_pgm(args.wire_mask)
        metrics["wire_detection_pct"] = wire_detection_pct(est, mask, truth, tol=args.tol)
    payload = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(payload)
    if args.output:
        Path(args.output).write_text(payload)
    return 0


def _cmd_synth(args) -> int:
    spec = SceneSpec.from_dict(json.loads(Path(args.spec).read_text()))
    bundle = generate_scene(spec)
    save_bundle(bundle, args.outdir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tristereo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stereo", help="binocular disparity from a rectified pair")
    p.add_argument("right")
    p.add_argument("left")
    p.add_argument("-o", "--output", required=True, help="output disparity PFM")
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_stereo)

    p = sub.add_parser("trinocular", help="gradient-weighted trinocular disparity")
    p.add_argument("right")
    p.add_argument("left")
    p.add_argument("top")
    p.add_argument("-o", "--output", required=True)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_trinocular)

    p = sub.add_parser("wires", help="trinocular disparity merged with semantic wire estimates")
    p.add_argument("right")
    p.add_argument("left")
    p.add_argument("top")
    p.add_argument("--wire-prob", required=True, help="wire probability PGM (value/255)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--csv", help="wire disparity CSV (default: alongside the PFM)")
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_wires)

    p = sub.add_parser("polar", help="disparity with specular regions filled from DOLP")
    p.add_argument("right")
    p.add_argument("left")
    p.add_argument("--top", help="optional top image for a trinocular dense pass")
    p.add_argument("--mosaic", required=True, help="micropolarizer mosaic PGM")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--dolp-out")
    p.add_argument("--aop-out")
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_polar)

    p = sub.add_parser("eval", help="bad-pixel and wire-detection metrics")
    p.add_argument("estimate")
    p.add_argument("truth")
    p.add_argument("--wire-mask")
    p.add_argument("--tol", type=float, default=2.0)
    p.add_argument("-o", "--output", help="also write the metrics JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic scene bundle")
    p.add_argument("spec", help="scene description JSON")
    p.add_argument("outdir")
    p.set_defaults(func=_cmd_synth)

    return parser


def _fail(code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"exit_code": code, "error": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail(1, str(exc))
    try:
        return args.func(args)
    except ValidationError as exc:
        return _fail(3, str(exc))
    except json.JSONDecodeError as exc:
        return _fail(3, f"malformed JSON: {exc}")
    except formats.FileFormatError as exc:
        return _fail(2, str(exc))
    except OSError as exc:
        return _fail(2, str(exc))


def entry() -> None:
    sys.exit(main())
