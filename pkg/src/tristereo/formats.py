"""Binary PGM (P5) and PFM raster I/O.

All float rasters travel as single-channel little-endian PFM with scale
header -1.0; disparity maps serialize INVALID as -1.0. Everything here is
deterministic and byte-exact so artifacts can be compared bitwise.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imgcore import INVALID_DISPARITY, DisparityMap, GrayImage


class FileFormatError(ValueError):
    """Raised when a file does not parse as the expected raster format."""


def _read_token(stream) -> bytes:
    """Next whitespace-delimited PNM header token, skipping # comments."""
    token = b""
    while True:
        ch = stream.read(1)
        if ch == b"":
            raise FileFormatError("unexpected end of header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = stream.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        magic = _read_token(fh)
        if magic != b"P5":
            raise FileFormatError(f"expected binary PGM magic P5, got {magic!r}")
        width = int(_read_token(fh))
        height = int(_read_token(fh))
        maxval = int(_read_token(fh))
        if maxval != 255:
            raise FileFormatError(f"only maxval 255 is supported, got {maxval}")
        raw = fh.read(width * height)
    if len(raw) != width * height:
        raise FileFormatError(f"truncated PGM payload: {len(raw)} of {width * height} bytes")
    return GrayImage(np.frombuffer(raw, dtype=np.uint8).reshape(height, width))


def write_pgm(img: GrayImage, path) -> None:
    path = Path(path)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    path.write_bytes(header + img.pixels.tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM into a float64 array (top-to-bottom rows)."""
    with open(path, "rb") as fh:
        magic = _read_token(fh)
        if magic == b"PF":
            raise FileFormatError("color PFM is not supported, expected single-channel Pf")
        if magic != b"Pf":
            raise FileFormatError(f"expected PFM magic Pf, got {magic!r}")
        width = int(_read_token(fh))
        height = int(_read_token(fh))
        scale = float(_read_token(fh))
        raw = fh.read(width * height * 4)
    if len(raw) != width * height * 4:
        raise FileFormatError(f"truncated PFM payload: {len(raw)} of {width * height * 4} bytes")
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    # PFM stores scanlines bottom-to-top
    return np.flipud(data).astype(np.float64)


def write_pfm(values: np.ndarray, path) -> None:
    """Write a 2-D float array as little-endian single-channel PFM."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise FileFormatError(f"PFM payload must be 2-D, got shape {values.shape}")
    height, width = values.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    payload = np.flipud(values).astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_disparity_pfm(path) -> DisparityMap:
    """Read a disparity PFM, mapping every negative value to INVALID."""
    values = read_pfm(path)
    values[values < 0] = INVALID_DISPARITY
    return DisparityMap(values)


def write_disparity_pfm(disp: DisparityMap, path) -> None:
    values = disp.values.copy()
    values[~disp.valid_mask()] = INVALID_DISPARITY
    write_pfm(values, path)


def read_mask_pgm(path) -> np.ndarray:
    """Read a PGM as a boolean mask (nonzero means set)."""
    return read_pgm(path).pixels > 0


def write_mask_pgm(mask: np.ndarray, path) -> None:
    write_pgm(GrayImage(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)), path)
