"""Minimal binary PPM (P6, maxval 255) codec.

Annotated-frame regression tests compare files byte for byte, so both
directions are implemented here instead of going through an image
library whose encoder details could drift between versions.
"""

from __future__ import annotations

import numpy as np

from .errors import DecodeError


def write_ppm(path, pixels: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as binary P6."""
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 pixels, got {pixels.shape} {pixels.dtype}")
    h, w = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 file into an (H, W, 3) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token() -> bytes:
        # whitespace-separated header tokens; '#' starts a comment to EOL
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DecodeError(f"{path}: truncated PPM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P6":
        raise DecodeError(f"{path}: not a P6 PPM (magic {magic!r})")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise DecodeError(f"{path}: malformed PPM header") from exc
    if width <= 0 or height <= 0:
        raise DecodeError(f"{path}: invalid PPM dimensions {width}x{height}")
    if maxval != 255:
        raise DecodeError(f"{path}: unsupported PPM maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    raster = data[pos : pos + expected]
    if len(raster) < expected:
        raise DecodeError(f"{path}: truncated PPM raster ({len(raster)} of {expected} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()
