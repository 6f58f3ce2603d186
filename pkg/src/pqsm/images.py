"""Minimal PPM/PGM image I/O for view dumps and external saliency maps.

Projection rasters are indexed ``[u, v]`` with v increasing upward; images
follow the usual row-major convention with row 0 at the top. The two helpers
``raster_to_image`` / ``image_to_raster`` convert between the conventions and
are exact inverses of each other.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError


def raster_to_image(raster: np.ndarray) -> np.ndarray:
    """(W, H[, C]) raster -> (H, W[, C]) image with row 0 at the top."""
    return np.swapaxes(raster, 0, 1)[::-1]


def image_to_raster(image: np.ndarray) -> np.ndarray:
    """Inverse of raster_to_image."""
    return np.swapaxes(image[::-1], 0, 1)


def write_ppm(path, image: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 image as binary PPM (P6)."""
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) image, got {image.shape}")
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def write_pgm16(path, values: np.ndarray) -> None:
    """Write an (H, W) array of values in [0, 1] as 16-bit binary PGM (P5).

    Values are scaled by 65535 and rounded; the format quantizes to 1/65535,
    so a round trip is exact only to ~7.7e-6 per pixel.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected 2-d array, got shape {values.shape}")
    if not np.isfinite(values).all() or values.min() < 0 or values.max() > 1:
        raise ValueError("pgm values must be finite and in [0, 1]")
    h, w = values.shape
    data = np.round(values * 65535.0).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def _read_tokens(fh, n):
    """Read `n` whitespace-separated header tokens, skipping '#' comments."""
    tokens = []
    while len(tokens) < n:
        line = fh.readline()
        if not line:
            raise ParseError("unexpected end of file in image header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    return tokens[:n]


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5, 8- or 16-bit) as float64 in [0, 1]."""
    with open(path, "rb") as fh:
        magic = fh.readline().split()
        if not magic or magic[0] != b"P5":
            raise ParseError(f"{path}: not a binary PGM (P5) file")
        w, h, maxval = (int(t) for t in _read_tokens(fh, 3))
        if w < 1 or h < 1 or not (0 < maxval < 65536):
            raise ParseError(f"{path}: bad PGM dimensions {w}x{h} maxval {maxval}")
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = fh.read(w * h * dtype.itemsize)
        if len(raw) < w * h * dtype.itemsize:
            raise ParseError(f"{path}: truncated PGM payload")
        data = np.frombuffer(raw, dtype=dtype).reshape(h, w)
    return data.astype(np.float64) / float(maxval)
