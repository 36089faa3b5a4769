"""Grayscale slice loading, bilinear resizing and min-max normalization.

Images are plain 2-D float64 arrays of shape (height, width).
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

WORKING_SIZE = 256
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for files that are neither PGM (P2/P5) nor PNG."""

    def __init__(self, fmt: str, path: str | os.PathLike = ""):
        self.format = fmt
        super().__init__(f"unsupported image format {fmt!r}" + (f" in {path}" if path else ""))


def _pgm_tokens(data: bytes, count: int, pos: int) -> tuple[list[int], int]:
    """Read `count` whitespace separated integers, skipping '#' comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("PGM (truncated header)")
        out.append(int(data[start:pos]))
    return out, pos


def _decode_pgm(data: bytes, path) -> np.ndarray:
    magic = data[:2]
    (width, height, maxval), pos = _pgm_tokens(data, 3, 2)
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"PGM (bad size {width}x{height})", path)
    if not 0 < maxval <= 65535:
        raise ImageFormatError(f"PGM (maxval {maxval})", path)
    npix = width * height
    if magic == b"P2":
        values, _ = _pgm_tokens(data, npix, pos)
        raw = np.array(values, dtype=np.float64)
    else:
        # exactly one whitespace byte separates the header from the raster
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        nbytes = npix * dtype.itemsize
        if len(data) - pos < nbytes:
            raise ImageFormatError("PGM (truncated raster)", path)
        raw = np.frombuffer(data, dtype=dtype, count=npix, offset=pos).astype(np.float64)
    return raw.reshape(height, width) / maxval


def _decode_png(path) -> np.ndarray:
    with Image.open(path) as im:
        im.load()
        mode = im.mode
        if mode == "P":
            im = im.convert("RGBA" if "transparency" in im.info else "RGB")
            mode = im.mode
        arr = np.asarray(im)
    if mode in ("1",):
        return arr.astype(np.float64)
    if mode in ("L", "LA"):
        gray = arr[..., 0] if arr.ndim == 3 else arr
        return gray.astype(np.float64) / 255.0
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        # Pillow exposes 16-bit grayscale PNGs in these modes
        return arr.astype(np.float64) / 65535.0
    if mode in ("RGB", "RGBA"):
        rgb = arr[..., :3].astype(np.float64) / 255.0
        return rgb @ LUMA_WEIGHTS
    raise ImageFormatError(f"PNG mode {mode}", path)


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PGM (P2/P5) or PNG slice as a float image in [0, 1].

    Values are divided by the format's maximum value; colour PNGs are reduced
    to ITU-R 601 luminance.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return _decode_pgm(data, path)
    if data[:8] == _PNG_SIGNATURE:
        return _decode_png(path)
    if data[:1] == b"P" and data[1:2].isdigit():
        raise ImageFormatError(f"netpbm P{data[1:2].decode()}", path)
    raise ImageFormatError(path.suffix.lstrip(".").upper() or "unknown", path)


def save_pgm(path: str | os.PathLike, img: np.ndarray, maxval: int = 255) -> None:
    """Write a binary (P5) PGM; values are clipped to [0, 1] and quantized."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.astype(dtype).tobytes())


def _source_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resampling with pixel-centre alignment."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be positive, got {out_w}x{out_h}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    y0, y1, wy = _source_coords(out_h, h)
    x0, x1, wx = _source_coords(out_w, w)
    wy = wy[:, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bottom = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bottom * wy


def normalize_minmax(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    out = (img - lo) / (hi - lo)
    # guard the endpoints against round-off so the range is exactly [0, 1]
    out[img == lo] = 0.0
    out[img == hi] = 1.0
    return out


def preprocess(img: np.ndarray, size: int = WORKING_SIZE) -> np.ndarray:
    """Resize to size x size, then normalize to [0, 1]."""
    return normalize_minmax(resize_bilinear(img, size, size))


def load_slice(path: str | os.PathLike, size: int = WORKING_SIZE) -> np.ndarray:
    return preprocess(load_image(path), size)
