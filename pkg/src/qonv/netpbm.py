"""Binary PPM (P6) and PGM (P5) image files, 8 bits per sample.

The round trip is bit exact for 8-bit data: saving a tensor quantizes to
0..255, and loading divides by 255. PNG is available as an optional extra
when Pillow is installed.
"""

from __future__ import annotations

import numpy as np

from .errors import ImageIOError

_MAXVAL = 255


def _read_token(buf: bytes, pos: int):
    # Skip whitespace and '#' comment lines between header tokens.
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated header")
    return buf[start:pos], pos


def load_image(path) -> np.ndarray:
    """Read an image file into a (3, H, W) float array in [0, 1]."""
    path = str(path)
    if path.lower().endswith(".png"):
        return _load_png(path)
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    try:
        magic, pos = _read_token(buf, 0)
        if magic not in (b"P5", b"P6"):
            raise ValueError(f"unsupported magic {magic!r}")
        width_tok, pos = _read_token(buf, pos)
        height_tok, pos = _read_token(buf, pos)
        maxval_tok, pos = _read_token(buf, pos)
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
        if maxval != _MAXVAL:
            raise ValueError(f"only maxval {_MAXVAL} is supported, got {maxval}")
        pos += 1  # single whitespace byte after the header
        channels = 3 if magic == b"P6" else 1
        count = width * height * channels
        raster = buf[pos:pos + count]
        if len(raster) != count:
            raise ValueError(
                f"raster holds {len(raster)} bytes, expected {count}"
            )
        pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
        pixels = pixels.reshape(height, width, channels) / _MAXVAL
    except ValueError as exc:
        raise ImageIOError(f"corrupt image {path}: {exc}") from exc
    img = pixels.transpose(2, 0, 1)
    if channels == 1:
        img = np.repeat(img, 3, axis=0)
    return img


def save_image(path, img: np.ndarray) -> None:
    """Write a (3, H, W) or (1, H, W) array in [0, 1] as binary PPM/PGM."""
    path = str(path)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ImageIOError(
            f"cannot save shape {img.shape}; expected (1|3, H, W)"
        )
    if path.lower().endswith(".png"):
        _save_png(path, img)
        return
    channels, height, width = img.shape
    magic = b"P6" if channels == 3 else b"P5"
    quantized = np.clip(np.rint(img * _MAXVAL), 0, _MAXVAL).astype(np.uint8)
    raster = quantized.transpose(1, 2, 0).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(magic + b"\n%d %d\n%d\n" % (width, height, _MAXVAL))
            fh.write(raster)
    except OSError as exc:
        raise ImageIOError(f"cannot write image {path}: {exc}") from exc


def _require_pillow():
    try:
        from PIL import Image
    except ImportError as exc:
        raise ImageIOError(
            "PNG support needs the optional Pillow dependency "
            "(pip install qonv[png])"
        ) from exc
    return Image


def _load_png(path) -> np.ndarray:
    Image = _require_pillow()
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / _MAXVAL
    except OSError as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    return arr.transpose(2, 0, 1)


def _save_png(path, img: np.ndarray) -> None:
    Image = _require_pillow()
    quantized = np.clip(np.rint(img * _MAXVAL), 0, _MAXVAL).astype(np.uint8)
    if quantized.shape[0] == 1:
        quantized = np.repeat(quantized, 3, axis=0)
    try:
        Image.fromarray(quantized.transpose(1, 2, 0)).save(path)
    except OSError as exc:
        raise ImageIOError(f"cannot write image {path}: {exc}") from exc
