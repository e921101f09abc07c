"""Image and file I/O helpers: PNG read/write, sRGB transfer, resampling,
atomic writes. All float images use the [0, 1] range."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from matscene.errors import DecodeError

Image.MAX_IMAGE_PIXELS = None  # corpus images are trusted local files


def load_rgb(path: str | Path) -> np.ndarray:
    """Decode an image file to a (H, W, 3) uint8 array.

    Raises DecodeError for unreadable files and for non-RGB content.
    """
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "RGB":
                raise DecodeError(f"{path}: expected RGB image, got mode {im.mode!r}")
            arr = np.asarray(im, dtype=np.uint8)
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"{path}: cannot decode image ({exc})") from exc
    if arr.size == 0:
        raise DecodeError(f"{path}: empty image")
    return arr


def to_unit_float(image: np.ndarray) -> np.ndarray:
    """Normalize an 8/16-bit RGB array (or pass through float in [0,1]) to float64."""
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise DecodeError(f"expected non-empty (H, W, 3) array, got shape {image.shape}")
    if image.dtype == np.uint8:
        return image.astype(np.float64) / 255.0
    if image.dtype == np.uint16:
        return image.astype(np.float64) / 65535.0
    if np.issubdtype(image.dtype, np.floating):
        return image.astype(np.float64)
    raise DecodeError(f"unsupported image dtype {image.dtype}")


def save_png8(path: str | Path, image: np.ndarray) -> None:
    """Write a float [0,1] (H, W, 3) or (H, W) array as an 8-bit PNG."""
    if image.dtype != np.uint8:
        image = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    _atomic_image_save(path, Image.fromarray(image))


def save_png16_gray(path: str | Path, plane: np.ndarray) -> None:
    """Write a float [0,1] (H, W) plane as a 16-bit grayscale PNG."""
    q = np.rint(np.clip(plane, 0.0, 1.0) * 65535.0).astype(np.uint16)
    _atomic_image_save(path, Image.fromarray(q))


# Fast deflate level: corpus-scale intermediates trade size for throughput.
PNG_COMPRESS_LEVEL = 1


def load_png16_gray(path: str | Path) -> np.ndarray:
    """Read a 16-bit grayscale PNG back to float64 in [0,1]."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    return arr.astype(np.float64) / 65535.0


def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x = np.clip(x, 0.0, None)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * x ** (1.0 / 2.4) - 0.055)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Center-aligned bilinear resampling with edge clamping.

    Works for (H, W) and (H, W, C) float arrays; returns float64.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)
    wx = np.clip(xs - x0, 0.0, 1.0)
    if img.ndim == 3:
        wy = wy[:, None, None]
        wx = wx[None, :, None]
    else:
        wy = wy[:, None]
        wx = wx[None, :]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str | Path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def read_json(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _atomic_image_save(path: str | Path, im: Image.Image) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        im.save(tmp, format="PNG", compress_level=PNG_COMPRESS_LEVEL)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
