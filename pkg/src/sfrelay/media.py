"""Image <-> bit-sequence conversion and the Euclidean-distance quality metric.

Images are float arrays of shape (3, 96, 96) with values in [0, 1]. Their
binary form uses 8 bits per value, MSB first, flattened channel-major then
row-major, for a fixed length of 3*96*96*8 = 221184 bits.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

IMAGE_SHAPE = (3, 96, 96)
PIXELS_PER_IMAGE = 3 * 96 * 96
BITS_PER_IMAGE = PIXELS_PER_IMAGE * 8

# CIFAR-10 binary batch record: 1 label byte + 3 channels * 32*32 pixel bytes
CIFAR_RECORD_BYTES = 1 + 3 * 32 * 32


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate shape and value range, returning a float64 view/copy."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != IMAGE_SHAPE:
        raise ValueError(f"expected image of shape {IMAGE_SHAPE}, got {img.shape}")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite values")
    return img


def quantize_image(img: np.ndarray) -> np.ndarray:
    """Map each value to round(v*255) and emit 8 bits per value, MSB first.

    Values marginally outside [0, 1] (upstream numerics) are clamped.
    """
    img = check_image(img)
    levels = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return np.unpackbits(levels.reshape(-1))


def dequantize_image(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`quantize_image` on the 256-level grid: byte b -> b/255."""
    bits = np.asarray(bits)
    if bits.size != BITS_PER_IMAGE:
        raise ValueError(f"expected {BITS_PER_IMAGE} bits, got {bits.size}")
    levels = np.packbits(bits.astype(np.uint8).reshape(-1))
    return (levels.astype(np.float64) / 255.0).reshape(IMAGE_SHAPE)


def euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Root of the summed squared per-value differences, on the [0, 1] scale."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def load_png(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG as a (3, 96, 96) image in [0, 1], bilinearly resizing if needed."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if im.size != (96, 96):
            im = im.resize((96, 96), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return arr.transpose(2, 0, 1)


def save_png(img: np.ndarray, path: str | os.PathLike) -> None:
    img = check_image(img)
    levels = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(levels.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def load_cifar_batch(path: str | os.PathLike, limit: int | None = None) -> list[tuple[int, np.ndarray]]:
    """Read a CIFAR-10 binary batch into (label, image) pairs.

    Each record is 3073 bytes: one label byte followed by 3x1024 channel
    bytes of a 32x32 image. Images are bilinearly upscaled to 96x96.
    """
    raw = np.fromfile(os.fspath(path), dtype=np.uint8)
    if raw.size == 0 or raw.size % CIFAR_RECORD_BYTES != 0:
        raise ValueError(
            f"file size {raw.size} is not a multiple of the {CIFAR_RECORD_BYTES}-byte record"
        )
    records = raw.reshape(-1, CIFAR_RECORD_BYTES)
    if limit is not None:
        records = records[:limit]
    out = []
    for rec in records:
        label = int(rec[0])
        chw = rec[1:].reshape(3, 32, 32)
        im = Image.fromarray(chw.transpose(1, 2, 0), mode="RGB")
        im = im.resize((96, 96), Image.BILINEAR)
        img = np.asarray(im, dtype=np.float64).transpose(2, 0, 1) / 255.0
        out.append((label, img))
    return out


def load_image_any(path: str | os.PathLike) -> np.ndarray:
    """Load one image from a PNG (or any PIL-readable raster) file."""
    return load_png(path)
