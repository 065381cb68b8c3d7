"""Inference-side semantic codec: convolutional feature extraction, feature
quantization to bits, soft pixel-to-bit demapping, and the portable weight
file.

The fixed architecture compresses a 3x96x96 image to a 16x23x23 feature
tensor (8464 values, so 67712 bits at 8 bits per value against the source's
221184 -- a payload ratio of about 0.306) and reconstructs the image from
it. Hidden layers use ReLU; the final reconstruction layer uses a logistic
activation so outputs land in [0, 1].

Weight file format (".sfrw", little-endian throughout):

    magic "SFRW" | u32 version (=1) | u32 layer_count
    per layer: u8 kind (0=conv, 1=tconv) | u32 in_ch, out_ch, kh, kw, stride
               | f32 weights in (out, in, kh, kw) order | f32 bias[out_ch]
    trailer:   f32 clip_min | f32 clip_max | f32 sigma_s

Loaders reject unknown versions, truncated files, and any layer stack whose
shape chain deviates from the fixed architecture.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ldpc import L_MAX
from .media import BITS_PER_IMAGE, dequantize_image

FEATURE_SHAPE = (16, 23, 23)
FEATURE_COUNT = 16 * 23 * 23
SEMANTIC_BITS = FEATURE_COUNT * 8
SFRW_MAGIC = b"SFRW"
SFRW_VERSION = 1

ENC_CHAIN = ((3, 96, 96), (16, 95, 95), (16, 47, 47), (16, 23, 23))
DEC_CHAIN = ((16, 23, 23), (16, 47, 47), (16, 95, 95), (3, 96, 96))


class CorruptModelError(Exception):
    """Weight file is unreadable, has an unknown version, or fails validation."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv" or "tconv"
    in_ch: int
    out_ch: int
    kh: int
    kw: int
    stride: int

    def out_shape(self, in_shape: tuple[int, int, int]) -> tuple[int, int, int]:
        c, h, w = in_shape
        if c != self.in_ch:
            raise CorruptModelError(f"layer expects {self.in_ch} channels, got {c}")
        if self.kind == "conv":
            return (self.out_ch, (h - self.kh) // self.stride + 1,
                    (w - self.kw) // self.stride + 1)
        if self.kind == "tconv":
            return (self.out_ch, (h - 1) * self.stride + self.kh,
                    (w - 1) * self.stride + self.kw)
        raise CorruptModelError(f"unknown layer kind {self.kind!r}")


def default_architecture() -> tuple[list[LayerSpec], list[LayerSpec]]:
    """The fixed encoder/decoder layer stacks (see module docstring)."""
    enc = [
        LayerSpec("conv", 3, 16, 2, 2, 1),
        LayerSpec("conv", 16, 16, 3, 3, 2),
        LayerSpec("conv", 16, 16, 3, 3, 2),
    ]
    dec = [
        LayerSpec("tconv", 16, 16, 3, 3, 2),
        LayerSpec("tconv", 16, 16, 3, 3, 2),
        LayerSpec("tconv", 16, 3, 2, 2, 1),
    ]
    return enc, dec


def _check_chain(layers: list[LayerSpec], expected: tuple) -> None:
    shape = expected[0]
    chain = [shape]
    for spec in layers:
        shape = spec.out_shape(shape)
        chain.append(shape)
    if tuple(chain) != tuple(expected):
        raise CorruptModelError(f"shape chain {chain} != required {list(expected)}")


@dataclass
class SemanticModel:
    """Layer stack, weights, feature clip range, and reconstruction-noise scale.

    weights[i] has shape (out_ch, in_ch, kh, kw); biases[i] has shape
    (out_ch,). Encoder layers come first, decoder layers after.
    """

    enc_layers: list[LayerSpec]
    dec_layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    clip_min: float
    clip_max: float
    sigma_s: float
    version: int = SFRW_VERSION

    def __post_init__(self):
        _check_chain(self.enc_layers, ENC_CHAIN)
        _check_chain(self.dec_layers, DEC_CHAIN)
        specs = self.enc_layers + self.dec_layers
        if len(self.weights) != len(specs) or len(self.biases) != len(specs):
            raise CorruptModelError("weight/bias count does not match layer count")
        for i, spec in enumerate(specs):
            wshape = (spec.out_ch, spec.in_ch, spec.kh, spec.kw)
            if self.weights[i].shape != wshape:
                raise CorruptModelError(
                    f"layer {i}: weight shape {self.weights[i].shape} != {wshape}")
            if self.biases[i].shape != (spec.out_ch,):
                raise CorruptModelError(f"layer {i}: bad bias shape")
            self.weights[i] = np.ascontiguousarray(self.weights[i], dtype=np.float32)
            self.biases[i] = np.ascontiguousarray(self.biases[i], dtype=np.float32)
        if not self.clip_min < self.clip_max:
            raise CorruptModelError("clip_min must be < clip_max")
        if not self.sigma_s > 0:
            raise CorruptModelError("sigma_s must be > 0")


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Valid (zero-padding-free) 2D cross-correlation over a (C, H, W) input."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    win = sliding_window_view(x, (w.shape[2], w.shape[3]), axis=(1, 2))
    win = win[:, ::stride, ::stride]
    out = np.einsum("cijhw,ochw->oij", win, w, optimize=True)
    return out + b[:, None, None]


def tconv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Transposed convolution: scatter-accumulate each input value through the
    kernel onto a stride-spaced output grid."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    out_ch, _, kh, kw = w.shape
    _, h, wd = x.shape
    out = np.zeros((out_ch, (h - 1) * stride + kh, (wd - 1) * stride + kw),
                   dtype=np.float32)
    for ki in range(kh):
        for kj in range(kw):
            out[:, ki:ki + stride * h:stride, kj:kj + stride * wd:stride] += (
                np.tensordot(w[:, :, ki, kj], x, axes=(1, 0)))
    return out + b[:, None, None]


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sem_encode(model: SemanticModel, img: np.ndarray) -> np.ndarray:
    """Run the encoder stack (ReLU after every layer) on a (3, 96, 96) image."""
    x = np.asarray(img, dtype=np.float32)
    if x.shape != ENC_CHAIN[0]:
        raise ValueError(f"expected input shape {ENC_CHAIN[0]}, got {x.shape}")
    for i, spec in enumerate(model.enc_layers):
        x = _relu(conv_forward(x, model.weights[i], model.biases[i], spec.stride))
    return x


def sem_decode(model: SemanticModel, feat: np.ndarray) -> np.ndarray:
    """Run the decoder stack (ReLU on hidden layers, logistic on the last)."""
    x = np.asarray(feat, dtype=np.float32)
    if x.shape != FEATURE_SHAPE:
        raise ValueError(f"expected feature shape {FEATURE_SHAPE}, got {x.shape}")
    off = len(model.enc_layers)
    last = len(model.dec_layers) - 1
    for i, spec in enumerate(model.dec_layers):
        x = tconv_forward(x, model.weights[off + i], model.biases[off + i], spec.stride)
        x = _sigmoid(x) if i == last else _relu(x)
    return x


def features_to_bits(model: SemanticModel, feat: np.ndarray) -> np.ndarray:
    """Clip to the model's range, quantize each value to 8 bits, MSB first."""
    feat = np.asarray(feat, dtype=np.float64)
    if feat.shape != FEATURE_SHAPE:
        raise ValueError(f"expected feature shape {FEATURE_SHAPE}, got {feat.shape}")
    span = model.clip_max - model.clip_min
    clipped = np.clip(feat, model.clip_min, model.clip_max)
    levels = np.rint((clipped - model.clip_min) / span * 255.0).astype(np.uint8)
    return np.unpackbits(levels.reshape(-1))


def bits_to_features(model: SemanticModel, bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`features_to_bits`: byte b -> clip_min + (b/255)*span."""
    bits = np.asarray(bits)
    if bits.size != SEMANTIC_BITS:
        raise ValueError(f"expected {SEMANTIC_BITS} bits, got {bits.size}")
    levels = np.packbits(bits.astype(np.uint8).reshape(-1)).astype(np.float64)
    span = model.clip_max - model.clip_min
    feat = model.clip_min + levels / 255.0 * span
    return feat.reshape(FEATURE_SHAPE).astype(np.float32)


# bit j of byte v, MSB first: columns of _BIT_TABLE select bytes with bit j set
_BIT_TABLE = ((np.arange(256)[:, None] >> np.arange(7, -1, -1)[None, :]) & 1).astype(np.float64)


def pixel_bit_llrs(model: SemanticModel, img_hat: np.ndarray) -> np.ndarray:
    """Soft bit estimates for the pixels behind a reconstructed image.

    Each reconstructed value is modelled as the true 8-bit pixel level plus
    Gaussian noise of scale sigma_s; the LLR for each bit position is the
    exact 256-term ratio of summed Gaussian densities over the levels with
    that bit equal to 0 versus 1, clipped to +-L_MAX.
    """
    img_hat = np.asarray(img_hat, dtype=np.float64)
    if img_hat.shape != ENC_CHAIN[0]:
        raise ValueError(f"expected image shape {ENC_CHAIN[0]}, got {img_hat.shape}")
    p = img_hat.reshape(-1)
    grid = np.arange(256, dtype=np.float64) / 255.0
    logphi = -((p[:, None] - grid[None, :]) ** 2) / (2.0 * model.sigma_s ** 2)
    logphi -= logphi.max(axis=1, keepdims=True)
    dens = np.exp(logphi)
    with np.errstate(divide="ignore"):
        llr = np.log(dens @ (1.0 - _BIT_TABLE)) - np.log(dens @ _BIT_TABLE)
    return np.clip(llr, -L_MAX, L_MAX).reshape(-1)


def apriori_to_semantic_llrs(model: SemanticModel, a2_y: np.ndarray, kappa: float) -> np.ndarray:
    """Re-encode a-priori pixel-bit beliefs into a-priori semantic-bit LLRs.

    Hard-decides the pixel bits (ties to 0), rebuilds the image, runs the
    encoder and feature quantizer, and assigns each resulting bit a fixed
    confidence kappa with the matching sign.
    """
    a2_y = np.asarray(a2_y, dtype=np.float64)
    if a2_y.size != BITS_PER_IMAGE:
        raise ValueError(f"expected {BITS_PER_IMAGE} LLRs, got {a2_y.size}")
    hard = (a2_y < 0).astype(np.uint8)
    img = dequantize_image(hard)
    s_bits = features_to_bits(model, sem_encode(model, img))
    return kappa * (1.0 - 2.0 * s_bits.astype(np.float64))


def save_model(model: SemanticModel, path: str | os.PathLike) -> None:
    specs = model.enc_layers + model.dec_layers
    parts = [SFRW_MAGIC, struct.pack("<II", model.version, len(specs))]
    for i, spec in enumerate(specs):
        kind = 0 if spec.kind == "conv" else 1
        parts.append(struct.pack("<BIIIII", kind, spec.in_ch, spec.out_ch,
                                 spec.kh, spec.kw, spec.stride))
        parts.append(model.weights[i].astype("<f4").tobytes())
        parts.append(model.biases[i].astype("<f4").tobytes())
    parts.append(struct.pack("<fff", model.clip_min, model.clip_max, model.sigma_s))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_model(path: str | os.PathLike) -> SemanticModel:
    with open(path, "rb") as fh:
        buf = fh.read()

    def take(count, what):
        nonlocal off
        if off + count > len(buf):
            raise CorruptModelError(f"truncated file while reading {what}")
        out = buf[off:off + count]
        off += count
        return out

    off = 0
    if take(4, "magic") != SFRW_MAGIC:
        raise CorruptModelError("bad magic bytes")
    version, layer_count = struct.unpack("<II", take(8, "header"))
    if version != SFRW_VERSION:
        raise CorruptModelError(f"unsupported version {version}")
    enc_layers, dec_layers, weights, biases = [], [], [], []
    for i in range(layer_count):
        kind_b, in_ch, out_ch, kh, kw, stride = struct.unpack(
            "<BIIIII", take(21, f"layer {i} header"))
        if kind_b not in (0, 1):
            raise CorruptModelError(f"layer {i}: unknown kind byte {kind_b}")
        if kind_b == 0 and dec_layers:
            raise CorruptModelError(f"layer {i}: conv layer after tconv layers")
        spec = LayerSpec("conv" if kind_b == 0 else "tconv", in_ch, out_ch, kh, kw, stride)
        wn = out_ch * in_ch * kh * kw
        w = np.frombuffer(take(4 * wn, f"layer {i} weights"), dtype="<f4")
        b = np.frombuffer(take(4 * out_ch, f"layer {i} biases"), dtype="<f4")
        (enc_layers if kind_b == 0 else dec_layers).append(spec)
        weights.append(w.reshape(out_ch, in_ch, kh, kw).copy())
        biases.append(b.copy())
    clip_min, clip_max, sigma_s = struct.unpack("<fff", take(12, "trailer"))
    if off != len(buf):
        raise CorruptModelError(f"{len(buf) - off} trailing bytes after trailer")
    return SemanticModel(enc_layers, dec_layers, weights, biases,
                         float(clip_min), float(clip_max), float(sigma_s), version)
