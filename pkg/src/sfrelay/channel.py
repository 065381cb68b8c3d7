"""BPSK over AWGN, soft demapping, and the intra-link bit-flip model.

SNR is Es/N0 per coded BPSK symbol with Es = 1, so the per-dimension noise
variance is sigma2 = 10**(-snr_db/10) / 2. LLRs follow the convention
L = ln(Pr(bit=0) / Pr(bit=1)) throughout, so positive L favours bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    snr_db: float
    rng_seed: int = 0
    sigma2: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma2", 10.0 ** (-self.snr_db / 10.0) / 2.0)


@dataclass(frozen=True)
class IntraLinkModel:
    """Bit-flip rate between the source sequence and the relay's reconstruction."""

    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 0.5:
            raise ValueError(f"rho must lie in [0, 0.5], got {self.rho}")


def bpsk_awgn(bits: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Map bit b to 1-2b and add N(0, sigma2) noise, deterministic per seed."""
    bits = np.asarray(bits)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0/1")
    s = 1.0 - 2.0 * bits.astype(np.float64)
    rng = np.random.default_rng(params.rng_seed)
    return s + rng.normal(0.0, np.sqrt(params.sigma2), size=s.shape)


def channel_llr(y: np.ndarray, params: ChannelParams) -> np.ndarray:
    """AWGN demapping: L = 2y / sigma2."""
    return 2.0 * np.asarray(y, dtype=np.float64) / params.sigma2


def bsc_corrupt(bits: np.ndarray, model: IntraLinkModel, seed: int) -> np.ndarray:
    """Flip each bit independently with probability rho."""
    bits = np.asarray(bits).astype(np.uint8)
    rng = np.random.default_rng(seed)
    flips = rng.random(bits.shape) < model.rho
    return bits ^ flips.astype(np.uint8)
