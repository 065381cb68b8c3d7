"""Extrinsic-information exchange between the two decoding branches.

The two branches hold soft information about bit sequences that differ by
an independent Bern(rho) flip pattern. Belief about one sequence converts
into belief about the other through the LLR update

    fc(L, rho) = ln[ ((1-rho) * e^L + rho) / (rho * e^L + (1-rho)) ],

which is the exact posterior LLR after marginalizing the flip, and whose
magnitude saturates at ln((1-rho)/rho).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CorrelationEstimate:
    rho_hat: float

    def __post_init__(self):
        if not 0.0 <= self.rho_hat <= 0.5:
            raise ValueError(f"rho_hat must lie in [0, 0.5], got {self.rho_hat}")


def fc_update(llr: np.ndarray, est: CorrelationEstimate) -> np.ndarray:
    """Apply fc elementwise; rho_hat = 0 passes the input through unchanged."""
    llr = np.asarray(llr, dtype=np.float64)
    rho = est.rho_hat
    if rho == 0.0:
        return llr.copy()
    # log-domain form, stable for any |L|:
    #   ln((1-rho)e^L + rho) - ln(rho e^L + (1-rho))
    log_r = np.log(rho)
    log_1mr = np.log1p(-rho)
    return np.logaddexp(llr + log_1mr, log_r) - np.logaddexp(llr + log_r, log_1mr)


def exchange(
    e1: np.ndarray, e2: np.ndarray, est: CorrelationEstimate
) -> tuple[np.ndarray, np.ndarray]:
    """Turn each branch's extrinsic LLRs into the other branch's a-priori LLRs.

    Branch 1's new a-priori comes from branch 2's extrinsic and vice versa;
    each crossing is attenuated by fc for the estimated flip rate.
    """
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != e2.shape:
        raise ValueError(f"extrinsic length mismatch: {e1.shape} vs {e2.shape}")
    return fc_update(e2, est), fc_update(e1, est)


def estimate_rho(hard1: np.ndarray, hard2: np.ndarray) -> CorrelationEstimate:
    """Empirical flip-rate estimate from the two branches' hard decisions."""
    hard1 = np.asarray(hard1)
    hard2 = np.asarray(hard2)
    if hard1.shape != hard2.shape:
        raise ValueError(f"length mismatch: {hard1.shape} vs {hard2.shape}")
    rate = float(np.mean(hard1 != hard2))
    return CorrelationEstimate(min(rate, 0.5))
