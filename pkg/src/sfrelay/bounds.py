"""Achievable-rate constraints for the relaying setup, evaluated exactly.

The binary parametrization: X ~ Bern(1/2); the relay's reconstruction is
Y = X ^ E with E ~ Bern(rho); the relay-link test channel gives U = Y ^ Q
with Q ~ Bern(q); shared side information is V = Y ^ W with W ~ Bern(delta).
All bounds come from the exhaustive 16-cell joint pmf over (X, Y, U, V),
so they serve as an exact reference rather than a closed-form shortcut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def binary_entropy(p: float) -> float:
    """h(p) = -p*log2(p) - (1-p)*log2(1-p), with h(0) = h(1) = 0."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


@dataclass(frozen=True)
class RateRegionModel:
    """Crossover probabilities of the three binary symmetric legs."""

    rho: float    # X -> Y (intra-link corruption)
    q: float      # Y -> U (relay-link test channel)
    delta: float  # Y -> V (side information)

    def __post_init__(self):
        for name in ("rho", "q", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5], got {v}")

    def joint_pmf(self) -> np.ndarray:
        """Exact pmf over (x, y, u, v) in {0,1}^4, indexed p[x, y, u, v]."""
        p = np.zeros((2, 2, 2, 2))
        for x in (0, 1):
            for y in (0, 1):
                py = self.rho if y != x else 1.0 - self.rho
                for u in (0, 1):
                    pu = self.q if u != y else 1.0 - self.q
                    for v in (0, 1):
                        pv = self.delta if v != y else 1.0 - self.delta
                        p[x, y, u, v] = 0.5 * py * pu * pv
        return p


@dataclass(frozen=True)
class RateBounds:
    """Minimum link rates (bits/symbol) for lossless recovery at the destination."""

    r0_min: float            # relay must learn Y:      I(X;Y)
    r1_min_no_side: float    # direct link, no helper side info:  H(X|U)
    r2_min_no_side: float    # relay link,  no helper side info:  I(Y;U)
    r1_min: float            # direct link with side info:        H(X|U,V)
    r2_min: float            # relay link with side info:         I(Y;U|V)


def _entropy(pmf: np.ndarray) -> float:
    p = pmf.reshape(-1)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def _marginal(pmf: np.ndarray, keep: tuple[int, ...]) -> np.ndarray:
    drop = tuple(ax for ax in range(pmf.ndim) if ax not in keep)
    return pmf.sum(axis=drop)


def rate_region(model: RateRegionModel) -> RateBounds:
    """Evaluate all five rate bounds from the enumerated joint pmf.

    Entropies are computed directly from marginals of the 16-cell table:
    I(X;Y) = H(X)+H(Y)-H(X,Y), H(X|U) = H(X,U)-H(U), and so on. Tiny
    negative values from float round-off are clamped to 0.
    """
    p = model.joint_pmf()
    # axes: 0=X, 1=Y, 2=U, 3=V
    h = _entropy
    m = lambda *keep: _marginal(p, keep)

    i_xy = h(m(0)) + h(m(1)) - h(m(0, 1))
    h_x_given_u = h(m(0, 2)) - h(m(2))
    i_yu = h(m(1)) + h(m(2)) - h(m(1, 2))
    i_yu_given_v = h(m(1, 3)) + h(m(2, 3)) - h(m(3)) - h(m(1, 2, 3))
    h_x_given_uv = h(m(0, 2, 3)) - h(m(2, 3))

    clamp = lambda v: max(0.0, v)
    return RateBounds(
        r0_min=clamp(i_xy),
        r1_min_no_side=clamp(h_x_given_u),
        r2_min_no_side=clamp(i_yu),
        r1_min=clamp(h_x_given_uv),
        r2_min=clamp(i_yu_given_v),
    )
