import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfrelay.bounds import RateRegionModel, binary_entropy, rate_region


def pmf_oracle(rho, q, delta):
    """Independent enumeration: X ~ Bern(1/2), Y = X xor E(rho),
    U = Y xor Q(q), V = Y xor W(delta); dict keyed by (x, y, u, v)."""
    p = {}
    for x, e, eq, ew in itertools.product((0, 1), repeat=4):
        y = x ^ e
        u = y ^ eq
        v = y ^ ew
        w = 0.5
        w *= rho if e else 1 - rho
        w *= q if eq else 1 - q
        w *= delta if ew else 1 - delta
        key = (x, y, u, v)
        p[key] = p.get(key, 0.0) + w
    return p


def entropy_oracle(p):
    return -sum(v * math.log2(v) for v in p.values() if v > 0)


def marginal_oracle(p, keep):
    out = {}
    for key, v in p.items():
        sub = tuple(key[i] for i in keep)
        out[sub] = out.get(sub, 0.0) + v
    return out


def bounds_oracle(rho, q, delta):
    p = pmf_oracle(rho, q, delta)
    h = entropy_oracle
    m = lambda keep: marginal_oracle(p, keep)
    i_xy = h(m((0,))) + h(m((1,))) - h(m((0, 1)))
    h_x_u = h(m((0, 2))) - h(m((2,)))
    i_yu = h(m((1,))) + h(m((2,))) - h(m((1, 2)))
    i_yu_v = h(m((1, 3))) + h(m((2, 3))) - h(m((1, 2, 3))) - h(m((3,)))
    h_x_uv = h(m((0, 2, 3))) - h(m((2, 3)))
    clamp = lambda v: max(0.0, v)
    return (clamp(i_xy), clamp(h_x_u), clamp(i_yu), clamp(h_x_uv), clamp(i_yu_v))


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
    assert binary_entropy(0.1) == pytest.approx(0.4689955935892812, abs=1e-12)


def test_binary_entropy_range_check():
    with pytest.raises(ValueError):
        binary_entropy(-0.01)
    with pytest.raises(ValueError):
        binary_entropy(1.01)


def test_closed_forms_reference_point():
    b = rate_region(RateRegionModel(rho=0.1, q=0.05, delta=0.1))
    assert b.r0_min == pytest.approx(1 - binary_entropy(0.1), abs=1e-12)
    assert b.r0_min == pytest.approx(0.53100, abs=5e-6)
    assert b.r2_min_no_side == pytest.approx(1 - binary_entropy(0.05), abs=1e-12)
    assert b.r2_min_no_side == pytest.approx(0.71360, abs=5e-6)


def test_oracle_agreement_random_triples():
    rng = np.random.default_rng(11)
    for _ in range(100):
        rho, q, delta = rng.uniform(0.0, 0.5, 3)
        b = rate_region(RateRegionModel(rho=rho, q=q, delta=delta))
        ref = bounds_oracle(rho, q, delta)
        got = (b.r0_min, b.r1_min_no_side, b.r2_min_no_side, b.r1_min, b.r2_min)
        assert got == pytest.approx(ref, abs=1e-12)


def test_side_information_never_hurts():
    rng = np.random.default_rng(12)
    for _ in range(60):
        rho, q, delta = rng.uniform(0.0, 0.5, 3)
        b = rate_region(RateRegionModel(rho=rho, q=q, delta=delta))
        assert b.r1_min <= b.r1_min_no_side + 1e-12
        assert b.r2_min <= b.r2_min_no_side + 1e-12


def test_useless_side_information_equalities():
    b = rate_region(RateRegionModel(rho=0.2, q=0.1, delta=0.5))
    assert b.r1_min == pytest.approx(b.r1_min_no_side, abs=1e-12)
    assert b.r2_min == pytest.approx(b.r2_min_no_side, abs=1e-12)


def test_degenerate_endpoints():
    b = rate_region(RateRegionModel(rho=0.0, q=0.1, delta=0.1))
    assert b.r0_min == pytest.approx(1.0, abs=1e-12)
    b = rate_region(RateRegionModel(rho=0.5, q=0.1, delta=0.1))
    assert b.r0_min == pytest.approx(0.0, abs=1e-12)
    b = rate_region(RateRegionModel(rho=0.1, q=0.5, delta=0.1))
    assert b.r2_min_no_side == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 0.5))
def test_all_bounds_in_unit_interval(rho, q, delta):
    b = rate_region(RateRegionModel(rho=rho, q=q, delta=delta))
    for v in (b.r0_min, b.r1_min, b.r2_min, b.r1_min_no_side, b.r2_min_no_side):
        assert -1e-12 <= v <= 1.0 + 1e-12


def test_model_validates_parameters():
    with pytest.raises(ValueError):
        RateRegionModel(rho=0.6, q=0.1, delta=0.1)
    with pytest.raises(ValueError):
        RateRegionModel(rho=0.1, q=-0.1, delta=0.1)


def test_joint_pmf_normalized():
    p = RateRegionModel(rho=0.3, q=0.2, delta=0.4).joint_pmf()
    assert p.shape == (2, 2, 2, 2)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert (p >= 0).all()
