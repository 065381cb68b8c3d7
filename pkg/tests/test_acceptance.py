"""Release gate: one test per headline property, each printing what it
measured. The Monte-Carlo trend tests share three module-scoped sweeps run
with the bundled model and sample images (seeded, so reruns are identical)."""

from fractions import Fraction

import numpy as np
import pytest

from sfrelay.bounds import RateRegionModel, binary_entropy, rate_region
from sfrelay.channel import ChannelParams
from sfrelay.correlation import CorrelationEstimate, fc_update
from sfrelay.harness import SimConfig, run_sweep
from sfrelay.ldpc import L_MAX, build_code, decode, encode, hard_decision
from sfrelay.media import BITS_PER_IMAGE
from sfrelay.semantic import SEMANTIC_BITS, conv_forward, tconv_forward

from test_bounds import bounds_oracle
from test_correlation import fc_oracle
from test_ldpc import bitwise_map_oracle
from test_semantic import conv_oracle, random_model, tconv_oracle


def _cell(summary, snr, rho, it):
    for row in summary:
        if row["snr_db"] == snr and row["rho"] == rho and row["iter"] == it:
            return row
    raise KeyError((snr, rho, it))


@pytest.fixture(scope="module")
def sweeps():
    base = dict(global_iters=7, trials=50, master_seed=42, threads=1, out="")
    rec_a, sum_a, fail_a = run_sweep(SimConfig(
        snr_sd_list=(-5.0, -3.0, 0.0, 3.0, 6.0, 9.0), rho_list=(0.1,), **base))
    rec_b, sum_b, fail_b = run_sweep(SimConfig(
        snr_sd_list=(-5.0, 0.0), rho_list=(0.0, 0.35), **base))
    rec_c, sum_c, fail_c = run_sweep(SimConfig(
        snr_sd_list=(8.0, 9.0), rho_list=(0.1,), global_iters=7, trials=20,
        master_seed=42, threads=1, out=""))
    assert not fail_a and not fail_b and not fail_c
    return dict(sum_a=sum_a, sum_b=sum_b, rec_c=rec_c)


def test_payload_ratio_is_0_306():
    ratio = Fraction(SEMANTIC_BITS, BITS_PER_IMAGE)
    assert ratio == Fraction(67712, 221184) == Fraction(529, 1728)
    assert round(float(ratio), 3) == 0.306
    print(f"payload ratio {SEMANTIC_BITS}/{BITS_PER_IMAGE} = {float(ratio):.4f}")


def test_rate_region_closed_forms_and_side_info():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(100):
        rho, q, delta = rng.uniform(0.01, 0.49, 3)
        b = rate_region(RateRegionModel(rho=rho, q=q, delta=delta))
        ref = bounds_oracle(rho, q, delta)
        got = (b.r0_min, b.r1_min_no_side, b.r2_min_no_side, b.r1_min, b.r2_min)
        worst = max(worst, max(abs(g - r) for g, r in zip(got, ref)))
        assert worst <= 1e-12
        assert abs(b.r0_min - (1.0 - binary_entropy(rho))) <= 1e-12
        assert abs(b.r2_min_no_side - (1.0 - binary_entropy(q))) <= 1e-12
        assert b.r1_min <= b.r1_min_no_side + 1e-12
        assert b.r2_min <= b.r2_min_no_side + 1e-12
    print(f"rate region vs enumeration: worst |err| = {worst:.2e} over 100 triples")


def test_llr_exchange_function_suite():
    grid = np.linspace(-L_MAX, L_MAX, 201)
    assert np.array_equal(fc_update(grid, CorrelationEstimate(0.0)), grid)
    assert np.abs(fc_update(grid, CorrelationEstimate(0.5))).max() <= 1e-14

    rng = np.random.default_rng(999)
    worst = 0.0
    for _ in range(1000):
        llr = rng.uniform(-L_MAX, L_MAX)
        rho = rng.uniform(0.01, 0.5)
        est = CorrelationEstimate(rho)
        got = float(fc_update(np.array([llr]), est)[0])
        worst = max(worst, abs(got - fc_oracle(llr, rho)))
        assert worst <= 1e-12
        neg = float(fc_update(np.array([-llr]), est)[0])
        assert abs(neg + got) <= 1e-12  # odd
        cap = np.log((1.0 - rho) / rho)
        assert abs(got) <= min(abs(llr), cap) + 1e-12  # contraction
    print(f"exchange vs 4-state posterior: worst |err| = {worst:.2e} over 1000 pairs")


def test_ldpc_suite():
    code = build_code(900, seed=1)
    rng = np.random.default_rng(7)
    info = rng.integers(0, 2, (1000, code.k)).astype(np.uint8)
    cws = encode(code, info)
    H = code.parity_check_matrix()
    assert not (H @ cws.T % 2).any(), "parity violated"

    toy = build_code(6, seed=0)
    params = ChannelParams(6.0, 0)
    trng = np.random.default_rng(39)
    for _ in range(200):
        cw = encode(toy, trng.integers(0, 2, toy.k).astype(np.uint8))
        y = (1.0 - 2.0 * cw) + trng.normal(0, np.sqrt(params.sigma2), toy.n)
        llr = 2.0 * y / params.sigma2
        post, _ = decode(toy, llr[None, :], np.zeros((1, toy.n)), local_iters=8)
        assert np.array_equal(hard_decision(post[0]), bitwise_map_oracle(toy, llr))

    bers = {}
    for snr in (-5.0, 9.0):
        p = ChannelParams(snr, 11)
        blocks = 140  # 140 * 900 = 126000 coded bits
        cws = encode(code, np.random.default_rng(13).integers(
            0, 2, (blocks, code.k)).astype(np.uint8))
        y = (1.0 - 2.0 * cws) + np.random.default_rng(p.rng_seed).normal(
            0, np.sqrt(p.sigma2), cws.shape)
        post, _ = decode(code, 2.0 * y / p.sigma2, np.zeros(cws.shape), local_iters=8)
        bers[snr] = float(np.mean(hard_decision(post) != cws))
    assert bers[9.0] < bers[-5.0]
    assert bers[9.0] < 1e-3
    print(f"BER {bers[-5.0]:.4f} @ -5 dB -> {bers[9.0]:.2e} @ 9 dB over 126000 bits")


def test_feature_extractor_oracle_and_shape_chain():
    rng = np.random.default_rng(50)
    worst = 0.0
    for trial in range(50):
        c, o = rng.integers(1, 5, 2)
        kh, kw = (int(v) for v in rng.integers(1, 4, 2))
        stride = int(rng.integers(1, 3))
        if trial % 2 == 0:
            h = int(rng.integers(kh, kh + 8))
            wd = int(rng.integers(kw, kw + 8))
            x = rng.normal(0, 1, (c, h, wd)).astype(np.float32)
            w = rng.normal(0, 1, (o, c, kh, kw)).astype(np.float32)
            b = rng.normal(0, 1, o).astype(np.float32)
            got = conv_forward(x, w, b, stride)
            ref = conv_oracle(x.astype(np.float64), w.astype(np.float64),
                              b.astype(np.float64), stride)
        else:
            h, wd = (int(v) for v in rng.integers(2, 9, 2))
            x = rng.normal(0, 1, (c, h, wd)).astype(np.float32)
            w = rng.normal(0, 1, (o, c, kh, kw)).astype(np.float32)
            b = rng.normal(0, 1, o).astype(np.float32)
            got = tconv_forward(x, w, b, stride)
            ref = tconv_oracle(x.astype(np.float64), w.astype(np.float64),
                               b.astype(np.float64), stride)
        worst = max(worst, float(np.abs(got - ref).max()))
        assert np.allclose(got, ref, rtol=1e-5, atol=1e-5)

    m = random_model()
    shapes = [(3, 96, 96)]
    for spec in m.enc_layers + m.dec_layers:
        shapes.append(spec.out_shape(shapes[-1]))
    assert shapes == [(3, 96, 96), (16, 95, 95), (16, 47, 47), (16, 23, 23),
                      (16, 47, 47), (16, 95, 95), (3, 96, 96)]
    print(f"layer ops vs nested loops: worst |err| = {worst:.2e} over 50 tensors")


def test_high_snr_endpoint(sweeps):
    for snr in (8.0, 9.0):
        eds = [r.ed_independent[-1] for r in sweeps["rec_c"] if r.snr_db == snr]
        frac = sum(1 for e in eds if e == 0.0) / len(eds)
        print(f"independent zero-ED fraction at {snr:g} dB: {frac:.2f} ({len(eds)} trials)")
        assert frac >= 0.95


def test_joint_dominates_independent(sweeps):
    for snr in (-5.0, -3.0, 0.0, 3.0, 6.0, 9.0):
        row = _cell(sweeps["sum_a"], snr, 0.1, 7)
        print(f"snr {snr:5g}: joint {row['mean_ed_joint']:8.3f}  "
              f"independent {row['mean_ed_independent']:8.3f}")
        assert row["mean_ed_joint"] <= row["mean_ed_independent"], f"at {snr} dB"


def test_ed_nondecreasing_in_flip_rate(sweeps):
    for snr in (-5.0, 0.0):
        m0 = _cell(sweeps["sum_b"], snr, 0.0, 7)["mean_ed_joint"]
        m1 = _cell(sweeps["sum_a"], snr, 0.1, 7)["mean_ed_joint"]
        m2 = _cell(sweeps["sum_b"], snr, 0.35, 7)["mean_ed_joint"]
        print(f"snr {snr:5g}: ED(rho=0) {m0:.3f}  ED(0.1) {m1:.3f}  ED(0.35) {m2:.3f}")
        assert m0 <= m1 <= m2, f"ordering broken at {snr} dB"


def test_global_iterations_improve_reconstruction(sweeps):
    i0 = _cell(sweeps["sum_a"], -5.0, 0.1, 0)["mean_ed_joint"]
    i7 = _cell(sweeps["sum_a"], -5.0, 0.1, 7)["mean_ed_joint"]
    print(f"mean joint ED at -5 dB, rho 0.1: iter0 {i0:.3f} -> iter7 {i7:.3f}")
    assert i7 < i0
