"""Contract tests for the shared register-array sketch."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import geometric_rank_register_mean, hll_alpha_simpson

from failsketch.hashing import HashConfig, ParameterError, logical_indices
from failsketch.registers import (
    CardinalityEstimates,
    RegisterArray,
    RegisterParams,
    alpha,
    estimate_failure_rate,
    estimate_rate,
    hll_estimate,
    hll_estimate_rows,
    host_estimates,
)

CFG = HashConfig(index_seed=7, dst_seed=8, key=9, r_seed=10, r_len=512)


def make_array(t=4096, f=256, seed=0):
    cfg = HashConfig(index_seed=seed, dst_seed=seed + 1, key=2, r_seed=seed + 3, r_len=512)
    return RegisterArray(t, f, reg_width=5, rank_bits=32, hash_config=cfg)


def make_params(t=4096, f=256):
    return RegisterParams(t, t, f, f, reg_width=5, rank_bits=32, hash=CFG)


# --- reset ----------------------------------------------------------------


def test_fresh_array_all_zero():
    arr = make_array()
    assert not arr.registers.any()


def test_hll_on_all_zero_array_is_zero():
    assert hll_estimate(np.zeros(512, dtype=np.uint8)) == 0.0


def test_failure_rate_on_reset_pair_is_zero():
    params = make_params()
    syn, ack = params.make_pair()
    est = estimate_failure_rate(
        host_estimates(syn, 42), host_estimates(ack, 42), params
    )
    assert est == 0.0


# --- encode ---------------------------------------------------------------


def test_encode_idempotent():
    arr = make_array()
    arr.encode(0x0A000001, 0xC0A80001)
    state = arr.registers.copy()
    arr.encode(0x0A000001, 0xC0A80001)
    assert np.array_equal(arr.registers, state)


def test_encode_smaller_rank_leaves_register_unchanged():
    # find two destinations landing on the same physical register for
    # one host, with different ranks; the smaller write must be a no-op
    arr = make_array(t=300, f=64)
    src = 0x0A000001
    from failsketch.hashing import dst_digest, leading_zero_rank, select_index

    by_register = {}
    pair = None
    for dst in range(5_000):
        pos = select_index(arr.hash, src, dst, arr.virtual_size, arr.size)
        rank = leading_zero_rank(dst_digest(arr.hash, dst, 32), 32)
        if pos in by_register and by_register[pos][1] != rank:
            pair = (by_register[pos], (dst, rank), pos)
            break
        by_register[pos] = (dst, rank)
    assert pair is not None
    (d1, r1), (d2, r2), pos = pair
    hi, lo = (d1, d2) if r1 > r2 else (d2, d1)
    arr.encode(src, hi)
    state = arr.registers.copy()
    arr.encode(src, lo)
    assert np.array_equal(arr.registers, state)
    assert state[pos] == max(r1, r2)


def test_encode_register_values_follow_geometric_rank_model():
    # 1e4 distinct destinations for one host over f=512 virtual slots:
    # the mean register value matches the max-of-geometric-ranks model
    # and sits in the coarse band around log2(k/f).
    k, f, t, w = 10_000, 512, 65_536, 32
    model = geometric_rank_register_mean(k, f, w, trials=200, seed=5)
    lo_band = math.log2(k / f) - 3
    hi_band = math.log2(k / f) + 6
    means = []
    for seed in range(50):
        arr = RegisterArray(t, f, 5, w, HashConfig(index_seed=seed, dst_seed=seed + 1, key=0, r_seed=seed + 2, r_len=512))
        rng = np.random.default_rng(seed)
        dsts = rng.integers(0, 2**63, k, dtype=np.uint64)
        arr.encode_batch(np.full(k, 3, dtype=np.uint64), dsts)
        means.append(float(arr.extract_virtual(3).mean()))
    means = np.array(means)
    assert np.all((means >= lo_band) & (means <= hi_band))
    combined_se = model.std() * math.sqrt(1 / len(means) + 1 / len(model))
    assert abs(means.mean() - model.mean()) <= 4 * combined_se


# --- alpha ----------------------------------------------------------------


def test_alpha_reference_values():
    assert alpha(16) == pytest.approx(0.673, abs=5e-4)
    assert alpha(512) == pytest.approx(0.7197, abs=5e-4)


def test_alpha_agrees_with_independent_simpson_quadrature():
    for f in (16, 64, 512, 4096):
        assert alpha(f) == pytest.approx(hll_alpha_simpson(f), rel=1e-6)


def test_alpha_self_convergence_under_doubled_resolution():
    for f in (16, 64, 512, 4096):
        coarse = hll_alpha_simpson(f, points=10_001)
        fine = hll_alpha_simpson(f, points=20_001)
        assert coarse == pytest.approx(fine, rel=1e-6)


def test_alpha_rejects_bad_f():
    with pytest.raises(ParameterError):
        alpha(0)


# --- hll_estimate ----------------------------------------------------------


def test_hll_all_registers_equal_closed_form():
    # no zero registers, so the raw harmonic mean applies directly:
    # alpha_f * f^2 / (f * 2^-r) = alpha_f * f * 2^r
    for f, r in ((64, 3), (512, 5), (256, 1)):
        regs = np.full(f, r, dtype=np.uint8)
        assert hll_estimate(regs) == pytest.approx(alpha(f) * f * 2.0**r, rel=1e-12)


def test_hll_rejects_tiny_register_sets():
    with pytest.raises(ParameterError):
        hll_estimate(np.zeros(8, dtype=np.uint8))


def test_hll_accuracy_dedicated_registers():
    # f=512 registers fed 1e4 distinct items directly: within
    # 3 * 1.04/sqrt(512) (~13.8%) of truth for >= 95% of 200 seeds.
    from failsketch.hashing import dst_digest_array, leading_zero_rank_array, mix64_array

    f, n, w = 512, 10_000, 32
    bound = 3 * 1.04 / math.sqrt(f)
    hits = 0
    for seed in range(200):
        cfg = HashConfig(index_seed=seed, dst_seed=seed + 77, key=0, r_seed=1, r_len=512)
        rng = np.random.default_rng(seed)
        items = rng.integers(0, 2**64, n, dtype=np.uint64)
        slots = (mix64_array(items ^ np.uint64(cfg.index_seed)) % np.uint64(f)).astype(np.int64)
        ranks = leading_zero_rank_array(dst_digest_array(cfg, items, w), w)
        regs = np.zeros(f, dtype=np.uint8)
        np.maximum.at(regs, slots, np.minimum(ranks, 31).astype(np.uint8))
        if abs(hll_estimate(regs) - n) / n <= bound:
            hits += 1
    assert hits >= 190


def test_hll_rows_matches_scalar():
    rng = np.random.default_rng(4)
    rows = rng.integers(0, 12, size=(20, 64), dtype=np.uint8)
    rows[0] = 0
    batch = hll_estimate_rows(rows)
    for i in range(20):
        assert batch[i] == pytest.approx(hll_estimate(rows[i]), rel=1e-12)


# --- extract_virtual --------------------------------------------------------


def test_extract_virtual_empty_array():
    arr = make_array()
    assert not arr.extract_virtual(12345).any()


def test_extract_virtual_is_read_only():
    arr = make_array()
    arr.encode(1, 2)
    before = arr.registers.copy()
    arr.extract_virtual(1)
    arr.extract_virtual_block(np.array([1, 2, 3], dtype=np.uint64))
    assert np.array_equal(arr.registers, before)


def test_single_host_registers_inside_virtual_set():
    arr = make_array(t=2048, f=128)
    src = 0x0B0B0B0B
    arr.encode_batch(
        np.full(400, src, dtype=np.uint64), np.arange(400, dtype=np.uint64)
    )
    touched = set(np.nonzero(arr._regs)[0].tolist())
    allowed = set(
        logical_indices(arr.hash, src, arr.virtual_size, arr.size).astype(int).tolist()
    )
    assert touched <= allowed


# --- estimate_rate -----------------------------------------------------------


def test_estimate_rate_zero_when_density_matches_average():
    assert estimate_rate(5.0, 5.0 * 4096 / 256, 256, 4096) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("k", [64, 1024, 65_536])
def test_estimate_rate_noise_free_identity(k):
    # with virtual and global estimates both equal to k the noise
    # cancellation returns k exactly
    assert estimate_rate(float(k), float(k), 512, 2**20) == pytest.approx(k, rel=1e-12)


def test_estimate_rate_rejects_equal_sizes():
    with pytest.raises(ParameterError):
        estimate_rate(5.0, 5.0, 512, 512)


def test_estimate_rate_worm_among_noise_monte_carlo():
    # one scanning host (6,000 distinct) over 5,000 hosts of 5 items
    # each, t = 2^20, f = 512: the 200-seed mean lands within 10%.
    t, f = 2**20, 512
    worm = np.uint64(0xBADBAD01)
    noise_src = np.repeat(np.arange(1, 5_001, dtype=np.uint64), 5)
    estimates = []
    for seed in range(200):
        cfg = HashConfig(index_seed=seed, dst_seed=seed + 1, key=3, r_seed=seed + 4, r_len=512)
        arr = RegisterArray(t, f, 5, 32, cfg)
        rng = np.random.default_rng(seed)
        arr.encode_batch(noise_src, rng.integers(0, 2**32, noise_src.size, dtype=np.uint64))
        arr.encode_batch(
            np.full(6_000, worm, dtype=np.uint64),
            rng.integers(0, 2**32, 6_000, dtype=np.uint64),
        )
        est = host_estimates(arr, int(worm))
        estimates.append(estimate_rate(est.virtual, est.global_, f, t))
    assert np.mean(estimates) == pytest.approx(6_000, rel=0.10)


# --- estimate_failure_rate ---------------------------------------------------


def test_failure_rate_symmetric_estimates_cancel():
    params = make_params()
    est = CardinalityEstimates(virtual=9.5, global_=120.0)
    assert estimate_failure_rate(est, est, params) == pytest.approx(0.0, abs=1e-12)


def test_failure_rate_small_host_monte_carlo():
    # normal-host regime: 5 SYNs, ~4.5 SYN-ACKs; 500-seed mean within
    # +/- 2 of the true 0.5 failures
    t, f = 8_192, 512
    diffs = []
    for seed in range(500):
        cfg = HashConfig(index_seed=seed, dst_seed=seed + 2, key=5, r_seed=seed + 6, r_len=512)
        params = RegisterParams(t, t, f, f, 5, 32, cfg)
        syn, ack = params.make_pair()
        rng = np.random.default_rng(seed)
        dsts = rng.integers(0, 2**32, 5, dtype=np.uint64)
        srcs = np.full(5, 31, dtype=np.uint64)
        syn.encode_batch(srcs, dsts)
        acked = rng.random(5) < 0.9
        ack.encode_batch(srcs[acked], dsts[acked])
        diffs.append(
            estimate_failure_rate(host_estimates(syn, 31), host_estimates(ack, 31), params)
        )
    assert abs(np.mean(diffs) - 0.5) <= 2.0


# --- invariants ---------------------------------------------------------------


@given(st.lists(st.tuples(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1)), min_size=1, max_size=25))
@settings(max_examples=25, deadline=None)
def test_registers_monotone_and_idempotent(pairs):
    arr = RegisterArray(512, 32, 5, 32, CFG)
    prev = arr.registers.copy()
    for s, d in pairs:
        arr.encode(s, d)
        now = arr.registers.copy()
        assert np.all(now >= prev)
        prev = now
    state = arr.registers.copy()
    for s, d in pairs:
        arr.encode(s, d)
    assert np.array_equal(arr.registers, state)


def test_noise_free_identity_through_sketch():
    # a single host in an otherwise empty array: the noise-cancelled
    # estimate recovers k within twice the standard HLL error
    t, f, k = 2**16, 512, 2_000
    bound = 2 * 1.04 / math.sqrt(f)
    estimates = []
    for seed in range(30):
        arr = make_array(t=t, f=f, seed=seed)
        rng = np.random.default_rng(seed)
        arr.encode_batch(
            np.full(k, 9, dtype=np.uint64), rng.integers(0, 2**32, k, dtype=np.uint64)
        )
        est = host_estimates(arr, 9)
        estimates.append(estimate_rate(est.virtual, est.global_, f, t))
    assert abs(np.mean(estimates) - k) / k <= bound


@pytest.mark.parametrize("k", [1_000, 10_000, 100_000, 1_000_000])
def test_scale_free_range(k):
    # the register sketch keeps its accuracy as the true count grows
    # three orders of magnitude at fixed f; no saturation ceiling
    t, f = 2**17, 512
    errors = []
    for seed in range(5):
        arr = make_array(t=t, f=f, seed=seed + 100)
        rng = np.random.default_rng(seed)
        arr.encode_batch(
            np.full(k, 5, dtype=np.uint64),
            rng.integers(0, 2**63, k, dtype=np.uint64),
        )
        est = host_estimates(arr, 5)
        errors.append(abs(estimate_rate(est.virtual, est.global_, f, t) - k) / k)
    assert np.mean(errors) <= 0.15


@given(
    nsa=st.floats(1.0, 1e6),
    nra=st.floats(1.0, 1e6),
    ns=st.floats(1.0, 1e7),
    nr=st.floats(1.0, 1e7),
)
@settings(max_examples=100, deadline=None)
def test_compact_form_equivalence_for_symmetric_params(nsa, nra, ns, nr):
    t, f = 4096, 256
    params = make_params(t, f)
    two_term = estimate_failure_rate(
        CardinalityEstimates(nsa, ns), CardinalityEstimates(nra, nr), params
    )
    compact = (t * f / (t - f)) * ((nsa - nra) / f - (ns - nr) / t)
    assert two_term == pytest.approx(compact, rel=1e-9, abs=1e-9)


def test_virtual_noise_expectation_with_exact_counts():
    # E[n_virtual_exact - own] = f * (n - k) / t, checked with exact
    # per-register item counts instead of estimates.  Own and noise
    # items are tallied separately so that repeated virtual slots count
    # both sides consistently.
    from failsketch.hashing import select_index_array

    t, f, k = 8_192, 512, 400
    n_noise = 20_000
    noise_src = np.arange(2, n_noise + 2, dtype=np.uint64)
    host = np.uint64(1)
    samples = []
    for seed in range(40):
        cfg = HashConfig(index_seed=seed, dst_seed=seed + 1, key=7, r_seed=seed + 8, r_len=512)
        rng = np.random.default_rng(seed)
        noise_dst = rng.integers(0, 2**32, noise_src.size, dtype=np.uint64)
        own_dst = rng.integers(0, 2**32, k, dtype=np.uint64)
        noise_pos = select_index_array(cfg, noise_src, noise_dst, f, t).astype(np.int64)
        own_pos = select_index_array(
            cfg, np.full(k, host, dtype=np.uint64), own_dst, f, t
        ).astype(np.int64)
        noise_count = np.bincount(noise_pos, minlength=t)
        vr_idx = logical_indices(cfg, int(host), f, t).astype(np.int64)
        noise_in_vr = noise_count[vr_idx].sum()
        assert np.isin(own_pos, vr_idx).all()  # own items stay inside the VR
        samples.append(noise_in_vr)
    expected = f * n_noise / t
    sigma = math.sqrt(expected)  # noise arrivals are Poisson-like
    assert abs(np.mean(samples) - expected) <= 3 * sigma / math.sqrt(len(samples))


def test_packed_payload_round_trip():
    arr = make_array(t=1000, f=64)
    rng = np.random.default_rng(11)
    arr.encode_batch(
        rng.integers(0, 2**32, 5_000, dtype=np.uint64),
        rng.integers(0, 2**32, 5_000, dtype=np.uint64),
    )
    payload = arr.to_bytes()
    assert len(payload) == (1000 * 5 + 7) // 8
    assert arr.payload_bits == 5_000
    other = make_array(t=1000, f=64)
    other.load_bytes(payload)
    assert np.array_equal(other._regs, arr._regs)
