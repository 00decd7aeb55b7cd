"""Bucketed reduction: config defaults, filtering, both modes, serialization."""

import numpy as np
import pytest

from bpsketch.bptree import BpTree, BpTreeConfig
from bpsketch.oracle import exact_stats, tail_norm
from bpsketch.streams import (
    StreamSpec,
    gen_stream,
    multi_heavy_stream,
    solve_heavy_freqs,
)


def test_config_defaults():
    cfg = BpTreeConfig(epsilon=1.0, delta=1 / 16, n=1000)
    assert cfg.buckets == 1024  # ceil((32/eps)^2)
    assert cfg.rows == 7  # ceil(log2(16)) + 3
    cfg2 = BpTreeConfig(epsilon=0.5, delta=0.1, n=1000)
    assert cfg2.buckets == 4096
    assert cfg2.rows == 8


def test_config_explicit_passthrough():
    cfg = BpTreeConfig(epsilon=0.5, delta=0.1, n=100, buckets=4, rows=3)
    assert (cfg.buckets, cfg.rows) == (4, 3)


def test_config_validation():
    with pytest.raises(ValueError):
        BpTreeConfig(epsilon=0.0, delta=0.1, n=10)
    with pytest.raises(ValueError):
        BpTreeConfig(epsilon=1.5, delta=0.1, n=10)
    with pytest.raises(ValueError):
        BpTreeConfig(epsilon=0.5, delta=0.0, n=10)
    with pytest.raises(ValueError):
        BpTreeConfig(epsilon=0.5, delta=0.1, n=0)
    with pytest.raises(ValueError):
        BpTreeConfig(epsilon=0.5, delta=0.1, n=10, mode="turbo")


def test_empty_stream_returns_empty():
    for mode in ("standard", "fast"):
        bp = BpTree(BpTreeConfig(epsilon=0.5, delta=0.2, n=100, buckets=8, rows=2, mode=mode))
        assert bp.query() == []


def test_single_repeated_item():
    for mode in ("standard", "fast"):
        bp = BpTree(
            BpTreeConfig(epsilon=1.0, delta=0.2, n=50, buckets=8, rows=3, seed=4, mode=mode)
        )
        bp.process(np.full(400, 13, dtype=np.int64))
        result = bp.query()
        assert result[0][0] == 13
        assert result[0][1] == 400  # exact: nothing collides


def test_candidate_pool_bounded():
    bp = BpTree(BpTreeConfig(epsilon=0.5, delta=0.2, n=1000, buckets=8, rows=3, seed=5))
    bp.process(gen_stream(StreamSpec(n=1000, alpha=8, kind="random", seed=6)))
    assert len(bp.candidates()) <= 2 * 8 * 3


def test_live_tracker_instrumentation():
    std = BpTree(BpTreeConfig(epsilon=0.5, delta=0.2, n=100, buckets=8, rows=2))
    assert std.live_tracker_count == 16
    fast = BpTree(BpTreeConfig(epsilon=0.5, delta=0.2, n=100, buckets=8, rows=2, mode="fast"))
    assert fast.live_tracker_count == 1


def test_fast_mode_restart_schedule():
    # single repeated item: tracked estimate is t^2 per suffix; restarts
    # must be observed and sigma follows (eps/16) * 2^(k/2)
    cfg = BpTreeConfig(epsilon=0.5, delta=0.2, n=50, buckets=4, rows=2, seed=7, mode="fast")
    bp = BpTree(cfg)
    bp.process(np.full(200, 9, dtype=np.int64))
    assert bp.restarts >= 3
    k = int(bp.fi[0])
    expected_sigma = max(cfg.epsilon / 16.0 * 2 ** (k / 2.0), 1.0)
    assert bp.hf[0, 0, 0] == pytest.approx(expected_sigma)


def test_fast_mode_retention_prefers_larger_estimate():
    # after the run of a huge item, a later small item must not evict it
    cfg = BpTreeConfig(epsilon=1.0, delta=0.2, n=20, buckets=1, rows=1, seed=8, mode="fast")
    bp = BpTree(cfg)
    bp.process(np.full(500, 3, dtype=np.int64))
    bp.process(np.full(20, 5, dtype=np.int64))  # forces restarts with 3 retained
    result = dict(bp.query())
    assert 3 in result


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["standard", "fast"])
def test_planted_heavy_found(mode):
    # one eps-heavy item; config per the reduction defaults
    n = 100_000
    eps, delta = 0.5, 0.1
    trials = 40
    wins = 0
    for seed in range(trials):
        freqs = solve_heavy_freqs(n, [eps])
        stream = multi_heavy_stream(n, freqs, seed=100 + seed)
        bp = BpTree(BpTreeConfig(epsilon=eps, delta=delta, n=n + 1, seed=200 + seed, mode=mode))
        bp.process(stream)
        wins += 1 if 0 in dict(bp.query()) else 0
    assert wins >= (1 - delta) * trials


@pytest.mark.slow
def test_uniform_stream_returns_no_uncertified_items():
    # no heavy item present: anything returned must be oracle-certified
    # eps/2-heavy up to the estimator tolerance (eps/4) * sqrt(F2)
    n, eps = 20_000, 0.5
    stream = np.arange(n, dtype=np.int64)
    stats = exact_stats(stream)
    bad = 0
    for seed in range(10):
        bp = BpTree(BpTreeConfig(epsilon=eps, delta=0.1, n=n, seed=300 + seed))
        bp.process(stream)
        for item, est in bp.query():
            f = stats.freq(item)
            if f * f < (eps / 2) ** 2 * (stats.f2 - f * f) - (eps / 4) ** 2 * stats.f2:
                bad += 1
    assert bad == 0


@pytest.mark.slow
def test_two_tier_filtering():
    # 2eps-heavy kept, eps/4-heavy dropped
    n, eps, delta = 10_000, 0.5, 0.1
    trials = 40
    kept, dropped = 0, 0
    freqs = solve_heavy_freqs(n, [2 * eps, eps / 4])
    for seed in range(trials):
        stream = multi_heavy_stream(n, freqs, seed=400 + seed)
        bp = BpTree(BpTreeConfig(epsilon=eps, delta=delta, n=n + 2, seed=500 + seed))
        bp.process(stream)
        result = dict(bp.query())
        kept += 1 if 0 in result else 0
        dropped += 0 if 1 in result else 1
    assert kept >= 0.9 * trials
    assert dropped >= 0.9 * trials


@pytest.mark.slow
def test_tail_guarantee():
    # every returned estimate within eps * ||f_tail(1/eps^2)|| of the truth
    n, eps = 10_000, 0.5
    trials = 30
    ok = 0
    freqs = solve_heavy_freqs(n, [2 * eps, eps])
    for seed in range(trials):
        stream = multi_heavy_stream(n, freqs, seed=600 + seed)
        stats = exact_stats(stream)
        bound = eps * tail_norm(stats, round(1 / eps**2))
        bp = BpTree(BpTreeConfig(epsilon=eps, delta=0.1, n=n + 2, seed=700 + seed))
        bp.process(stream)
        if all(abs(est - stats.freq(item)) <= bound for item, est in bp.query()):
            ok += 1
    assert ok >= 0.9 * trials


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["standard", "fast"])
def test_snapshot_resume_matches_uninterrupted(mode):
    stream = gen_stream(StreamSpec(n=5000, alpha=32, kind="random", seed=9))
    cfg = BpTreeConfig(epsilon=1.0, delta=0.2, n=5000, buckets=16, rows=3, seed=10, mode=mode)
    full = BpTree(cfg)
    full.process(stream)

    half = BpTree(cfg)
    half.process(stream[:2500])
    resumed = BpTree.from_bytes(half.to_bytes())
    resumed.process(stream[2500:])
    assert resumed.query() == full.query()
    assert resumed.to_bytes() == full.to_bytes()


def test_snapshot_rejects_garbage():
    bp = BpTree(BpTreeConfig(epsilon=1.0, delta=0.2, n=10, buckets=4, rows=2))
    blob = bp.to_bytes()
    with pytest.raises(ValueError, match="magic"):
        BpTree.from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ValueError, match="version"):
        BpTree.from_bytes(blob[:4] + b"\xff\xff" + blob[6:])
    with pytest.raises(ValueError, match="truncated"):
        BpTree.from_bytes(blob[:-8])
    with pytest.raises(ValueError, match="trailing"):
        BpTree.from_bytes(blob + b"\x00" * 8)
