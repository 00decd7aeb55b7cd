"""CountSketch: exactness, linearity, collision oracles, candidate tracking."""

import math

import numpy as np
import pytest

from bpsketch.countsketch import CountSketch, baseline_rows
from bpsketch.fieldops import P61, mulmod61
from bpsketch.oracle import exact_stats, tail_norm
from bpsketch.streams import StreamSpec, gen_stream


def _row_bucket(cs, row, item):
    v = mulmod61(int(cs.params[row, 1]), item) + int(cs.params[row, 0])
    if v >= P61:
        v -= P61
    return v % cs.buckets


def _row_sign(cs, row, item):
    acc = 0
    for c in cs.params[row, 2:]:
        acc = (mulmod61(acc, item) + int(c)) % P61
    return 1 - ((acc & 1) << 1)


def test_dimension_validation():
    with pytest.raises(ValueError):
        CountSketch(rows=0, buckets=2)
    with pytest.raises(ValueError):
        CountSketch(rows=2, buckets=0)
    with pytest.raises(ValueError):
        CountSketch(rows=2, buckets=2, sign_degree=1)


def test_baseline_configuration():
    cs = CountSketch.baseline(10**6, seed=1)
    assert cs.rows == baseline_rows(10**6) == math.ceil(3 + math.log2(10**6))
    assert cs.buckets == 2
    assert cs.sign_degree == 4
    assert cs.track_candidate


def test_empty_sketch_estimates_zero():
    cs = CountSketch(rows=3, buckets=4, seed=2)
    for item in (0, 5, 99):
        assert cs.estimate(item) == 0


def test_single_item_exact():
    cs = CountSketch(rows=4, buckets=8, seed=3)
    cs.process(np.full(37, 11, dtype=np.int64))
    assert cs.estimate(11) == 37


def test_update_touches_one_cell_per_row():
    cs = CountSketch(rows=3, buckets=4, seed=4)
    cs.update(9)
    assert np.count_nonzero(cs.table) == 3
    for row in range(3):
        assert abs(cs.table[row, _row_bucket(cs, row, 9)]) == 1


def test_opposite_sign_collision_cancels():
    # b=1 forces collision in the single row; search a seed with opposite signs
    for seed in range(200):
        cs = CountSketch(rows=1, buckets=1, seed=seed)
        if _row_sign(cs, 0, 1) != _row_sign(cs, 0, 2):
            cs.update(1)
            cs.update(2)
            assert cs.estimate(1) == 0  # cancellation
            return
    pytest.fail("no opposite-sign seed found in 200 tries")


def test_linearity_over_concatenation():
    s1 = gen_stream(StreamSpec(n=100, alpha=4, kind="random", seed=5))
    s2 = gen_stream(StreamSpec(n=100, alpha=2, kind="start", seed=6))
    a = CountSketch(rows=4, buckets=8, seed=7)
    a.process(np.concatenate([s1, s2]))
    b1 = CountSketch(rows=4, buckets=8, seed=7)
    b1.process(s1)
    b2 = CountSketch(rows=4, buckets=8, seed=7)
    b2.process(s2)
    assert np.array_equal(a.table, b1.table + b2.table)


def test_estimate_error_bounded_by_collision_mass():
    # exact per-row oracle: |row est - f_i| <= l1 mass of colliding items
    n, rows, buckets = 16, 5, 4
    stream = gen_stream(StreamSpec(n=n, alpha=2, kind="random", seed=8))
    stats = exact_stats(stream)
    cs = CountSketch(rows=rows, buckets=buckets, seed=9)
    cs.process(stream)
    for item in range(n + 1):
        f_true = stats.freq(item)
        within = 0
        masses = []
        for row in range(rows):
            bucket = _row_bucket(cs, row, item)
            colliders = [
                j for j in range(n + 1) if j != item and _row_bucket(cs, row, j) == bucket
            ]
            mass = sum(stats.freq(j) for j in colliders)
            masses.append(mass)
            row_est = _row_sign(cs, row, item) * int(cs.table[row, bucket])
            if abs(row_est - f_true) <= mass:
                within += 1
        assert within >= 4  # >= 4/5 rows (holds in all rows for l1 mass)
        # the median is one of the row values, so it inherits the worst bound
        assert abs(cs.estimate(item) - f_true) <= max(masses)


@pytest.mark.slow
def test_planted_heavy_estimate_within_ten():
    hits = 0
    trials = 100
    for seed in range(trials):
        stream = np.concatenate(
            [np.full(100, 0, dtype=np.int64), np.arange(1, 201, dtype=np.int64)]
        )
        rng = np.random.default_rng(seed)
        rng.shuffle(stream)
        cs = CountSketch(rows=5, buckets=32, seed=600 + seed)
        cs.process(stream)
        if abs(cs.estimate(0) - 100) <= 10:
            hits += 1
    assert hits >= 95


@pytest.mark.slow
def test_tail_guarantee_spot_check():
    # |est - f| <= 3 * ||f_tail(k)||_2 / sqrt(b) for most items, k = buckets
    stream = gen_stream(StreamSpec(n=2000, alpha=8, kind="random", seed=10))
    stats = exact_stats(stream)
    buckets = 64
    cs = CountSketch(rows=5, buckets=buckets, seed=11)
    cs.process(stream)
    bound = 3 * tail_norm(stats, buckets) / math.sqrt(buckets)
    ok = sum(
        1 for item in range(0, 2001) if abs(cs.estimate(item) - stats.freq(item)) <= bound
    )
    assert ok >= 0.9 * 2001


def test_candidate_single_item():
    cs = CountSketch(rows=3, buckets=4, seed=12, track_candidate=True)
    assert cs.top_candidate() == CountSketch.SENTINEL
    cs.process(np.full(10, 5, dtype=np.int64))
    assert cs.top_candidate() == 5


def test_candidate_requires_mode():
    cs = CountSketch(rows=3, buckets=4, seed=13)
    with pytest.raises(ValueError):
        cs.top_candidate()


@pytest.mark.slow
def test_candidate_success_rates():
    # random placement (the reliable comparison regime): near-certain.
    # start kind: items colliding with the leader in most rows can usurp it
    # after its run ends; at desk scale (20 rows) the measured rate is ~0.79,
    # frozen here with noise margin.
    n = 100_000
    trials = 100
    wins = {"random": 0, "start": 0}
    for kind in wins:
        for seed in range(trials):
            stream = gen_stream(StreamSpec(n=n, alpha=64, kind=kind, seed=700 + seed))
            cs = CountSketch.baseline(n, seed=800 + seed)
            cs.process(stream)
            wins[kind] += 1 if cs.top_candidate() == 0 else 0
    assert wins["random"] >= 95
    assert wins["start"] >= 65


def test_f2_estimate_single_item():
    cs = CountSketch(rows=3, buckets=4, seed=14)
    cs.process(np.full(6, 9, dtype=np.int64))
    assert cs.f2_estimate() == 36


def test_state_bytes_grow_with_rows():
    sizes = [CountSketch.baseline(n, seed=1).state_bytes() for n in (10**4, 10**6, 10**8)]
    assert sizes == sorted(sizes)
    assert sizes[0] < sizes[-1]
