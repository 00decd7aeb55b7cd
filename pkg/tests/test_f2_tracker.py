"""F2 tracker: exact small cases, reset semantics, tracking-property Monte Carlo."""

import math

import numpy as np
import pytest

from bpsketch.f2_tracker import F2Tracker, track_error_run
from bpsketch.oracle import exact_stats
from bpsketch.streams import StreamSpec, gen_stream


def test_sizing_from_epsilon_delta():
    t = F2Tracker(epsilon=0.01, delta=0.05, mode="median")
    assert t.buckets == math.ceil(12 / 0.01**2)
    assert t.rows == math.ceil(8 * math.log(1 / 0.05))
    # the doubling-schedule configuration
    t2 = F2Tracker(epsilon=1 / 100, delta=1 / 20)
    assert (t2.rows, t2.buckets) == (24, 120_000)


def test_explicit_shape_override():
    t = F2Tracker(rows=1, buckets=30, seed=3)
    assert t.counters.shape == (1, 30)
    assert t.state_bytes() == 8 * (30 + 6 + 1 + 2)


def test_validation():
    for eps in (0.0, 1.0, 2.0, -0.5):
        with pytest.raises(ValueError):
            F2Tracker(epsilon=eps, delta=0.1)
    with pytest.raises(ValueError):
        F2Tracker(epsilon=0.1, delta=1.5)
    with pytest.raises(ValueError):
        F2Tracker(rows=0, buckets=5)
    with pytest.raises(ValueError):
        F2Tracker()
    with pytest.raises(ValueError):
        F2Tracker(rows=2, buckets=2, mode="mean")


@pytest.mark.parametrize("mode", ["median", "eightwise"])
def test_empty_and_single_updates(mode):
    kwargs = {"rows": 3, "buckets": 5} if mode == "median" else {"rows": 3, "buckets": 4}
    t = F2Tracker(mode=mode, seed=1, **kwargs)
    assert t.query() == 0.0
    t.update(7)
    assert t.query() == 1.0  # each counter holds +-1; square is 1
    assert t.updates_seen == 1


@pytest.mark.parametrize("mode", ["median", "eightwise"])
@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_single_item_stream_exact_square(mode, seed):
    kwargs = {"rows": 2, "buckets": 6} if mode == "median" else {"rows": 2, "buckets": 3}
    t = F2Tracker(mode=mode, seed=seed, **kwargs)
    for step in range(1, 40):
        t.update(12345)
        assert t.query() == float(step * step)


def test_five_repeats_single_bucket():
    t = F2Tracker(rows=1, buckets=1, seed=9)
    t.process(np.full(5, 3, dtype=np.int64))
    assert t.query() == 25.0


def test_each_update_touches_one_cell_per_row_by_one():
    t = F2Tracker(rows=4, buckets=16, seed=10)
    prev = t.counters.copy()
    for item in (3, 9, 3, 77):
        t.update(item)
        delta = t.counters - prev
        assert np.all(np.count_nonzero(delta, axis=1) == 1)
        assert set(np.abs(delta[delta != 0])) == {1}
        prev = t.counters.copy()


def test_reset_zeroes_and_reseeds():
    t = F2Tracker(rows=2, buckets=8, seed=1)
    t.process(np.arange(50, dtype=np.int64))
    old_params = t.params.copy()
    t.reset(seed=2)
    assert t.query() == 0.0
    assert t.updates_seen == 0
    assert not np.array_equal(t.params, old_params)


def test_reset_estimates_suffix_only_exact_case():
    # suffix after reset is one repeated item: estimate is exactly t^2
    t = F2Tracker(rows=1, buckets=30, seed=5)
    t.process(np.arange(100, dtype=np.int64))
    t.reset(seed=6)
    t.process(np.full(50, 7, dtype=np.int64))
    assert t.query() == 2500.0


def test_reset_estimates_suffix_statistically():
    # suffix F2 against the exact oracle on a mixed 100-update suffix
    stream = gen_stream(StreamSpec(n=60, alpha=5, kind="random", seed=3))
    prefix, suffix = stream[:40], stream[40:]
    suffix_f2 = exact_stats(suffix).f2
    errors = []
    for seed in range(30):
        t = F2Tracker(rows=5, buckets=64, seed=seed)
        t.process(prefix)
        t.reset(seed=1000 + seed)
        t.process(suffix)
        errors.append(abs(t.query() - suffix_f2) / suffix_f2)
    assert sorted(errors)[len(errors) // 2] < 0.5  # median error well under 50%


def test_reset_determinism():
    results = []
    for _ in range(2):
        t = F2Tracker(rows=2, buckets=4, seed=3)
        t.process(np.arange(20, dtype=np.int64))
        t.reset(seed=77)
        t.process(np.arange(20, 40, dtype=np.int64))
        results.append((t.query(), t.counters.copy()))
    assert results[0][0] == results[1][0]
    assert np.array_equal(results[0][1], results[1][1])


def test_scale_equivariance():
    base = np.array([1, 5, 2, 5, 9], dtype=np.int64)
    c = 3
    t1 = F2Tracker(rows=2, buckets=4, seed=8)
    t1.process(base)
    t2 = F2Tracker(rows=2, buckets=4, seed=8)
    t2.process(np.repeat(base, c))
    assert np.array_equal(t2.counters, c * t1.counters)
    assert t2.raw_estimate() == c * c * t1.raw_estimate()


def test_monotone_output():
    t = F2Tracker(rows=1, buckets=4, seed=2)
    prev = 0.0
    for item in np.random.default_rng(0).integers(0, 50, size=500):
        t.update(int(item))
        q = t.query()
        assert q >= prev
        prev = q


@pytest.mark.slow
def test_tracking_property_monte_carlo():
    # (eps=0.1, delta=0.05) sizing: sup_t |est - F2(t)| <= 2 eps F2 in >= 90%
    # of independent seeds on a random-placement stream
    eps, delta = 0.1, 0.05
    stream = gen_stream(StreamSpec(n=100_000, alpha=1, kind="random", seed=21))
    f2_final = exact_stats(stream).f2
    trials = 50
    sup_ok = 0
    end_ok = 0
    for seed in range(trials):
        t = F2Tracker(epsilon=eps, delta=delta, seed=3000 + seed)
        counts = np.zeros(int(stream.max()) + 1, dtype=np.int64)
        worst, f2 = track_error_run(
            stream, t.params, t.counters, t.rowsums, t.meta, t.scratch, counts
        )
        assert f2 == f2_final
        if worst <= 2 * eps * f2_final:
            sup_ok += 1
        if abs(t.query() - f2_final) <= eps * f2_final:
            end_ok += 1
    assert sup_ok >= 0.9 * trials
    assert end_ok >= (1 - delta) * trials


@pytest.mark.slow
def test_eightwise_end_estimate():
    # the degree-8 single-counter form: end-of-stream additive error
    eps, delta = 0.5, 0.2
    stream = gen_stream(StreamSpec(n=1000, alpha=2, kind="random", seed=13))
    f2 = exact_stats(stream).f2
    hits = 0
    trials = 40
    for seed in range(trials):
        t = F2Tracker(epsilon=eps, delta=delta, mode="eightwise", seed=500 + seed)
        t.process(stream)
        if abs(t.query() - f2) <= eps * f2:
            hits += 1
    assert hits >= (1 - delta) * trials
