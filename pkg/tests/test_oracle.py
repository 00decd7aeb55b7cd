"""Ground-truth module: exact stats, heavy sets, tails, supremum statistics."""

import itertools
import math

import numpy as np
import pytest

from bpsketch.hashing import PairwiseHash, TinyGf2SignFamily
from bpsketch.oracle import (
    SUP_RATIO_BOUND,
    active_sets,
    exact_stats,
    heavy_set,
    running_sup,
    sup_process_estimate,
    tail_norm,
)
from bpsketch.streams import StreamSpec, gen_stream


def test_exact_stats_basic():
    stats = exact_stats([1, 2, 1])
    assert stats.freq(1) == 2 and stats.freq(2) == 1
    assert stats.f2 == 5
    assert stats.f0 == 2
    assert stats.length == 3


def test_exact_stats_empty():
    stats = exact_stats([])
    assert (stats.f2, stats.f0, stats.length) == (0, 0, 0)


def test_exact_stats_generated_spec():
    # n=100, alpha=2: heavy freq 20 -> F2 = 100 + 400 = 500
    stats = exact_stats(gen_stream(StreamSpec(n=100, alpha=2, kind="random", seed=1)))
    assert stats.f2 == 500
    assert stats.f0 == 101


def test_self_consistency():
    stream = gen_stream(StreamSpec(n=250, alpha=3, kind="blocks", seed=2))
    stats = exact_stats(stream)
    assert int(stats.counts.sum()) == stats.length == stream.size
    assert int((stats.counts**2).sum()) == stats.f2
    assert (stats.counts > 0).all() and stats.f0 == stats.items.size


def test_f2_prefix_curve():
    stats = exact_stats([5, 5, 7, 5], with_prefix=True)
    assert list(stats.f2_prefix) == [0, 1, 4, 5, 10]
    assert stats.f2_prefix[-1] == stats.f2


def test_heavy_set_cases():
    single = exact_stats([9, 9, 9])
    assert heavy_set(single, 5.0) == {9}  # lone item is heavy at any eps

    planted = exact_stats(gen_stream(StreamSpec(n=100, alpha=2, kind="start", seed=1)))
    assert heavy_set(planted, 1.0) == {0}  # 400 >= 1 * (500 - 400)

    uniform = exact_stats(np.arange(100))
    assert heavy_set(uniform, 1.0) == set()

    with pytest.raises(ValueError):
        heavy_set(uniform, 0.0)


def test_tail_norm_cases():
    stats = exact_stats([1, 1, 2, 3])
    assert tail_norm(stats, 0) == pytest.approx(math.sqrt(stats.f2))
    assert tail_norm(stats, 1) == pytest.approx(math.sqrt(2.0))
    assert tail_norm(stats, 10) == 0.0
    with pytest.raises(ValueError):
        tail_norm(stats, -1)


# ---------------------------------------------------------------------------
# running-supremum statistic
# ---------------------------------------------------------------------------


def test_sup_single_item_stream_is_exactly_one():
    stream = np.full(500, 3, dtype=np.int64)
    assert sup_process_estimate(stream, trials=20, seed=4) == 1.0


def test_sup_two_item_alternating_exact_enumeration():
    # stream a,b,a,b: enumerate all 4 sign assignments by hand:
    # sup values 4,1,1,4 -> E sup = 2.5, ratio 2.5/sqrt(8)
    stream = [0, 1, 0, 1]
    expected = 2.5 / math.sqrt(8.0)
    # independent-sign enumeration
    total = 0.0
    for za, zb in itertools.product((-1, 1), repeat=2):
        total += running_sup(stream, lambda i, za=za, zb=zb: za if i == 0 else zb)
    assert total / 4 / math.sqrt(8.0) == pytest.approx(expected)
    # a 4-wise family over GF(8) reproduces the expectation exactly over
    # its full seed space (signs on 2 points are exactly uniform)
    fam_total = 0.0
    families = list(TinyGf2SignFamily.enumerate_all(4, m=3))
    for fam in families:
        fam_total += running_sup(stream, fam.eval)
    assert fam_total / len(families) / math.sqrt(8.0) == pytest.approx(expected)


def test_sup_monte_carlo_under_ceiling():
    stream = gen_stream(StreamSpec(n=10_000, alpha=1, kind="random", seed=6))
    ratio = sup_process_estimate(stream, trials=200, degree=4, seed=11)
    assert ratio < SUP_RATIO_BOUND
    assert ratio < 5.0  # expected well under the proof constant


def test_sup_validation():
    with pytest.raises(ValueError):
        sup_process_estimate([1, 2], trials=0)
    assert sup_process_estimate([], trials=3) == 0.0


# ---------------------------------------------------------------------------
# active-set reconstruction
# ---------------------------------------------------------------------------


def test_active_sets_empty_prefix():
    h = PairwiseHash(p=31, a0=3, a1=5, n=16)
    match, boundary = active_sets(h, [], range(16), exclude=7)
    assert match == set(range(16)) - {7}
    assert boundary == set()


def test_active_sets_hand_table():
    # explicit 3-bit labels for 8 items
    table = {0: 0b000, 1: 0b001, 2: 0b010, 3: 0b011, 4: 0b100, 5: 0b101, 6: 0b110, 7: 0b111}
    match, boundary = active_sets(table, [1, 0], table.keys(), width=3)
    assert match == {4, 5}  # labels 10x
    assert boundary == {6, 7}  # matched first bit 1, failed second bit 0


def test_active_sets_nesting_and_injective_exhaustion():
    h = PairwiseHash(p=61, a0=11, a1=7, n=32)
    items = range(32)
    bits = []
    previous = set(items)
    # follow an arbitrary path; matching sets must be nested
    label = h.eval(13)
    for r in range(1, h.bit_width + 1):
        bits.append((label >> (h.bit_width - r)) & 1)
        match, boundary = active_sets(h, bits, items)
        assert match <= previous
        assert boundary == previous - match
        previous = match
    assert match == {13}  # injective hash: the full path isolates one item
