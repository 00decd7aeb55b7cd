"""CountSketch: the comparison baseline and the auxiliary frequency estimator.

An r x b table of signed counters; each row owns a pairwise bucket hash
and a sign hash (degree 2 by default, configurable).  Frequency
estimates are the lower median over rows of the sign-corrected cell
values.  The table is linear in the stream, and its per-row sums of
squared cells double as F2 estimates.

``track_candidate=True`` enables the single-heavy-hitter experiment
mode: after each update the updated item's estimate is compared with
the stored estimate of the current top candidate, mirroring the
priority-heap behavior of the classic top-k structure (an item that
collides with the leader in every row and arrives later can usurp it).
"""

import math

import numpy as np

from ._backend import kernel
from .fieldops import (
    P61,
    derive_table_params,
    fold_seed,
    mulmod61,
    poly_sign61,
    reduce61,
    sign2_scalar,
)

SENTINEL = -1

_CS_PARAM_BASE = 4000

DEFAULT_BUCKETS = 2


def baseline_rows(n: int) -> int:
    """Rows used by the smallest-space reliable baseline: ceil(3 + log2 n)."""
    return math.ceil(3 + math.log2(n))


@kernel
def cs_touch(params, table, x):
    degree2 = params.shape[1] == 4
    for rr in range(table.shape[0]):
        v = mulmod61(params[rr, 1], x) + params[rr, 0]
        if v >= P61:
            v -= P61
        bucket = v % table.shape[1]
        if degree2:
            s = sign2_scalar(params[rr, 2], params[rr, 3], x)
        else:
            s = poly_sign61(params[rr, 2:], x)
        table[rr, bucket] += s


@kernel
def cs_estimate(params, table, x, scratch):
    """Lower median over rows of sign(i) * cell(i)."""
    rows = table.shape[0]
    degree2 = params.shape[1] == 4
    for rr in range(rows):
        v = mulmod61(params[rr, 1], x) + params[rr, 0]
        if v >= P61:
            v -= P61
        bucket = v % table.shape[1]
        if degree2:
            s = sign2_scalar(params[rr, 2], params[rr, 3], x)
        else:
            s = poly_sign61(params[rr, 2:], x)
        scratch[rr] = s * table[rr, bucket]
    for i in range(1, rows):
        key = scratch[i]
        j = i - 1
        while j >= 0 and scratch[j] > key:
            scratch[j + 1] = scratch[j]
            j -= 1
        scratch[j + 1] = key
    return scratch[(rows - 1) // 2]


@kernel
def cs_touch_track(params, table, cand, scratch, item, x):
    cs_touch(params, table, x)
    est = cs_estimate(params, table, x, scratch)
    if item == cand[0]:
        cand[1] = est
    elif cand[0] < 0 or est > cand[1]:
        cand[0] = item
        cand[1] = est


@kernel
def _cs_process(stream, params, table):
    for t in range(stream.shape[0]):
        cs_touch(params, table, reduce61(stream[t]))


@kernel
def _cs_process_track(stream, params, table, cand, scratch):
    for t in range(stream.shape[0]):
        item = stream[t]
        cs_touch_track(params, table, cand, scratch, item, reduce61(item))


@kernel
def cs_row_f2_median(table, scratch):
    """Lower median over rows of the sum of squared cells (an F2 estimate)."""
    rows = table.shape[0]
    for rr in range(rows):
        acc = 0
        for j in range(table.shape[1]):
            c = table[rr, j]
            acc += c * c
        scratch[rr] = acc
    for i in range(1, rows):
        key = scratch[i]
        j = i - 1
        while j >= 0 and scratch[j] > key:
            scratch[j + 1] = scratch[j]
            j -= 1
        scratch[j + 1] = key
    return scratch[(rows - 1) // 2]


class CountSketch:
    SENTINEL = SENTINEL

    def __init__(
        self,
        rows: int,
        buckets: int,
        seed: int = 0,
        *,
        sign_degree: int = 2,
        track_candidate: bool = False,
    ):
        if rows < 1 or buckets < 1:
            raise ValueError("rows and buckets must be >= 1")
        if sign_degree < 2:
            raise ValueError("sign_degree must be >= 2")
        self.rows = int(rows)
        self.buckets = int(buckets)
        self.sign_degree = int(sign_degree)
        self.track_candidate = bool(track_candidate)
        self._seed = fold_seed(seed)
        self.params = np.zeros((self.rows, 2 + self.sign_degree), dtype=np.int64)
        derive_table_params(self.params, self._seed, _CS_PARAM_BASE)
        self.table = np.zeros((self.rows, self.buckets), dtype=np.int64)
        self.cand = np.array([SENTINEL, 0], dtype=np.int64)
        self.scratch = np.zeros(self.rows, dtype=np.int64)

    @classmethod
    def baseline(cls, n: int, seed: int = 0, **kwargs) -> "CountSketch":
        """The smallest-space single-heavy-hitter comparison configuration.

        Matches the benchmarked setup: 2 buckets, ceil(3 + log2 n) rows,
        four-wise per-row hashing, candidate tracking on.
        """
        kwargs.setdefault("track_candidate", True)
        kwargs.setdefault("sign_degree", 4)
        return cls(rows=baseline_rows(n), buckets=DEFAULT_BUCKETS, seed=seed, **kwargs)

    def update(self, item: int) -> None:
        if item < 0:
            raise ValueError("item ids must be nonnegative")
        x = reduce61(int(item))
        if self.track_candidate:
            cs_touch_track(self.params, self.table, self.cand, self.scratch, int(item), x)
        else:
            cs_touch(self.params, self.table, x)

    def process(self, items) -> None:
        items = np.ascontiguousarray(items, dtype=np.int64)
        if items.size and items.min() < 0:
            raise ValueError("item ids must be nonnegative")
        if self.track_candidate:
            _cs_process_track(items, self.params, self.table, self.cand, self.scratch)
        else:
            _cs_process(items, self.params, self.table)

    def estimate(self, item: int) -> int:
        return int(cs_estimate(self.params, self.table, reduce61(int(item)), self.scratch))

    def top_candidate(self) -> int:
        """Item with the largest estimate seen so far; -1 before any update."""
        if not self.track_candidate:
            raise ValueError("candidate tracking not enabled")
        return int(self.cand[0])

    def f2_estimate(self) -> int:
        return int(cs_row_f2_median(self.table, self.scratch))

    def state_bytes(self) -> int:
        extra = 2 if self.track_candidate else 0
        return 8 * (self.table.size + self.params.size + extra)
