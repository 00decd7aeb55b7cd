"""Running second-moment (F2) estimation with an at-all-times guarantee.

Two layouts are provided:

* ``median`` (default): an r x b table of signed counters.  Each row
  hashes items into b buckets with a pairwise hash and adds a degree-4
  sign; the row estimate is the sum of squared bucket counters, and the
  query is the lower median over rows.  This is the configuration the
  benchmark experiments use.
* ``eightwise``: the classic single-counter estimator made trackable -
  k rows of one counter each driven by degree-8 signs, averaged, then
  lower-medianed over independent copies.

The reported estimate is the running maximum of the median, which makes
the output monotone like the true (insertion-only) second moment and is
the form whose at-all-times error bound holds; ``raw_estimate`` exposes
the instantaneous median.

Counters are signed 64-bit; behavior is undefined once a row's sum of
squares exceeds 2^62 (streams of length up to ~3e9 are safe).
"""

import math

import numpy as np

from ._backend import kernel
from .fieldops import (
    P61,
    derive61,
    derive_table_params,
    fold_seed,
    mulmod61,
    poly_sign61,
    reduce61,
    sign4_scalar,
)

TRK_PARAM_BASE = 2000
_TRK8_PARAM_BASE = 3000

SIZE_FACTOR_BUCKETS = 12.0  # buckets (or rows-per-copy) = ceil(12 / eps^2)
SIZE_FACTOR_ROWS = 8.0  # rows (or copies) = ceil(8 * ln(1/delta))


@kernel
def _derive_eight_params(params, seed):
    for rr in range(params.shape[0]):
        base = _TRK8_PARAM_BASE + 16 * rr
        for j in range(params.shape[1]):
            params[rr, j] = derive61(seed, base + j)


@kernel
def _lower_median(values, scratch):
    r = values.shape[0]
    for i in range(r):
        scratch[i] = values[i]
    for i in range(1, r):
        key = scratch[i]
        j = i - 1
        while j >= 0 and scratch[j] > key:
            scratch[j + 1] = scratch[j]
            j -= 1
        scratch[j + 1] = key
    return scratch[(r - 1) // 2]


@kernel
def tracker_touch(params, counters, rowsums, meta, scratch, x):
    """One median-mode update; returns the latched running-max median."""
    rows = counters.shape[0]
    b = counters.shape[1]
    for rr in range(rows):
        v = mulmod61(params[rr, 1], x) + params[rr, 0]
        if v >= P61:
            v -= P61
        bucket = v % b
        s = sign4_scalar(params[rr, 2], params[rr, 3], params[rr, 4], params[rr, 5], x)
        old = counters[rr, bucket]
        new = old + s
        counters[rr, bucket] = new
        rowsums[rr] += new * new - old * old
    if rows == 1:
        med = rowsums[0]
    else:
        med = _lower_median(rowsums, scratch)
    if med > meta[0]:
        meta[0] = med
    meta[1] += 1
    return meta[0]


@kernel
def tracker_touch_eight(params, counters, rowsums, meta, scratch, x):
    """One eightwise-mode update across all copies; returns latched median."""
    copies = counters.shape[0]
    k = counters.shape[1]
    for mi in range(copies):
        row_base = mi * k
        for j in range(k):
            s = poly_sign61(params[row_base + j], x)
            old = counters[mi, j]
            new = old + s
            counters[mi, j] = new
            rowsums[mi] += new * new - old * old
    if copies == 1:
        med = rowsums[0]
    else:
        med = _lower_median(rowsums, scratch)
    if med > meta[0]:
        meta[0] = med
    meta[1] += 1
    return meta[0]


@kernel
def _process_median(stream, params, counters, rowsums, meta, scratch):
    for t in range(stream.shape[0]):
        tracker_touch(params, counters, rowsums, meta, scratch, reduce61(stream[t]))


@kernel
def _process_eight(stream, params, counters, rowsums, meta, scratch):
    for t in range(stream.shape[0]):
        tracker_touch_eight(params, counters, rowsums, meta, scratch, reduce61(stream[t]))


@kernel
def track_error_run(stream, params, counters, rowsums, meta, scratch, exact_counts):
    """Feed a stream, returning (max_t |est(t) - F2(t)|, final exact F2).

    ``exact_counts`` must be a zeroed scratch array indexed by item id.
    Median mode only (the benchmark-grid configuration).
    """
    f2 = 0
    worst = 0.0
    for t in range(stream.shape[0]):
        item = stream[t]
        c = exact_counts[item]
        f2 += 2 * c + 1
        exact_counts[item] = c + 1
        est = tracker_touch(params, counters, rowsums, meta, scratch, reduce61(item))
        err = float(est - f2)
        if err < 0.0:
            err = -err
        if err > worst:
            worst = err
    return worst, f2


class F2Tracker:
    """Streaming F2 estimator; see module docstring for the two modes."""

    def __init__(
        self,
        epsilon: float | None = None,
        delta: float | None = None,
        *,
        rows: int | None = None,
        buckets: int | None = None,
        mode: str = "median",
        seed: int = 0,
    ):
        if mode not in ("median", "eightwise"):
            raise ValueError("mode must be 'median' or 'eightwise'")
        if rows is None or buckets is None:
            if epsilon is None or delta is None:
                raise ValueError("need (epsilon, delta) or explicit (rows, buckets)")
            if not 0 < epsilon < 1:
                raise ValueError("epsilon must be in (0, 1)")
            if not 0 < delta < 1:
                raise ValueError("delta must be in (0, 1)")
            rows = math.ceil(SIZE_FACTOR_ROWS * math.log(1.0 / delta))
            buckets = math.ceil(SIZE_FACTOR_BUCKETS / (epsilon * epsilon))
        if rows < 1 or buckets < 1:
            raise ValueError("rows and buckets must be >= 1")
        self.mode = mode
        self.epsilon = epsilon
        self.delta = delta
        self.rows = int(rows)  # copies, in eightwise mode
        self.buckets = int(buckets)  # counters per copy, in eightwise mode
        self._seed = fold_seed(seed)
        deg = 4 if mode == "median" else 8
        if mode == "median":
            self.params = np.zeros((self.rows, 2 + deg), dtype=np.int64)
        else:
            self.params = np.zeros((self.rows * self.buckets, deg), dtype=np.int64)
        self.counters = np.zeros((self.rows, self.buckets), dtype=np.int64)
        self.rowsums = np.zeros(self.rows, dtype=np.int64)
        self.meta = np.zeros(2, dtype=np.int64)  # [running max median, update count]
        self.scratch = np.zeros(self.rows, dtype=np.int64)
        self._derive(self._seed)

    def _derive(self, seed):
        if self.mode == "median":
            derive_table_params(self.params, seed, TRK_PARAM_BASE)
        else:
            _derive_eight_params(self.params, seed)

    @property
    def _denom(self) -> float:
        return 1.0 if self.mode == "median" else float(self.buckets)

    def update(self, item: int) -> None:
        if item < 0:
            raise ValueError("item ids must be nonnegative")
        x = reduce61(int(item))
        if self.mode == "median":
            tracker_touch(self.params, self.counters, self.rowsums, self.meta, self.scratch, x)
        else:
            tracker_touch_eight(
                self.params, self.counters, self.rowsums, self.meta, self.scratch, x
            )

    def process(self, items) -> None:
        items = np.ascontiguousarray(items, dtype=np.int64)
        if items.size and items.min() < 0:
            raise ValueError("item ids must be nonnegative")
        if self.mode == "median":
            _process_median(items, self.params, self.counters, self.rowsums, self.meta, self.scratch)
        else:
            _process_eight(items, self.params, self.counters, self.rowsums, self.meta, self.scratch)

    def query(self) -> float:
        """Current tracked estimate (running max; monotone nondecreasing)."""
        return float(self.meta[0]) / self._denom

    def raw_estimate(self) -> float:
        """Instantaneous (un-latched) median estimate."""
        if self.rows == 1:
            med = self.rowsums[0]
        else:
            med = _lower_median(self.rowsums, self.scratch)
        return float(med) / self._denom

    def reset(self, seed: int) -> None:
        """Zero all counters and re-derive fresh hash seeds."""
        self._seed = fold_seed(seed)
        self.counters[:] = 0
        self.rowsums[:] = 0
        self.meta[:] = 0
        self._derive(self._seed)

    @property
    def updates_seen(self) -> int:
        return int(self.meta[1])

    def state_bytes(self) -> int:
        """Logical state footprint: counters, hash seeds, scalars."""
        return 8 * (self.counters.size + self.params.size + self.rowsums.size + 2)
