"""Scale-free single-heavy-hitter identification via estimate doubling.

Removes the scale guess that the round-based learner needs: a running
F2 tracker is consulted after every update, and each time the tracked
estimate first reaches a new power of two a fresh learner instance is
started with sigma = sqrt(current estimate).  Only the two most recent
instances are kept alive (plus the initial sigma=1 instance until the
second crossing retires it), so storage stays a constant number of
words.  Queries return the current output of the older live instance -
the penultimate one once at least two have started - because for a
sufficiently heavy item the stream interval that instance covers both
contains enough of the item's mass and was started with a valid scale
guess.

The tracker defaults to a single row of 30 bucketed counters, which is
accurate enough to time the restarts; the nominal accuracy/failure
parameters (1/100, 1/20) are recorded on the instance.
"""

import math

import numpy as np

from ._backend import kernel
from .f2_tracker import F2Tracker, tracker_touch
from .fieldops import derive61, fold_seed, reduce61
from .hh1 import (
    DEFAULT_BETA,
    DEFAULT_C,
    FLOAT_FIELDS,
    INT_FIELDS,
    I_CAND,
    SENTINEL,
    hh1_init,
    hh1_touch,
)

# nominal tracker parameters recorded for the doubling schedule
TRACKER_EPSILON = 1.0 / 100.0
TRACKER_DELTA = 1.0 / 20.0

DEFAULT_TRACKER_ROWS = 1
DEFAULT_TRACKER_BUCKETS = 30

MAX_EXPONENT = 61  # crossings latch at most at 2^61

# int-field layout, one row per wrapper instance
I_K = 0  # highest crossed exponent
I_OLDER = 1  # slot index of the older live instance
I_STARTED = 2  # number of learner instances ever started
I_SEED = 3
I_N = 4
H2_FIELDS = 5

CTR_TRACKER = 500
CTR_INSTANCE = 1000  # + crossing exponent


@kernel
def hh2_init(h2, ints, floats, n, seed, thr_factor):
    h2[I_K] = 0
    h2[I_OLDER] = 0
    h2[I_STARTED] = 1
    h2[I_SEED] = seed
    h2[I_N] = n
    hh1_init(ints, floats, 0, n, 1.0, derive61(seed, CTR_INSTANCE), thr_factor)


@kernel
def hh2_touch(h2, ints, floats, tp, tc, ts, tmeta, tscr, item, x, beta, thr_factor):
    est = tracker_touch(tp, tc, ts, tmeta, tscr, x)
    k = h2[I_K]
    if k < MAX_EXPONENT and est >= (1 << (k + 1)):
        # One or more powers of two newly crossed: latch the highest and
        # start a single instance with sigma from the current estimate.
        while k < MAX_EXPONENT and est >= (1 << (k + 1)):
            k += 1
        h2[I_K] = k
        sigma = math.sqrt(float(est))
        seed = derive61(h2[I_SEED], CTR_INSTANCE + k)
        older = h2[I_OLDER]
        started = h2[I_STARTED]
        if started == 1:
            hh1_init(ints, floats, 1 - older, h2[I_N], sigma, seed, thr_factor)
        else:
            # discard the older instance: its slot hosts the newest one
            hh1_init(ints, floats, older, h2[I_N], sigma, seed, thr_factor)
            h2[I_OLDER] = 1 - older
        h2[I_STARTED] = started + 1
    older = h2[I_OLDER]
    hh1_touch(ints, floats, older, item, x, beta)
    if h2[I_STARTED] >= 2:
        hh1_touch(ints, floats, 1 - older, item, x, beta)


@kernel
def _hh2_process(stream, h2, ints, floats, tp, tc, ts, tmeta, tscr, beta, thr_factor):
    for t in range(stream.shape[0]):
        item = stream[t]
        hh2_touch(h2, ints, floats, tp, tc, ts, tmeta, tscr, item, reduce61(item), beta, thr_factor)


class Hh2:
    """Single-instance wrapper; grids of these power the bucketed reduction."""

    SENTINEL = SENTINEL

    def __init__(
        self,
        n: int,
        seed: int = 0,
        *,
        tracker_rows: int = DEFAULT_TRACKER_ROWS,
        tracker_buckets: int = DEFAULT_TRACKER_BUCKETS,
        c: float = DEFAULT_C,
        beta: float = DEFAULT_BETA,
        round_exponent_offset: int = 0,
    ):
        if n < 1:
            raise ValueError("domain size n must be >= 1")
        self.n = int(n)
        self.beta = float(beta)
        self._thr_factor = float(c) * self.beta ** (1 + round_exponent_offset)
        self.tracker_epsilon = TRACKER_EPSILON
        self.tracker_delta = TRACKER_DELTA
        self._seed = fold_seed(seed)
        self.tracker = F2Tracker(
            rows=tracker_rows,
            buckets=tracker_buckets,
            seed=derive61(self._seed, CTR_TRACKER),
        )
        self.h2 = np.zeros(H2_FIELDS, dtype=np.int64)
        self.ints = np.zeros((2, INT_FIELDS), dtype=np.int64)
        self.floats = np.zeros((2, FLOAT_FIELDS), dtype=np.float64)
        hh2_init(self.h2, self.ints, self.floats, self.n, self._seed, self._thr_factor)

    def update(self, item: int) -> None:
        if item < 0:
            raise ValueError("item ids must be nonnegative")
        t = self.tracker
        hh2_touch(
            self.h2,
            self.ints,
            self.floats,
            t.params,
            t.counters,
            t.rowsums,
            t.meta,
            t.scratch,
            int(item),
            reduce61(int(item)),
            self.beta,
            self._thr_factor,
        )

    def process(self, items) -> None:
        items = np.ascontiguousarray(items, dtype=np.int64)
        if items.size and items.min() < 0:
            raise ValueError("item ids must be nonnegative")
        t = self.tracker
        _hh2_process(
            items,
            self.h2,
            self.ints,
            self.floats,
            t.params,
            t.counters,
            t.rowsums,
            t.meta,
            t.scratch,
            self.beta,
            self._thr_factor,
        )

    def query(self) -> int:
        """Current candidate of the older live instance; -1 before any update."""
        return int(self.ints[int(self.h2[I_OLDER]), I_CAND])

    @property
    def crossing_exponent(self) -> int:
        return int(self.h2[I_K])

    @property
    def instances_started(self) -> int:
        return int(self.h2[I_STARTED])

    @property
    def live_instances(self) -> int:
        return 1 if self.instances_started == 1 else 2

    def tracker_estimate(self) -> float:
        return self.tracker.query()

    def state_bytes(self) -> int:
        return (
            self.tracker.state_bytes()
            + 8 * (self.ints.size + self.floats.size)
            + 8 * H2_FIELDS
        )
