"""Round-based learner of a single dominant item, given a scale guess.

Given sigma, a guess for the stream's final l2 norm, the learner
relabels items through a pairwise hash into 61-bit labels and runs a
sequence of rounds, each recovering one label bit of the (presumed)
dominant item.  During round r only items whose label matches the bits
learned so far are *active*; their degree-4 signs accumulate into X0 or
X1 according to the label's next bit, and once |X0 + X1| reaches the
round threshold c * sigma * beta^r the bit is recorded as the larger
accumulator's index, the signs are refreshed, and the next round
starts.  Thresholds shrink geometrically (beta < 1), so later rounds
consume fewer matching updates.

The returned candidate is the last item whose label matched the learned
prefix when it arrived; items keep refreshing the candidate after all
rounds finish.  State is a fixed number of machine words regardless of
stream length or domain size.

Internals are flat int64/float64 arrays with a slot dimension so that
the same kernels drive a standalone instance, the staggered pair inside
the sigma-guessing wrapper, and whole grids of instances.
"""

import math

import numpy as np

from ._backend import kernel
from .fieldops import P61, derive61, fold_seed, mulmod61, reduce61, sign4_scalar
from .hashing import PairwiseHash

SENTINEL = -1

LABEL_WIDTH = 61  # labels live in [0, 2^61 - 1); rounds are capped to fit

DEFAULT_C = 1.0 / 32.0
DEFAULT_BETA = 0.75

# int-field layout, per instance slot
I_ROUND = 0
I_MAXROUND = 1
I_CAND = 2
I_PREFIX = 3
I_A0 = 4
I_A1 = 5
I_X0 = 6
I_X1 = 7
I_COEFF = 8  # ..11: current round's degree-4 sign coefficients
I_SEED = 12
INT_FIELDS = 13

# float-field layout
F_SIGMA = 0
F_THRESH = 1
FLOAT_FIELDS = 2

# seed-derivation counters (per instance seed)
CTR_A0 = 21
CTR_A1 = 22  # ..27
CTR_SIGN = 64  # + 4*round + j


@kernel
def hh1_init(ints, floats, slot, n, sigma, seed, thr_factor):
    """(Re)initialize one instance slot; thr_factor = c * beta^(1 + offset)."""
    if sigma < 1.0:
        sigma = 1.0
    v = sigma * sigma
    fn = float(n)
    if fn < v:
        v = fn
    max_rounds = 3 * int(math.floor(math.log2(v + 1.0)))
    if max_rounds > LABEL_WIDTH:
        max_rounds = LABEL_WIDTH
    ints[slot, I_ROUND] = 1
    ints[slot, I_MAXROUND] = max_rounds
    ints[slot, I_CAND] = SENTINEL
    ints[slot, I_PREFIX] = 0
    ints[slot, I_A0] = derive61(seed, CTR_A0)
    a1 = 0
    tries = 0
    while a1 == 0 and tries < 6:
        a1 = derive61(seed, CTR_A1 + tries)
        tries += 1
    if a1 == 0:
        a1 = 1
    ints[slot, I_A1] = a1
    ints[slot, I_X0] = 0
    ints[slot, I_X1] = 0
    for j in range(4):
        ints[slot, I_COEFF + j] = derive61(seed, CTR_SIGN + 4 + j)
    ints[slot, I_SEED] = seed
    floats[slot, F_SIGMA] = sigma
    floats[slot, F_THRESH] = thr_factor * sigma


@kernel
def hh1_touch(ints, floats, slot, item, x, beta):
    """Feed one item (x = item reduced into the hash field)."""
    label = mulmod61(ints[slot, I_A1], x) + ints[slot, I_A0]
    if label >= P61:
        label -= P61
    r = ints[slot, I_ROUND]
    learned = r - 1
    if learned > 0 and (label >> (LABEL_WIDTH - learned)) != ints[slot, I_PREFIX]:
        return
    ints[slot, I_CAND] = item
    if r >= ints[slot, I_MAXROUND]:
        return
    bit = (label >> (LABEL_WIDTH - r)) & 1
    s = sign4_scalar(
        ints[slot, I_COEFF], ints[slot, I_COEFF + 1], ints[slot, I_COEFF + 2], ints[slot, I_COEFF + 3], x
    )
    if bit == 0:
        x0 = ints[slot, I_X0] + s
        ints[slot, I_X0] = x0
        x1 = ints[slot, I_X1]
    else:
        x1 = ints[slot, I_X1] + s
        ints[slot, I_X1] = x1
        x0 = ints[slot, I_X0]
    total = x0 + x1
    if total < 0:
        total = -total
    if float(total) >= floats[slot, F_THRESH]:
        a0abs = x0 if x0 >= 0 else -x0
        a1abs = x1 if x1 >= 0 else -x1
        bit_learned = 1 if a1abs > a0abs else 0
        ints[slot, I_PREFIX] = (ints[slot, I_PREFIX] << 1) | bit_learned
        r += 1
        ints[slot, I_ROUND] = r
        seed = ints[slot, I_SEED]
        for j in range(4):
            ints[slot, I_COEFF + j] = derive61(seed, CTR_SIGN + 4 * r + j)
        ints[slot, I_X0] = 0
        ints[slot, I_X1] = 0
        floats[slot, F_THRESH] = floats[slot, F_THRESH] * beta


@kernel
def _hh1_process(stream, ints, floats, beta):
    for t in range(stream.shape[0]):
        item = stream[t]
        hh1_touch(ints, floats, 0, item, reduce61(item), beta)


class Hh1:
    """Single-instance wrapper around the slot kernels."""

    SENTINEL = SENTINEL

    def __init__(
        self,
        sigma: float,
        n: int,
        seed: int = 0,
        *,
        c: float = DEFAULT_C,
        beta: float = DEFAULT_BETA,
        round_exponent_offset: int = 0,
    ):
        if n < 1:
            raise ValueError("domain size n must be >= 1")
        if not 0.0 < beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        self.n = int(n)
        self.c = float(c)
        self.beta = float(beta)
        self.round_exponent_offset = int(round_exponent_offset)
        self._thr_factor = self.c * self.beta ** (1 + self.round_exponent_offset)
        self.ints = np.zeros((1, INT_FIELDS), dtype=np.int64)
        self.floats = np.zeros((1, FLOAT_FIELDS), dtype=np.float64)
        hh1_init(self.ints, self.floats, 0, self.n, float(sigma), fold_seed(seed), self._thr_factor)

    def update(self, item: int) -> None:
        if item < 0:
            raise ValueError("item ids must be nonnegative")
        hh1_touch(self.ints, self.floats, 0, int(item), reduce61(int(item)), self.beta)

    def process(self, items) -> None:
        items = np.ascontiguousarray(items, dtype=np.int64)
        if items.size and items.min() < 0:
            raise ValueError("item ids must be nonnegative")
        _hh1_process(items, self.ints, self.floats, self.beta)

    def query(self) -> int:
        """Last item whose label matched the learned prefix; -1 if none."""
        return int(self.ints[0, I_CAND])

    @property
    def round(self) -> int:
        return int(self.ints[0, I_ROUND])

    @property
    def max_rounds(self) -> int:
        return int(self.ints[0, I_MAXROUND])

    @property
    def sigma(self) -> float:
        return float(self.floats[0, F_SIGMA])

    @property
    def learned_bits(self) -> list[int]:
        k = self.round - 1
        prefix = int(self.ints[0, I_PREFIX])
        return [(prefix >> (k - 1 - i)) & 1 for i in range(k)]

    @property
    def relabel(self) -> PairwiseHash:
        """The relabeling hash, for white-box inspection and inversion."""
        return PairwiseHash(
            p=P61, a0=int(self.ints[0, I_A0]), a1=int(self.ints[0, I_A1]), n=self.n
        )

    @property
    def accumulators(self) -> tuple[int, int]:
        return int(self.ints[0, I_X0]), int(self.ints[0, I_X1])

    def state_bytes(self) -> int:
        return 8 * (INT_FIELDS + FLOAT_FIELDS)
