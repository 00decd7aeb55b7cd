"""Brute-force ground truth for tests and acceptance runs.

Nothing here is space-constrained: exact frequencies, exact second
moments at every prefix, exact heavy-hitter sets, plus the Monte Carlo
estimator for the running-supremum statistic ``sup_t |<f^(t), Z>|`` that
calibrates the sign-family machinery.  The empirical ceiling for that
supremum (normalized by the final l2 norm) is the constant
``SUP_RATIO_BOUND`` = 23; the corresponding worst-case heaviness
constant ``HEAVINESS_CONSTANT_THEORY`` = 2^14 * 23 is kept for the
property suite even though benchmarks use the far smaller empirical 32.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernel
from .fieldops import derive61, fold_seed, poly_sign61, reduce61
from .hashing import PairwiseHash

# Empirical ceiling on E sup_t |<f^(t), Z>| / ||f||_2 with 4-wise signs.
SUP_RATIO_BOUND = 23.0
# Heaviness above which the single-hitter learner is provably reliable.
HEAVINESS_CONSTANT_THEORY = (1 << 14) * 23


@dataclass(frozen=True)
class ExactStats:
    """Exact stream statistics: frequencies, moments, optional F2 prefix curve."""

    items: np.ndarray  # distinct item ids, ascending
    counts: np.ndarray  # matching frequencies
    f2: int
    f0: int
    length: int
    f2_prefix: np.ndarray | None = None  # f2_prefix[t] = F2 after t updates

    def freq(self, item: int) -> int:
        idx = np.searchsorted(self.items, item)
        if idx < len(self.items) and self.items[idx] == item:
            return int(self.counts[idx])
        return 0

    def freq_map(self) -> dict[int, int]:
        return {int(i): int(c) for i, c in zip(self.items, self.counts)}


@kernel
def _f2_prefix_kernel(stream, counts, out):
    f2 = 0
    for t in range(stream.shape[0]):
        x = stream[t]
        c = counts[x]
        f2 += 2 * c + 1
        counts[x] = c + 1
        out[t + 1] = f2


def exact_stats(stream, with_prefix: bool = False) -> ExactStats:
    stream = np.asarray(stream, dtype=np.int64)
    if stream.size == 0:
        prefix = np.zeros(1, dtype=np.int64) if with_prefix else None
        return ExactStats(
            items=np.empty(0, dtype=np.int64),
            counts=np.empty(0, dtype=np.int64),
            f2=0,
            f0=0,
            length=0,
            f2_prefix=prefix,
        )
    items, counts = np.unique(stream, return_counts=True)
    prefix = None
    if with_prefix:
        # Dense counting; fine for test-scale id ranges.
        dense = np.zeros(int(stream.max()) + 1, dtype=np.int64)
        prefix = np.zeros(stream.size + 1, dtype=np.int64)
        _f2_prefix_kernel(stream, dense, prefix)
    return ExactStats(
        items=items,
        counts=counts.astype(np.int64),
        f2=int(np.sum(counts.astype(np.int64) ** 2)),
        f0=int(items.size),
        length=int(stream.size),
        f2_prefix=prefix,
    )


def heavy_set(stats: ExactStats, eps: float) -> set[int]:
    """Items with f_i^2 >= eps^2 * (F2 - f_i^2); sole items count as heavy."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    out = set()
    for item, c in zip(stats.items, stats.counts):
        rest = stats.f2 - int(c) ** 2
        if rest == 0 or int(c) ** 2 >= eps * eps * rest:
            out.add(int(item))
    return out


def heaviness(stats: ExactStats, item: int) -> float:
    """f_i / sqrt(F2 - f_i^2); inf when the item carries all the mass."""
    c = stats.freq(item)
    rest = stats.f2 - c * c
    if rest == 0:
        return float("inf") if c > 0 else 0.0
    return c / rest**0.5


def tail_norm(stats: ExactStats, k: int) -> float:
    """l2 norm of the frequency vector with its k largest entries zeroed."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k >= stats.f0:
        return 0.0
    ordered = np.sort(stats.counts)[::-1]
    return float(np.sqrt(np.sum(ordered[k:].astype(np.float64) ** 2)))


@kernel
def _sup_trial_kernel(stream, coeffs):
    running = 0
    best = 0
    for t in range(stream.shape[0]):
        running += poly_sign61(coeffs, reduce61(stream[t]))
        mag = running if running >= 0 else -running
        if mag > best:
            best = mag
    return best


def sup_process_estimate(stream, trials: int, degree: int = 4, seed: int = 0) -> float:
    """Monte Carlo mean of sup_t |<f^(t), Z>| / ||f^(m)||_2 over fresh sign seeds."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stream = np.asarray(stream, dtype=np.int64)
    norm = float(np.sqrt(exact_stats(stream).f2))
    if norm == 0.0:
        return 0.0
    base = fold_seed(seed)
    total = 0.0
    coeffs = np.empty(degree, dtype=np.int64)
    for trial in range(trials):
        for j in range(degree):
            coeffs[j] = derive61(base, trial * 64 + j)
        total += _sup_trial_kernel(stream, coeffs) / norm
    return total / trials


def running_sup(stream, sign_of_item) -> int:
    """sup_t |<f^(t), Z>| for an explicit sign assignment (test scaffolding)."""
    running = 0
    best = 0
    for item in np.asarray(stream, dtype=np.int64):
        running += sign_of_item(int(item))
        best = max(best, abs(running))
    return best


def active_sets(relabel, bits, items, exclude: int | None = None, width: int | None = None):
    """Exact reconstruction of (matching, boundary) item sets for learned bits.

    ``relabel`` is a PairwiseHash, a mapping, or a callable item -> label;
    ``bits`` the learned big-endian bit sequence.  Returns the pair
    (H_r, Hbar_r): items whose label starts with all r bits, and items
    matching the first r-1 bits but not the r-th.  ``exclude`` removes a
    designated item (conventionally the heavy hitter) from both sets.
    """
    if isinstance(relabel, PairwiseHash):
        width = width or relabel.bit_width
        eval_fn = relabel.eval
    elif isinstance(relabel, dict):
        eval_fn = relabel.__getitem__
        if width is None:
            width = max(int(v) for v in relabel.values()).bit_length() or 1
    else:
        eval_fn = relabel
        if width is None:
            width = max(int(eval_fn(i)) for i in items).bit_length() or 1
    bits = list(bits)
    r = len(bits)
    matching, boundary = set(), set()
    for i in items:
        if exclude is not None and i == exclude:
            continue
        label = int(eval_fn(i))
        level = 0
        while level < r and ((label >> (width - level - 1)) & 1) == bits[level]:
            level += 1
        if level == r:
            matching.add(int(i))
        elif level == r - 1:
            boundary.add(int(i))
    return matching, boundary
