"""Deterministic generators for the synthetic benchmark stream families.

Each stream has ``n`` light items (ids 1..n, frequency 1 each) and one
heavy item (id 0) with frequency ``ceil(alpha * sqrt(n))``.  Four
placements of the heavy occurrences are supported:

* ``start``  - the heavy run comes first, then the singletons;
* ``end``    - singletons first, heavy run last;
* ``random`` - heavy positions uniform without replacement;
* ``blocks`` - heavy occurrences in runs of ``ceil(n^(1/4))`` placed at
  random non-overlapping gaps between singletons.

Singletons are emitted in ascending id order; only the placement of the
heavy item is randomized.  Streams are numpy int64 arrays and fully
determined by their spec (including the seed).
"""

import math
from dataclasses import dataclass

import numpy as np

from .fieldops import fold_seed

KINDS = ("start", "end", "random", "blocks")


@dataclass(frozen=True)
class StreamSpec:
    n: int
    alpha: float
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    @property
    def heavy_freq(self) -> int:
        return math.ceil(self.alpha * math.sqrt(self.n))

    @property
    def length(self) -> int:
        return self.n + self.heavy_freq

    @property
    def block_size(self) -> int:
        return math.ceil(self.n**0.25)


def gen_stream(spec: StreamSpec) -> np.ndarray:
    """Materialize the stream for ``spec`` as an int64 array of item ids."""
    n = spec.n
    f_h = spec.heavy_freq
    singles = np.arange(1, n + 1, dtype=np.int64)
    if f_h == 0:
        return singles
    heavy_run = np.zeros(f_h, dtype=np.int64)
    if spec.kind == "start":
        return np.concatenate([heavy_run, singles])
    if spec.kind == "end":
        return np.concatenate([singles, heavy_run])

    rng = np.random.Generator(np.random.PCG64(fold_seed(spec.seed)))
    m = n + f_h
    out = np.empty(m, dtype=np.int64)
    if spec.kind == "random":
        heavy_pos = rng.choice(m, size=f_h, replace=False)
        mask = np.zeros(m, dtype=bool)
        mask[heavy_pos] = True
        out[mask] = 0
        out[~mask] = singles
        return out

    # blocks: ceil(f_h / block) runs inserted at distinct gaps between
    # singletons (gap i sits before singleton i), so runs never overlap.
    block = spec.block_size
    nblocks = math.ceil(f_h / block)
    if nblocks > n + 1:
        raise ValueError("too many heavy blocks for the number of gaps")
    gaps = np.sort(rng.choice(n + 1, size=nblocks, replace=False))
    sizes = np.full(nblocks, block, dtype=np.int64)
    sizes[-1] = f_h - block * (nblocks - 1)
    pos = 0
    cursor = 0
    for g, size in zip(gaps, sizes):
        take = g - cursor
        out[pos : pos + take] = singles[cursor:g]
        pos += take
        out[pos : pos + size] = 0
        pos += size
        cursor = g
    out[pos:] = singles[cursor:]
    return out


def solve_heavy_freqs(n_light: int, alphas) -> list[int]:
    """Frequencies giving each planted item heaviness ``alpha_i`` exactly.

    Heaviness of item i is f_i / sqrt(F2 - f_i^2) where F2 counts the
    light mass (n_light singletons) plus all planted items; the coupled
    system solves to f_i^2 = s * a_i^2/(1+a_i^2) with
    s = n_light / (1 - sum a_j^2/(1+a_j^2)).
    """
    alphas = [float(a) for a in alphas]
    shares = [a * a / (1.0 + a * a) for a in alphas]
    total = sum(shares)
    if total >= 1.0:
        raise ValueError("requested heaviness values are jointly infeasible")
    s = n_light / (1.0 - total)
    return [max(1, round(math.sqrt(s * share))) for share in shares]


def multi_heavy_stream(n_light: int, heavy_freqs, seed: int) -> np.ndarray:
    """Random-placement stream with several planted heavy items.

    Heavy ids are 0..k-1 with the given frequencies; light ids are
    k..k+n_light-1, frequency 1 each.
    """
    k = len(heavy_freqs)
    parts = [np.full(int(f), i, dtype=np.int64) for i, f in enumerate(heavy_freqs)]
    parts.append(np.arange(k, k + n_light, dtype=np.int64))
    out = np.concatenate(parts)
    rng = np.random.Generator(np.random.PCG64(fold_seed(seed)))
    rng.shuffle(out)
    return out


class StreamFormatError(ValueError):
    """Raised for malformed stream files; carries the failing offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def write_stream(path, items, text: bool = False) -> None:
    arr = np.asarray(items, dtype=np.int64)
    if np.any(arr < 0):
        raise ValueError("item ids must be nonnegative")
    if text:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for v in arr:
                fh.write(f"{int(v)}\n")
    else:
        arr.astype("<u8").tofile(path)


def stream_from_file(path, text: bool = False) -> np.ndarray:
    """Replay a stream file: 64-bit little-endian records, or one decimal per line."""
    if text:
        items = []
        offset = 0
        with open(path, "rb") as fh:
            for line in fh:
                stripped = line.strip()
                if stripped:
                    try:
                        value = int(stripped)
                    except ValueError:
                        raise StreamFormatError(
                            f"invalid record {stripped[:32]!r}", offset
                        ) from None
                    if not 0 <= value < 2**63:
                        raise StreamFormatError(f"item id {value} out of range", offset)
                    items.append(value)
                offset += len(line)
        return np.asarray(items, dtype=np.int64)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) % 8 != 0:
        raise StreamFormatError("truncated final record", len(raw) - len(raw) % 8)
    values = np.frombuffer(raw, dtype="<u8")
    too_big = np.nonzero(values >= 2**63)[0]
    if too_big.size:
        raise StreamFormatError(f"item id {values[too_big[0]]} out of range", int(too_big[0]) * 8)
    return values.astype(np.int64)
