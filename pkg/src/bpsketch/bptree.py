"""Bucketed reduction from epsilon-heavy hitters to single-hitter learners.

Items are hashed into ``b`` buckets per row for ``r`` rows; each (row,
bucket) cell runs an independent scale-free learner, and an auxiliary
CountSketch of the same dimensions supplies frequency estimates.  At
query time the per-cell candidates are pooled, estimated through the
auxiliary sketch, and filtered against (3 eps / 4) * sqrt(F2_hat) where
F2_hat is the auxiliary table's own row-median F2 estimate, so the
output is a set of eps/2-heavy hitters containing every eps-heavy one
(with the configured failure probability) and estimates carry the
(eps, 1/eps^2)-tail guarantee.

Two execution modes:

* ``standard`` - every cell hosts a full sigma-guessing wrapper with its
  own small F2 tracker (r*b trackers in total).
* ``fast`` - one global F2 tracker that restarts at every crossing of a
  fresh power of two; all cells then restart their learners
  simultaneously with sigma = (eps/16) * 2^(k/2), and each bucket
  retains the better of (previous candidate, finished candidate) judged
  by auxiliary-sketch estimates.  Same asymptotics, far fewer tracker
  updates per item.

Sketch state serializes to a versioned binary blob (header with magic,
version and config; then the array blocks row-major, counters before
hash seeds) for snapshot/restore from the CLI.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from ._backend import kernel
from .countsketch import cs_estimate, cs_row_f2_median, cs_touch
from .f2_tracker import TRK_PARAM_BASE, tracker_touch
from .fieldops import P61, derive61, derive_table_params, fold_seed, mulmod61, reduce61
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
from .hh2 import H2_FIELDS, I_OLDER, hh2_init, hh2_touch

DEFAULT_HEAVINESS = 32.0  # empirical reliability constant for the learners
FILTER_FRACTION = 0.75  # keep estimates >= (3 eps / 4) * sqrt(F2_hat)

_CTR_ROUTE_BASE = 5000
_CTR_AUX = 700
_CTR_CELL = 9000
_CTR_FAST_TRACKER = 8000
_CTR_FAST_CELL = 100000  # + k * stride + cell
_FAST_CELL_STRIDE = 100000

_MAGIC = b"BPSK"
_VERSION = 1


@dataclass(frozen=True)
class BpTreeConfig:
    epsilon: float
    delta: float
    n: int
    buckets: int | None = None
    rows: int | None = None
    mode: str = "standard"
    heaviness_constant: float = DEFAULT_HEAVINESS
    seed: int = 0
    tracker_rows: int = 1
    tracker_buckets: int = 30
    c: float = DEFAULT_C
    beta: float = DEFAULT_BETA
    round_exponent_offset: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must be in (0, 1]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.n < 1:
            raise ValueError("domain size n must be >= 1")
        if self.mode not in ("standard", "fast"):
            raise ValueError("mode must be 'standard' or 'fast'")
        if self.buckets is None:
            object.__setattr__(
                self, "buckets", math.ceil((self.heaviness_constant / self.epsilon) ** 2)
            )
        if self.rows is None:
            object.__setattr__(
                self, "rows", math.ceil(math.log2(1.0 / (self.epsilon * self.delta))) + 3
            )
        if self.buckets < 1 or self.rows < 1:
            raise ValueError("rows and buckets must be >= 1")


@kernel
def _bp_process_standard(
    stream, route, h2, hi, hf, tp, tc, ts, tmeta, tscr, ap, at, buckets, beta, thr_factor
):
    rows = route.shape[0]
    for t in range(stream.shape[0]):
        item = stream[t]
        x = reduce61(item)
        for row in range(rows):
            v = mulmod61(route[row, 1], x) + route[row, 0]
            if v >= P61:
                v -= P61
            cell = row * buckets + v % buckets
            hh2_touch(
                h2[cell],
                hi[cell],
                hf[cell],
                tp[cell],
                tc[cell],
                ts[cell],
                tmeta[cell],
                tscr[cell],
                item,
                x,
                beta,
                thr_factor,
            )
        cs_touch(ap, at, x)


@kernel
def _bp_process_fast(
    stream,
    route,
    fi,
    hi,
    hf,
    gtp,
    gtc,
    gts,
    gtmeta,
    gtscr,
    h0,
    h0e,
    ap,
    at,
    ascr,
    n,
    buckets,
    beta,
    thr_factor,
    eps16,
    seed,
):
    rows = route.shape[0]
    cells = hi.shape[0]
    for t in range(stream.shape[0]):
        item = stream[t]
        x = reduce61(item)
        est = tracker_touch(gtp, gtc, gts, gtmeta, gtscr, x)
        k = fi[0]
        if k < 61 and est >= (1 << (k + 1)):
            # Suffix estimate crossed the next power of two: retain the
            # better candidate per bucket, restart every learner with the
            # new scale guess, and restart the tracker on the new suffix.
            k += 1
            fi[0] = k
            sigma = eps16 * math.sqrt(2.0**k)
            for cell in range(cells):
                h_new = hi[cell, 0, I_CAND]
                if h_new >= 0:
                    e_new = cs_estimate(ap, at, reduce61(h_new), ascr)
                    h_old = h0[cell]
                    if h_old < 0:
                        h0[cell] = h_new
                        h0e[cell] = e_new
                    elif h_old == h_new:
                        h0e[cell] = e_new
                    else:
                        e_old = cs_estimate(ap, at, reduce61(h_old), ascr)
                        if e_old < e_new:
                            h0[cell] = h_new
                            h0e[cell] = e_new
                        else:
                            h0e[cell] = e_old
                hh1_init(
                    hi[cell],
                    hf[cell],
                    0,
                    n,
                    sigma,
                    derive61(seed, _CTR_FAST_CELL + k * _FAST_CELL_STRIDE + cell),
                    thr_factor,
                )
            for rr in range(gtc.shape[0]):
                gts[rr] = 0
                for j in range(gtc.shape[1]):
                    gtc[rr, j] = 0
            gtmeta[0] = 0
            gtmeta[1] = 0
            derive_table_params(gtp, derive61(seed, _CTR_FAST_TRACKER + k), TRK_PARAM_BASE)
            fi[1] += 1
        for row in range(rows):
            v = mulmod61(route[row, 1], x) + route[row, 0]
            if v >= P61:
                v -= P61
            cell = row * buckets + v % buckets
            hh1_touch(hi[cell], hf[cell], 0, item, x, beta)
        cs_touch(ap, at, x)


class BpTree:
    """Heavy-hitters sketch over a bucketed grid of single-hitter learners."""

    SENTINEL = SENTINEL

    def __init__(self, config: BpTreeConfig):
        self.config = config
        cfg = config
        self._seed = fold_seed(cfg.seed)
        self._thr_factor = cfg.c * cfg.beta ** (1 + cfg.round_exponent_offset)
        r, b = cfg.rows, cfg.buckets
        cells = r * b
        self.cells = cells
        self.route = np.zeros((r, 2), dtype=np.int64)
        derive_table_params(self.route, derive61(self._seed, _CTR_ROUTE_BASE), _CTR_ROUTE_BASE)
        # auxiliary CountSketch, same grid dimensions, degree-2 signs
        self.aux_params = np.zeros((r, 4), dtype=np.int64)
        derive_table_params(self.aux_params, derive61(self._seed, _CTR_AUX), _CTR_AUX)
        self.aux_table = np.zeros((r, b), dtype=np.int64)
        self.aux_scratch = np.zeros(r, dtype=np.int64)
        tr, tb = cfg.tracker_rows, cfg.tracker_buckets
        if cfg.mode == "standard":
            self.h2 = np.zeros((cells, H2_FIELDS), dtype=np.int64)
            self.hi = np.zeros((cells, 2, INT_FIELDS), dtype=np.int64)
            self.hf = np.zeros((cells, 2, FLOAT_FIELDS), dtype=np.float64)
            self.tp = np.zeros((cells, tr, 6), dtype=np.int64)
            self.tc = np.zeros((cells, tr, tb), dtype=np.int64)
            self.ts = np.zeros((cells, tr), dtype=np.int64)
            self.tmeta = np.zeros((cells, 2), dtype=np.int64)
            self.tscr = np.zeros((cells, tr), dtype=np.int64)
            for cell in range(cells):
                cell_seed = derive61(self._seed, _CTR_CELL + cell)
                derive_table_params(self.tp[cell], derive61(cell_seed, 500), TRK_PARAM_BASE)
                hh2_init(self.h2[cell], self.hi[cell], self.hf[cell], cfg.n, cell_seed, self._thr_factor)
        else:
            self.fi = np.zeros(2, dtype=np.int64)  # [crossing exponent, restarts]
            self.hi = np.zeros((cells, 1, INT_FIELDS), dtype=np.int64)
            self.hf = np.zeros((cells, 1, FLOAT_FIELDS), dtype=np.float64)
            self.gtp = np.zeros((tr, 6), dtype=np.int64)
            derive_table_params(self.gtp, derive61(self._seed, _CTR_FAST_TRACKER), TRK_PARAM_BASE)
            self.gtc = np.zeros((tr, tb), dtype=np.int64)
            self.gts = np.zeros(tr, dtype=np.int64)
            self.gtmeta = np.zeros(2, dtype=np.int64)
            self.gtscr = np.zeros(tr, dtype=np.int64)
            self.h0 = np.full(cells, SENTINEL, dtype=np.int64)
            self.h0e = np.zeros(cells, dtype=np.int64)
            sigma0 = cfg.epsilon / 16.0
            for cell in range(cells):
                hh1_init(
                    self.hi[cell],
                    self.hf[cell],
                    0,
                    cfg.n,
                    sigma0,
                    derive61(self._seed, _CTR_CELL + cell),
                    self._thr_factor,
                )

    # -- updates ---------------------------------------------------------

    def update(self, item: int) -> None:
        self.process(np.array([item], dtype=np.int64))

    def process(self, items) -> None:
        items = np.ascontiguousarray(items, dtype=np.int64)
        if items.size and items.min() < 0:
            raise ValueError("item ids must be nonnegative")
        cfg = self.config
        if cfg.mode == "standard":
            _bp_process_standard(
                items,
                self.route,
                self.h2,
                self.hi,
                self.hf,
                self.tp,
                self.tc,
                self.ts,
                self.tmeta,
                self.tscr,
                self.aux_params,
                self.aux_table,
                cfg.buckets,
                cfg.beta,
                self._thr_factor,
            )
        else:
            _bp_process_fast(
                items,
                self.route,
                self.fi,
                self.hi,
                self.hf,
                self.gtp,
                self.gtc,
                self.gts,
                self.gtmeta,
                self.gtscr,
                self.h0,
                self.h0e,
                self.aux_params,
                self.aux_table,
                self.aux_scratch,
                cfg.n,
                cfg.buckets,
                cfg.beta,
                self._thr_factor,
                cfg.epsilon / 16.0,
                self._seed,
            )

    # -- queries ---------------------------------------------------------

    def candidates(self) -> list[int]:
        """Deduplicated per-cell candidates before frequency filtering."""
        found = set()
        if self.config.mode == "standard":
            for cell in range(self.cells):
                cand = int(self.hi[cell, int(self.h2[cell, I_OLDER]), I_CAND])
                if cand >= 0:
                    found.add(cand)
        else:
            for cell in range(self.cells):
                current = int(self.hi[cell, 0, I_CAND])
                retained = int(self.h0[cell])
                if current >= 0 and retained >= 0 and current != retained:
                    e_cur = self._aux_estimate(current)
                    e_ret = self._aux_estimate(retained)
                    found.add(current if e_cur > e_ret else retained)
                elif current >= 0:
                    found.add(current)
                elif retained >= 0:
                    found.add(retained)
        return sorted(found)

    def _aux_estimate(self, item: int) -> int:
        return int(cs_estimate(self.aux_params, self.aux_table, reduce61(int(item)), self.aux_scratch))

    def f2_estimate(self) -> int:
        return int(cs_row_f2_median(self.aux_table, self.aux_scratch))

    def query(self) -> list[tuple[int, int]]:
        """(item, estimated frequency) pairs passing the heaviness filter,
        sorted by estimate descending (ties by item id)."""
        threshold = FILTER_FRACTION * self.config.epsilon * math.sqrt(max(self.f2_estimate(), 0))
        out = []
        for item in self.candidates():
            est = self._aux_estimate(item)
            if est >= threshold:
                out.append((item, est))
        out.sort(key=lambda pair: (-pair[1], pair[0]))
        return out

    # -- instrumentation ---------------------------------------------------

    @property
    def live_tracker_count(self) -> int:
        return 1 if self.config.mode == "fast" else self.cells

    @property
    def restarts(self) -> int:
        if self.config.mode != "fast":
            return 0
        return int(self.fi[1])

    def state_bytes(self) -> int:
        arrays = [self.route, self.aux_params, self.aux_table, self.hi, self.hf]
        if self.config.mode == "standard":
            arrays += [self.h2, self.tp, self.tc, self.ts, self.tmeta]
        else:
            arrays += [self.fi, self.gtp, self.gtc, self.gts, self.gtmeta, self.h0, self.h0e]
        return 8 * sum(a.size for a in arrays)

    # -- serialization -----------------------------------------------------

    def _array_order(self) -> list[np.ndarray]:
        if self.config.mode == "standard":
            return [
                self.aux_table,
                self.tc,
                self.ts,
                self.tmeta,
                self.hi,
                self.hf,
                self.h2,
                self.route,
                self.aux_params,
                self.tp,
            ]
        return [
            self.aux_table,
            self.gtc,
            self.gts,
            self.gtmeta,
            self.hi,
            self.hf,
            self.h0,
            self.h0e,
            self.fi,
            self.route,
            self.aux_params,
            self.gtp,
        ]

    def to_bytes(self) -> bytes:
        cfg = self.config
        header = struct.pack(
            "<4sHBdd qqq QQ ll ddl",
            _MAGIC,
            _VERSION,
            0 if cfg.mode == "standard" else 1,
            cfg.epsilon,
            cfg.delta,
            cfg.n,
            cfg.buckets,
            cfg.rows,
            cfg.seed % (1 << 64),
            self._seed,  # folded seed, so restarts resume identically
            cfg.tracker_rows,
            cfg.tracker_buckets,
            cfg.c,
            cfg.beta,
            cfg.round_exponent_offset,
        )
        chunks = [header, struct.pack("<d", cfg.heaviness_constant)]
        for arr in self._array_order():
            chunks.append(np.ascontiguousarray(arr).tobytes())
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BpTree":
        head_fmt = "<4sHBdd qqq QQ ll ddl"
        head_size = struct.calcsize(head_fmt)
        if len(blob) < head_size + 8:
            raise ValueError("snapshot truncated")
        (
            magic,
            version,
            mode_flag,
            epsilon,
            delta,
            n,
            buckets,
            rows,
            seed,
            folded_seed,
            tracker_rows,
            tracker_buckets,
            c,
            beta,
            offset,
        ) = struct.unpack_from(head_fmt, blob)
        if magic != _MAGIC:
            raise ValueError("not a sketch snapshot (bad magic)")
        if version != _VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        (heaviness,) = struct.unpack_from("<d", blob, head_size)
        cfg = BpTreeConfig(
            epsilon=epsilon,
            delta=delta,
            n=n,
            buckets=buckets,
            rows=rows,
            mode="standard" if mode_flag == 0 else "fast",
            heaviness_constant=heaviness,
            seed=seed,
            tracker_rows=tracker_rows,
            tracker_buckets=tracker_buckets,
            c=c,
            beta=beta,
            round_exponent_offset=offset,
        )
        sketch = cls(cfg)
        sketch._seed = int(folded_seed)
        pos = head_size + 8
        for arr in sketch._array_order():
            nbytes = arr.nbytes
            if pos + nbytes > len(blob):
                raise ValueError("snapshot truncated")
            flat = np.frombuffer(blob[pos : pos + nbytes], dtype=arr.dtype).reshape(arr.shape)
            arr[...] = flat
            pos += nbytes
        if pos != len(blob):
            raise ValueError("snapshot has trailing bytes")
        return sketch
