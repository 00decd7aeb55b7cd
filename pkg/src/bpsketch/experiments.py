"""Experiment operations behind the CLI: grids, sweeps, and comparisons.

Each operation returns an :class:`ExperimentReport` whose ``table`` is
the machine-readable grid (list of flat dicts in deterministic order),
``aggregates`` holds the headline numbers, and ``timing`` collects
wall-clock figures.  Reports are fully determined by (config, seed)
except for the fields named in :data:`TIMING_FIELDS`, which depend on
the host machine.
"""

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import NUMBA_ENABLED
from .countsketch import CountSketch
from .f2_tracker import F2Tracker, track_error_run
from .fieldops import derive61, fold_seed
from .hh2 import Hh2
from .oracle import exact_stats, heavy_set
from .streams import StreamSpec, gen_stream

TIMING_FIELDS = ("updates_per_ms", "wall_ms")

DEFAULT_TIMING_WINDOWS = 5


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    table: list[dict]
    aggregates: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "config": self.config,
            "table": self.table,
            "aggregates": self.aggregates,
            "timing": self.timing,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = [f"# experiment={self.experiment}"]
        for key in sorted(self.config):
            lines.append(f"# {key}={self.config[key]}")
        if self.table:
            cols = list(self.table[0].keys())
            lines.append(",".join(cols))
            for row in self.table:
                lines.append(",".join(_csv_cell(row[c]) for c in cols))
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _pool_map(fn, tasks, workers: int | None):
    """Run tasks (deterministic order preserved) on a small thread pool.

    Kernels release the GIL under numba, so threads help; the pure
    Python backend just runs sequentially.
    """
    if workers is None:
        workers = min(4, os.cpu_count() or 1) if NUMBA_ENABLED else 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# tracking-error grid
# ---------------------------------------------------------------------------


def cmd_track_error(
    n: int,
    alpha: float,
    kind: str,
    rows_list,
    buckets_list,
    trials: int,
    seed: int,
    workers: int | None = None,
) -> ExperimentReport:
    """Average/worst max tracking error per (buckets, rows) cell.

    The same group of streams is reused for every parameter setting;
    the error of one run is max_t |est(t) - F2(t)| / F2(m).
    """
    rows_list = sorted(set(int(r) for r in rows_list))
    buckets_list = sorted(set(int(b) for b in buckets_list))
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not rows_list or not buckets_list:
        raise ValueError("rows-list and buckets-list must be nonempty")
    master = fold_seed(seed)
    t0 = time.perf_counter()
    streams = [
        gen_stream(StreamSpec(n=n, alpha=alpha, kind=kind, seed=derive61(master, 100 + t)))
        for t in range(trials)
    ]

    def one(task):
        b, r, trial = task
        trk = F2Tracker(rows=r, buckets=b, seed=derive61(master, 10_000 + trial * 997 + b * 31 + r))
        counts = np.zeros(n + 1, dtype=np.int64)
        worst, f2 = track_error_run(
            streams[trial], trk.params, trk.counters, trk.rowsums, trk.meta, trk.scratch, counts
        )
        return worst / f2

    tasks = [(b, r, t) for b in buckets_list for r in rows_list for t in range(trials)]
    errors = _pool_map(one, tasks, workers)
    by_cell: dict[tuple[int, int], list[float]] = {}
    for (b, r, _t), err in zip(tasks, errors):
        by_cell.setdefault((b, r), []).append(err)

    table = []
    for b in buckets_list:
        for r in rows_list:
            errs = by_cell[(b, r)]
            table.append(
                {
                    "buckets": b,
                    "rows": r,
                    "avg_max_error": sum(errs) / len(errs),
                    "worst_max_error": max(errs),
                }
            )
    corner_lo = next(x for x in table if x["buckets"] == buckets_list[0] and x["rows"] == rows_list[0])
    corner_hi = next(
        x for x in table if x["buckets"] == buckets_list[-1] and x["rows"] == rows_list[-1]
    )
    report = ExperimentReport(
        experiment="track-error",
        config={
            "n": n,
            "alpha": alpha,
            "kind": kind,
            "rows_list": rows_list,
            "buckets_list": buckets_list,
            "trials": trials,
            "seed": seed,
        },
        table=table,
        aggregates={
            "smallest_cell_avg": corner_lo["avg_max_error"],
            "largest_cell_avg": corner_hi["avg_max_error"],
            "smallest_cell_worst": corner_lo["worst_max_error"],
            "largest_cell_worst": corner_hi["worst_max_error"],
        },
    )
    report.timing["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return report


# ---------------------------------------------------------------------------
# heaviness sweep
# ---------------------------------------------------------------------------


def cmd_heaviness(
    n: int,
    alphas,
    kinds,
    trials: int,
    seed: int,
    workers: int | None = None,
) -> ExperimentReport:
    """Success rate of the scale-free single-hitter sketch per (alpha, kind)."""
    alphas = [float(a) for a in alphas]
    kinds = list(kinds)
    if not alphas:
        raise ValueError("alphas must be nonempty")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    master = fold_seed(seed)
    t0 = time.perf_counter()

    def one(task):
        ki, ai, trial = task
        uniq = (ki * len(alphas) + ai) * trials + trial
        stream = gen_stream(
            StreamSpec(n=n, alpha=alphas[ai], kind=kinds[ki], seed=derive61(master, 200 + uniq))
        )
        sketch = Hh2(n=n, seed=derive61(master, 20_000 + uniq))
        sketch.process(stream)
        return 1 if sketch.query() == 0 else 0

    tasks = [(ki, ai, t) for ki in range(len(kinds)) for ai in range(len(alphas)) for t in range(trials)]
    wins = _pool_map(one, tasks, workers)
    by_cell: dict[tuple[int, int], int] = {}
    for (ki, ai, _t), w in zip(tasks, wins):
        by_cell[(ki, ai)] = by_cell.get((ki, ai), 0) + w

    table = []
    for ki, kind in enumerate(kinds):
        for ai, alpha in enumerate(alphas):
            successes = by_cell[(ki, ai)]
            table.append(
                {
                    "kind": kind,
                    "alpha": alpha,
                    "successes": successes,
                    "trials": trials,
                    "rate": successes / trials,
                }
            )
    report = ExperimentReport(
        experiment="heaviness",
        config={"n": n, "alphas": alphas, "kinds": kinds, "trials": trials, "seed": seed},
        table=table,
        aggregates={
            "min_rate": min(row["rate"] for row in table),
            "max_rate": max(row["rate"] for row in table),
        },
    )
    report.timing["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return report


# ---------------------------------------------------------------------------
# speed / space comparison
# ---------------------------------------------------------------------------


def _timed_rate(sketch, stream, windows: int) -> float:
    """updates/ms as the median over consecutive timing windows of one pass."""
    bounds = np.linspace(0, stream.size, windows + 1).astype(np.int64)
    rates = []
    for w in range(windows):
        chunk = stream[bounds[w] : bounds[w + 1]]
        start = time.perf_counter()
        sketch.process(chunk)
        elapsed = time.perf_counter() - start
        rates.append(chunk.size / (elapsed * 1e3))
    rates.sort()
    return rates[(len(rates) - 1) // 2]


def cmd_compare(
    n_list,
    alpha: float,
    trials: int,
    seed: int,
    kind: str = "random",
    windows: int = DEFAULT_TIMING_WINDOWS,
) -> ExperimentReport:
    """Update rate and computed state size: scale-free sketch vs baseline."""
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list or trials < 1:
        raise ValueError("need a nonempty n-list and trials >= 1")
    master = fold_seed(seed)
    t0 = time.perf_counter()
    table = []
    for n in n_list:
        stream = gen_stream(StreamSpec(n=n, alpha=alpha, kind=kind, seed=derive61(master, 300 + n % 997)))
        warm = stream[: min(stream.size, 50_000)]
        # warm-up pass: compile and touch the code paths off the clock
        Hh2(n=n, seed=1).process(warm)
        CountSketch.baseline(n, seed=1).process(warm)
        for name in ("hh2", "countsketch"):
            rates = []
            state_bytes = 0
            hits = 0
            for trial in range(trials):
                s = derive61(master, 30_000 + n % 997 + trial * 17)
                if name == "hh2":
                    sketch = Hh2(n=n, seed=s)
                else:
                    sketch = CountSketch.baseline(n, seed=s)
                rates.append(_timed_rate(sketch, stream, windows))
                state_bytes = sketch.state_bytes()
                answer = sketch.query() if name == "hh2" else sketch.top_candidate()
                hits += 1 if answer == 0 else 0
            rates.sort()
            table.append(
                {
                    "n": n,
                    "sketch": name,
                    "updates_per_ms": rates[(len(rates) - 1) // 2],
                    "state_bytes": state_bytes,
                    "success_rate": hits / trials,
                }
            )
    speedups = {}
    state_ratio = {}
    for n in n_list:
        h = next(r for r in table if r["n"] == n and r["sketch"] == "hh2")
        c = next(r for r in table if r["n"] == n and r["sketch"] == "countsketch")
        speedups[f"speedup_n{n}"] = h["updates_per_ms"] / c["updates_per_ms"]
        state_ratio[f"state_ratio_n{n}"] = h["state_bytes"] / c["state_bytes"]
    report = ExperimentReport(
        experiment="compare",
        config={
            "n_list": n_list,
            "alpha": alpha,
            "kind": kind,
            "trials": trials,
            "windows": windows,
            "seed": seed,
        },
        table=table,
        aggregates=state_ratio,
    )
    # rate-derived figures are machine-dependent: keep them out of the
    # deterministic sections of the report
    report.timing.update(speedups)
    report.timing["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return report


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------


def cmd_run(
    items: np.ndarray,
    epsilon: float,
    delta: float,
    mode: str,
    seed: int,
    with_oracle: bool = False,
    sketch=None,
) -> tuple[ExperimentReport, "object"]:
    """Feed one stream into a heavy-hitters sketch and report its listing.

    Returns (report, sketch) so callers can snapshot the sketch state.
    """
    from .bptree import BpTree, BpTreeConfig

    items = np.ascontiguousarray(items, dtype=np.int64)
    t0 = time.perf_counter()
    if sketch is None:
        n = int(items.max()) + 1 if items.size else 1
        sketch = BpTree(BpTreeConfig(epsilon=epsilon, delta=delta, n=n, mode=mode, seed=seed))
    sketch.process(items)
    listing = sketch.query()
    table = []
    truth = None
    true_heavy = set()
    if with_oracle:
        truth = exact_stats(items)
        true_heavy = heavy_set(truth, sketch.config.epsilon)
    for item, est in listing:
        row = {"item": item, "estimate": est}
        if with_oracle:
            row["true_frequency"] = truth.freq(item)
            row["verdict"] = "true-positive" if item in true_heavy else "false-positive"
        table.append(row)
    aggregates = {"returned": len(listing)}
    if with_oracle:
        returned = {item for item, _ in listing}
        aggregates["true_heavy_count"] = len(true_heavy)
        aggregates["missed"] = sorted(true_heavy - returned)
        aggregates["false_positives"] = sorted(returned - true_heavy)
    report = ExperimentReport(
        experiment="run",
        config={
            "epsilon": sketch.config.epsilon,
            "delta": sketch.config.delta,
            "mode": sketch.config.mode,
            "rows": sketch.config.rows,
            "buckets": sketch.config.buckets,
            "seed": seed,
            "stream_length": int(items.size),
            "oracle": bool(with_oracle),
        },
        table=table,
        aggregates=aggregates,
    )
    report.timing["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return report, sketch
