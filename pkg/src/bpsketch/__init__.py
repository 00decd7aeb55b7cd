"""Constant-memory l2 heavy-hitters sketches and benchmark harness.

The public surface:

* :class:`~bpsketch.hh1.Hh1` - learn one dominant item given a scale guess.
* :class:`~bpsketch.hh2.Hh2` - the same, scale-free, via F2-estimate doubling.
* :class:`~bpsketch.bptree.BpTree` - all epsilon-heavy hitters via a bucket
  grid of learners plus an auxiliary CountSketch (standard and fast modes).
* :class:`~bpsketch.f2_tracker.F2Tracker` - running second-moment estimates.
* :class:`~bpsketch.countsketch.CountSketch` - the comparison baseline.
* :mod:`~bpsketch.streams` / :mod:`~bpsketch.oracle` - synthetic stream
  generators and brute-force ground truth for verification.

Hot kernels are numba-compiled by default; set ``BPSKETCH_BACKEND=python``
to run the identical pure-Python paths (see ``bpsketch._backend``).
"""

from ._backend import BACKEND, NUMBA_ENABLED
from .bptree import BpTree, BpTreeConfig
from .countsketch import CountSketch
from .f2_tracker import F2Tracker
from .hashing import PairwiseHash, SignFamily, TinyGf2SignFamily, make_pairwise, prefix_match, label_bit
from .hh1 import Hh1
from .hh2 import Hh2
from .oracle import ExactStats, exact_stats, heavy_set, sup_process_estimate, tail_norm
from .streams import StreamSpec, gen_stream, multi_heavy_stream, stream_from_file, write_stream

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "BpTree",
    "BpTreeConfig",
    "CountSketch",
    "ExactStats",
    "F2Tracker",
    "Hh1",
    "Hh2",
    "PairwiseHash",
    "SignFamily",
    "StreamSpec",
    "TinyGf2SignFamily",
    "exact_stats",
    "gen_stream",
    "heavy_set",
    "label_bit",
    "make_pairwise",
    "multi_heavy_stream",
    "prefix_match",
    "stream_from_file",
    "sup_process_estimate",
    "tail_norm",
    "write_stream",
]

__version__ = "0.1.0"
