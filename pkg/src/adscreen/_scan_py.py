"""Pure-Python scan kernels: the fallback when the compiled core is absent.

Semantics are identical to ``_scan.pyx`` byte for byte; the test suite
asserts parity whenever the compiled module is importable. Plain Python
lists are used instead of numpy indexing because per-element numpy access
is an order of magnitude slower inside this loop.
"""

from __future__ import annotations

import numpy as np


def _as_lists(delta, out_offsets, out_patterns, pattern_lengths, word_mask):
    return (
        delta.ravel().tolist(),
        out_offsets.tolist(),
        out_patterns.tolist(),
        pattern_lengths.tolist(),
        word_mask.tolist(),
    )


def count_scan(delta, out_offsets, out_patterns, pattern_lengths, word_mask, data, counts):
    """Add the number of boundary-delimited hits of each pattern to counts."""
    dflat, off, pats, plen, wmask = _as_lists(delta, out_offsets, out_patterns, pattern_lengths, word_mask)
    n = len(data)
    s = 0
    for i in range(n):
        s = dflat[(s << 8) | data[i]]
        j = off[s]
        end = off[s + 1]
        while j < end:
            pid = pats[j]
            start = i - plen[pid] + 1
            if (start == 0 or not wmask[data[start - 1]]) and (i + 1 == n or not wmask[data[i + 1]]):
                counts[pid] += 1
            j += 1


def find_scan(delta, out_offsets, out_patterns, pattern_lengths, word_mask, data):
    """Return (pattern_ids, start_offsets) arrays for every hit, in scan order."""
    dflat, off, pats, plen, wmask = _as_lists(delta, out_offsets, out_patterns, pattern_lengths, word_mask)
    n = len(data)
    s = 0
    hit_pids: list[int] = []
    hit_starts: list[int] = []
    for i in range(n):
        s = dflat[(s << 8) | data[i]]
        j = off[s]
        end = off[s + 1]
        while j < end:
            pid = pats[j]
            start = i - plen[pid] + 1
            if (start == 0 or not wmask[data[start - 1]]) and (i + 1 == n or not wmask[data[i + 1]]):
                hit_pids.append(pid)
                hit_starts.append(start)
            j += 1
    return np.asarray(hit_pids, dtype=np.int32), np.asarray(hit_starts, dtype=np.int64)
