"""Multi-pattern string matching automaton (Aho-Corasick with a dense DFA).

Built once per lexicon, then shared read-only by every scan. Construction
has three phases:

    1. Insert each pattern into a byte trie.
    2. Compute failure links breadth-first: a node's failure link points to
       the longest proper suffix of its path that is also a trie path.
    3. Collapse goto + failure into a dense transition table
       ``delta[state, byte]`` so the scan never chases failure chains, and
       propagate output sets down failure links (a state reports every
       pattern that ends at it, including patterns that are suffixes of
       its path).

The scan itself lives in ``_scan`` (compiled) / ``_scan_py`` (fallback);
both consume the flat arrays this class exposes. Patterns and scanned text
are matched on the UTF-8 bytes of their lowercased form; a hit counts only
if the bytes on both sides are non-word (word = ASCII alphanumeric, or any
non-ASCII byte, which keeps multi-byte characters from being split).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import ConfigError


def word_byte_mask() -> np.ndarray:
    mask = np.zeros(256, dtype=np.uint8)
    for lo, hi in ((48, 57), (65, 90), (97, 122)):
        mask[lo : hi + 1] = 1
    mask[128:] = 1
    return mask


WORD_MASK = word_byte_mask()


class KeywordAutomaton:
    """Dense-DFA automaton over a fixed pattern list.

    Attributes exposed for the scan kernels:
        delta        int32[n_states, 256] transition table
        out_offsets  int32[n_states + 1]  CSR row pointers into out_patterns
        out_patterns int32[total_outputs] pattern ids reported per state
        pattern_lengths int32[n_patterns] byte length of each pattern
    """

    def __init__(self, patterns: list[str]):
        if not patterns:
            raise ConfigError("no patterns to compile")
        self.patterns = list(patterns)
        pattern_bytes = [p.encode("utf-8") for p in patterns]
        if any(len(pb) == 0 for pb in pattern_bytes):
            raise ConfigError("empty pattern")

        children: list[dict[int, int]] = [{}]
        outputs: list[list[int]] = [[]]
        for pid, pb in enumerate(pattern_bytes):
            node = 0
            for byte in pb:
                nxt = children[node].get(byte)
                if nxt is None:
                    children.append({})
                    outputs.append([])
                    nxt = len(children) - 1
                    children[node][byte] = nxt
                node = nxt
            outputs[node].append(pid)

        n_states = len(children)
        delta = np.zeros((n_states, 256), dtype=np.int32)
        fail = [0] * n_states

        queue: deque[int] = deque()
        for byte, child in children[0].items():
            delta[0, byte] = child
            fail[child] = 0
            queue.append(child)

        # BFS order guarantees delta[fail[s]] and outputs[fail[s]] are final
        # before state s needs them.
        while queue:
            s = queue.popleft()
            outputs[s].extend(outputs[fail[s]])
            for byte, child in children[s].items():
                fail[child] = int(delta[fail[s], byte])
                queue.append(child)
            row = delta[fail[s]].copy()
            for byte, child in children[s].items():
                row[byte] = child
            delta[s] = row

        self.delta = delta
        self.out_offsets = np.zeros(n_states + 1, dtype=np.int32)
        self.out_offsets[1:] = np.cumsum([len(o) for o in outputs], dtype=np.int32)
        flat: list[int] = []
        for o in outputs:
            flat.extend(o)
        self.out_patterns = np.asarray(flat, dtype=np.int32)
        self.pattern_lengths = np.asarray([len(pb) for pb in pattern_bytes], dtype=np.int32)
        self.word_mask = WORD_MASK

    @property
    def n_states(self) -> int:
        return self.delta.shape[0]
