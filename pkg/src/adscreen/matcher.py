"""Keyword matcher: compiles a lexicon into an automaton and scans text.

The scan inner loop exists twice: a Cython extension (``adscreen._scan``)
and a pure-Python fallback (``adscreen._scan_py``). The compiled core is
selected at import when available; ``BACKEND`` records which one won.
``benchmarks/bench_scan.py`` compares the two.

Offsets reported by ``find*`` are byte offsets into the UTF-8 encoding of
the lowercased text (identical to character offsets for ASCII input).
"""

from __future__ import annotations

import numpy as np

from .automaton import KeywordAutomaton
from .errors import ConfigError
from .lexicon import Lexicon

try:
    from . import _scan as _default_kernel

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _scan_py as _default_kernel

    BACKEND = "python"

from . import _scan_py as _python_kernel


def _kernel_for(backend: str | None):
    if backend is None:
        return _default_kernel
    if backend == "python":
        return _python_kernel
    if backend == "compiled":
        if BACKEND != "compiled":
            raise ConfigError("compiled scan core is not available")
        return _default_kernel
    raise ConfigError(f"unknown scan backend {backend!r}")


class KeywordMatcher:
    """Single-pass, case-insensitive, word-boundary keyword scanner."""

    def __init__(self, lexicon: Lexicon, backend: str | None = None):
        self.lexicon = lexicon
        self.keywords = lexicon.keywords
        self._automaton = KeywordAutomaton(self.keywords)
        self._kernel = _kernel_for(backend)
        self.backend = "compiled" if self._kernel is not _python_kernel else "python"

    def __len__(self) -> int:
        return len(self.keywords)

    @staticmethod
    def normalize(text: str) -> bytes:
        return text.lower().encode("utf-8")

    def count_bytes(self, data: bytes, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.zeros(len(self.keywords), dtype=np.int64)
        a = self._automaton
        self._kernel.count_scan(
            a.delta, a.out_offsets, a.out_patterns, a.pattern_lengths, a.word_mask, data, out
        )
        return out

    def count(self, text: str, out: np.ndarray | None = None) -> np.ndarray:
        """Hit count per keyword (indexed like the lexicon)."""
        return self.count_bytes(self.normalize(text), out=out)

    def find_bytes(self, data: bytes) -> tuple[np.ndarray, np.ndarray]:
        a = self._automaton
        return self._kernel.find_scan(
            a.delta, a.out_offsets, a.out_patterns, a.pattern_lengths, a.word_mask, data
        )

    def find_all(self, text: str) -> list[tuple[str, int]]:
        """All hits as (keyword, byte offset) in scan order."""
        pids, starts = self.find_bytes(self.normalize(text))
        return [(self.keywords[p], int(s)) for p, s in zip(pids, starts)]


def compile_matcher(lexicon: Lexicon, backend: str | None = None) -> KeywordMatcher:
    return KeywordMatcher(lexicon, backend=backend)
