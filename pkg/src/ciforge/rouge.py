"""ROUGE-L similarity between case backgrounds.

Tokenization lowercases, splits on non-alphanumeric runs, and drops empties.
The F-measure (beta = 1) is symmetric and lands in [0, 1]; either side empty
scores 0.  The LCS inner loop dispatches to a compiled kernel when the
extension built, otherwise to the pure Python twin; set CIFORGE_PURE_PYTHON=1
to force the fallback.
"""

from __future__ import annotations

import os
import re
from array import array

from ciforge import _lcs_py

try:
    from ciforge._lcskernel import lcs_length_i32 as _native_lcs
except ImportError:  # extension not built
    _native_lcs = None

if os.environ.get("CIFORGE_PURE_PYTHON"):
    _native_lcs = None

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def kernel_in_use() -> str:
    return "native" if _native_lcs is not None else "pure-python"


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def lcs_length(a: list, b: list) -> int:
    """LCS length between two token lists."""
    if _native_lcs is None:
        return _lcs_py.lcs_length(a, b)
    vocab: dict = {}
    return _native_lcs(_encode(a, vocab), _encode(b, vocab))


def _encode(tokens: list, vocab: dict) -> array:
    return array("i", [vocab.setdefault(t, len(vocab)) for t in tokens])


def _f_measure(lcs: int, len_a: int, len_b: int) -> float:
    if len_a == 0 or len_b == 0 or lcs == 0:
        return 0.0
    precision = lcs / len_b
    recall = lcs / len_a
    return 2 * precision * recall / (precision + recall)


def rouge_l(a: str, b: str) -> float:
    tokens_a = tokenize(a)
    tokens_b = tokenize(b)
    return _f_measure(lcs_length(tokens_a, tokens_b), len(tokens_a), len(tokens_b))


class SimilarityIndex:
    """Incrementally built reference set for max-similarity queries.

    Token ids are interned once per text, so repeated queries against a
    growing reference pool avoid re-tokenizing and re-hashing.
    """

    def __init__(self):
        self._vocab: dict[str, int] = {}
        self._refs: list[array] = []

    def __len__(self) -> int:
        return len(self._refs)

    def _prepare(self, text: str) -> array:
        return _encode(tokenize(text), self._vocab)

    def add(self, text: str) -> None:
        self._refs.append(self._prepare(text))

    def max_similarity(self, text: str) -> float:
        """Highest ROUGE-L of ``text`` against the references; 0 when empty."""
        candidate = self._prepare(text)
        best = 0.0
        for ref in self._refs:
            if _native_lcs is not None:
                lcs = _native_lcs(candidate, ref)
            else:
                lcs = _lcs_py.lcs_length(candidate, ref)
            score = _f_measure(lcs, len(candidate), len(ref))
            if score > best:
                best = score
        return best
