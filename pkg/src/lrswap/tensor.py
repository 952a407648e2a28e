"""Sparse operators on the species-word basis.

Basis vectors of the ``n``-particle space are words ``w = (w_1, ..., w_n)``
with letters in ``1..N``, ordered lexicographically from ``11..1`` to
``NN..N``.  An operator is stored column-wise: for every input word index
the map ``{output word index: coefficient}``.  Coefficients may be ints,
``Fraction`` or complex numbers; structural zeros are never stored.
"""

from __future__ import annotations

import itertools
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidParameterError, ResourceLimitError

Word = Tuple[int, ...]
Column = Dict[int, object]

MAX_DIMENSION = 4096


def word_to_index(word: Sequence[int], N: int) -> int:
    idx = 0
    for letter in word:
        if not 1 <= letter <= N:
            raise InvalidParameterError(f"letter {letter} outside 1..{N}")
        idx = idx * N + (letter - 1)
    return idx


def index_to_word(idx: int, n: int, N: int) -> Word:
    letters = []
    for _ in range(n):
        idx, r = divmod(idx, N)
        letters.append(r + 1)
    return tuple(reversed(letters))


def all_words(n: int, N: int) -> Iterator[Word]:
    """Words of length ``n`` in lexicographic order."""
    return itertools.product(range(1, N + 1), repeat=n)


def format_word(word: Sequence[int]) -> str:
    if all(letter < 10 for letter in word):
        return "".join(str(letter) for letter in word)
    return ".".join(str(letter) for letter in word)


def parse_word(text: str) -> Word:
    text = text.strip()
    if "." in text or "," in text:
        return tuple(int(p) for p in text.replace(",", ".").split("."))
    return tuple(int(ch) for ch in text)


def check_dimension(n: int, N: int, cap: int = MAX_DIMENSION) -> int:
    if n < 1 or N < 1:
        raise InvalidParameterError(f"need n >= 1 and N >= 1, got n={n}, N={N}")
    dim = N**n
    if dim > cap:
        raise ResourceLimitError(f"N^n = {N}^{n} = {dim} exceeds the cap {cap}")
    return dim


def _is_zero(c) -> bool:
    return c == 0


class TensorOperator:
    """Sparse ``N^n x N^n`` operator in column-map form.

    Instances are treated as immutable; every arithmetic operation returns a
    new operator.
    """

    __slots__ = ("n", "N", "_cols")

    def __init__(self, n: int, N: int, cols: Mapping[int, Mapping[int, object]]):
        self.n = n
        self.N = N
        clean: Dict[int, Column] = {}
        for j, col in cols.items():
            kept = {i: c for i, c in col.items() if not _is_zero(c)}
            if kept:
                clean[j] = kept
        self._cols = clean

    # -- construction -------------------------------------------------------

    @classmethod
    def identity(cls, n: int, N: int, one=1) -> "TensorOperator":
        return cls(n, N, {j: {j: one} for j in range(N**n)})

    @classmethod
    def zero(cls, n: int, N: int) -> "TensorOperator":
        return cls(n, N, {})

    @classmethod
    def from_word_map(cls, n: int, N: int, mapping: Mapping[Word, Mapping[Word, object]]):
        cols = {}
        for src, outs in mapping.items():
            cols[word_to_index(src, N)] = {word_to_index(dst, N): c for dst, c in outs.items()}
        return cls(n, N, cols)

    @classmethod
    def from_dense(cls, array, n: int, N: int) -> "TensorOperator":
        a = np.asarray(array, dtype=object)
        dim = N**n
        if a.shape != (dim, dim):
            raise InvalidParameterError(f"expected shape {(dim, dim)}, got {a.shape}")
        cols = {}
        for j in range(dim):
            col = {i: a[i, j] for i in range(dim) if not _is_zero(a[i, j])}
            if col:
                cols[j] = col
        return cls(n, N, cols)

    def to_dense(self, dtype=object) -> np.ndarray:
        dim = self.dim
        out = np.zeros((dim, dim), dtype=dtype)
        for j, col in self._cols.items():
            for i, c in col.items():
                out[i, j] = c
        return out

    # -- inspection ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.N**self.n

    @property
    def nnz(self) -> int:
        return sum(len(col) for col in self._cols.values())

    def column(self, j: int) -> Column:
        return dict(self._cols.get(j, {}))

    def entry(self, i: int, j: int):
        return self._cols.get(j, {}).get(i, 0)

    def word_entry(self, row: Sequence[int], col: Sequence[int]):
        return self.entry(word_to_index(row, self.N), word_to_index(col, self.N))

    def items(self) -> Iterator[Tuple[int, int, object]]:
        for j in sorted(self._cols):
            col = self._cols[j]
            for i in sorted(col):
                yield i, j, col[i]

    def is_zero(self) -> bool:
        return not self._cols

    def is_partial_permutation(self) -> bool:
        """Every column holds at most one nonzero entry and it equals 1."""
        for col in self._cols.values():
            if len(col) > 1:
                return False
            (c,) = col.values()
            if c != 1:
                return False
        return True

    # -- arithmetic ---------------------------------------------------------

    def _check_compatible(self, other: "TensorOperator") -> None:
        if (self.n, self.N) != (other.n, other.N):
            raise InvalidParameterError(
                f"operator shapes differ: (n={self.n}, N={self.N}) vs (n={other.n}, N={other.N})"
            )

    def __matmul__(self, other: "TensorOperator") -> "TensorOperator":
        self._check_compatible(other)
        cols = {}
        for j, bcol in other._cols.items():
            acc: Column = {}
            for k, b in bcol.items():
                acol = self._cols.get(k)
                if not acol:
                    continue
                for i, a in acol.items():
                    acc[i] = acc.get(i, 0) + a * b
            cols[j] = acc
        return TensorOperator(self.n, self.N, cols)

    def _combine(self, other: "TensorOperator", sign: int) -> "TensorOperator":
        self._check_compatible(other)
        cols = {j: dict(col) for j, col in self._cols.items()}
        for j, col in other._cols.items():
            tgt = cols.setdefault(j, {})
            for i, c in col.items():
                tgt[i] = tgt.get(i, 0) + sign * c
        return TensorOperator(self.n, self.N, cols)

    def __add__(self, other: "TensorOperator") -> "TensorOperator":
        return self._combine(other, 1)

    def __sub__(self, other: "TensorOperator") -> "TensorOperator":
        return self._combine(other, -1)

    def __neg__(self) -> "TensorOperator":
        return self.scale(-1)

    def scale(self, factor) -> "TensorOperator":
        return TensorOperator(
            self.n, self.N, {j: {i: factor * c for i, c in col.items()} for j, col in self._cols.items()}
        )

    def __mul__(self, factor) -> "TensorOperator":
        if isinstance(factor, TensorOperator):
            raise TypeError("use @ for operator products")
        return self.scale(factor)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "TensorOperator":
        result = TensorOperator.identity(self.n, self.N)
        for _ in range(k):
            result = result @ self
        return result

    def apply(self, vector: Mapping[int, object]) -> Dict[int, object]:
        """Apply to a sparse vector ``{word index: coefficient}``."""
        out: Dict[int, object] = {}
        for j, v in vector.items():
            for i, c in self._cols.get(j, {}).items():
                out[i] = out.get(i, 0) + c * v
        return {i: c for i, c in out.items() if not _is_zero(c)}

    # -- comparison ---------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorOperator):
            return NotImplemented
        return (self.n, self.N) == (other.n, other.N) and (self - other).is_zero()

    __hash__ = None

    def first_difference(self, other: "TensorOperator") -> Optional[Word]:
        """Input basis word of the first column where ``self`` and ``other`` differ."""
        diff = self - other
        if diff.is_zero():
            return None
        return index_to_word(min(diff._cols), self.n, self.N)

    def max_abs_diff(self, other: "TensorOperator") -> float:
        diff = self - other
        return max((abs(complex(c)) for _, _, c in diff.items()), default=0.0)

    def __repr__(self) -> str:
        return f"TensorOperator(n={self.n}, N={self.N}, nnz={self.nnz})"


def kron_embed(two_site: TensorOperator, i: int, n: int) -> TensorOperator:
    """``I^(i-1) (x) m (x) I^(n-i-1)`` for a two-site operator ``m``."""
    if two_site.n != 2:
        raise InvalidParameterError("only two-site operators can be embedded")
    if not 1 <= i <= n - 1:
        raise InvalidParameterError(f"site {i} outside 1..{n - 1}")
    N = two_site.N
    check_dimension(n, N)
    local = {}
    for j in range(N * N):
        col = two_site.column(j)
        if col:
            local[index_to_word(j, 2, N)] = {index_to_word(r, 2, N): c for r, c in col.items()}
    cols = {}
    for word in all_words(n, N):
        pair = word[i - 1 : i + 1]
        outs = local.get(pair)
        if not outs:
            continue
        col = {}
        for out_pair, c in outs.items():
            out = word[: i - 1] + out_pair + word[i + 1 :]
            col[word_to_index(out, N)] = c
        cols[word_to_index(word, N)] = col
    return TensorOperator(n, N, cols)


def product(ops: Iterable[TensorOperator], n: int, N: int) -> TensorOperator:
    """Left-to-right matrix product; the empty product is the identity."""
    result = None
    for op in ops:
        result = op if result is None else result @ op
    return TensorOperator.identity(n, N) if result is None else result
