"""Two-particle interaction matrices and their n-particle tensor calculus.

``B`` encodes arrivals from the left neighbour (a jump from ``(x-1, x)`` to
``(x, x+1)``), ``B'`` encodes label exchanges at fixed positions
``(x, x+1)``.  Everything here is 0/1 data, so all identities are checked
exactly over the integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

from .errors import InvalidParameterError
from .rules import RuleType
from .tensor import (
    TensorOperator,
    all_words,
    check_dimension,
    format_word,
    kron_embed,
    product,
)

PairMatrix = TensorOperator


def build_pair_matrices(N: int, rule) -> Tuple[PairMatrix, PairMatrix]:
    """Return ``(B, B')`` for ``N`` species under ``rule``."""
    rule = RuleType.parse(rule)
    if N < 1:
        raise InvalidParameterError(f"species count must be positive, got {N}")
    b, bp = {}, {}
    for nu in all_words(2, N):
        a, c = nu
        swapped = (c, a)
        if rule is RuleType.DROP_PUSH:
            if a == c:
                b[nu] = {nu: 1}
            elif a < c:
                b[nu] = {swapped: 1}
            else:
                bp[nu] = {swapped: 1}
        elif rule is RuleType.TASEP:
            if a < c:
                b[nu] = {swapped: 1}
            elif a == c:
                bp[nu] = {nu: 1}
            else:
                bp[nu] = {swapped: 1}
        else:
            if a > c:
                b[nu] = {nu: 1}
            else:
                bp[nu] = {nu: 1}
    return TensorOperator.from_word_map(2, N, b), TensorOperator.from_word_map(2, N, bp)


def embed(m: PairMatrix, i: int, n: int) -> TensorOperator:
    """Place the two-site matrix ``m`` on word positions ``i, i+1``."""
    return kron_embed(m, i, n)


def chain(ops, n: int, N: int) -> TensorOperator:
    """Product of 0/1 operators, asserting the partial-permutation property."""
    ops = list(ops)
    result = product(ops, n, N)
    if all(op.is_partial_permutation() for op in ops):
        assert result.is_partial_permutation(), "product of 0/1 factors left the partial-permutation class"
    return result


class PairAlgebra:
    """Embedded ``B_i``, ``B'_i`` and the derived operators for fixed ``(n, N, rule)``."""

    def __init__(self, n: int, N: int, rule):
        if n < 2:
            raise InvalidParameterError(f"need at least two particles, got n={n}")
        check_dimension(n, N)
        self.n = n
        self.N = N
        self.rule = RuleType.parse(rule)
        self.B, self.Bp = build_pair_matrices(N, self.rule)

    @cached_property
    def identity(self) -> TensorOperator:
        return TensorOperator.identity(self.n, self.N)

    @cached_property
    def _b(self) -> List[TensorOperator]:
        return [self.identity] + [embed(self.B, i, self.n) for i in range(1, self.n)]

    @cached_property
    def _bp(self) -> List[TensorOperator]:
        return [self.identity] + [embed(self.Bp, i, self.n) for i in range(1, self.n)]

    def b(self, i: int) -> TensorOperator:
        """``B_i``; ``B_0`` is the identity."""
        if not 0 <= i <= self.n - 1:
            raise InvalidParameterError(f"B_{i} undefined for n={self.n}")
        return self._b[i]

    def bp(self, i: int) -> TensorOperator:
        if not 0 <= i <= self.n - 1:
            raise InvalidParameterError(f"B'_{i} undefined for n={self.n}")
        return self._bp[i]

    def b_run(self, start: int, stop: int) -> TensorOperator:
        """``B_start B_(start+-1) ... B_stop`` stepping towards ``stop``; empty if out of order."""
        return self._run(self.b, start, stop)

    def bp_run(self, start: int, stop: int) -> TensorOperator:
        return self._run(self.bp, start, stop)

    def _run(self, getter, start, stop):
        step = 1 if stop >= start else -1
        return chain((getter(k) for k in range(start, stop + step, step)), self.n, self.N)

    def swap(self, i: int, j: int) -> TensorOperator:
        """``M_ij = B_(j-1)...B_(i+1) B'_i B'_(i+1)...B'_(j-1)``."""
        if not 1 <= i < j <= self.n:
            raise InvalidParameterError(f"need 1 <= i < j <= n, got i={i}, j={j}, n={self.n}")
        left = [self.b(k) for k in range(j - 1, i, -1)]
        right = [self.bp(k) for k in range(i, j)]
        return chain(left + right, self.n, self.N)

    def same_shape_rate(self) -> TensorOperator:
        """``M_0``: sum of ``M_ij`` over all pairs."""
        total = TensorOperator.zero(self.n, self.N)
        for i in range(1, self.n):
            for j in range(i + 1, self.n + 1):
                total = total + self.swap(i, j)
        return total

    def arrival(self, i: int) -> TensorOperator:
        """``M_i = B_(i-1)...B_1``: first particle jumps across ``i-1`` neighbours."""
        if not 1 <= i <= self.n:
            raise InvalidParameterError(f"arrival index {i} outside 1..{self.n}")
        return chain((self.b(k) for k in range(i - 1, 0, -1)), self.n, self.N)

    def frak_a(self, k: int) -> TensorOperator:
        """Closed form of the inverse, ``I + B_(k+1) frakA_(k-1) B'_k``."""
        if not 0 <= k <= self.n - 2:
            raise InvalidParameterError(f"k={k} outside 0..{self.n - 2}")
        current = self.identity
        for level in range(1, k + 1):
            current = self.identity + self.b(level + 1) @ current @ self.bp(level)
        return current

    def a_matrix(self, k: int) -> TensorOperator:
        """``A_0 = I``, ``A_k = B_(k+1) (I + A_(k-1)) B'_k``."""
        if not 0 <= k <= self.n - 2:
            raise InvalidParameterError(f"k={k} outside 0..{self.n - 2}")
        current = self.identity
        for level in range(1, k + 1):
            current = self.b(level + 1) @ (self.identity + current) @ self.bp(level)
        return current


def swap_matrix(i: int, j: int, n: int, N: int, rule) -> TensorOperator:
    return PairAlgebra(n, N, rule).swap(i, j)


def frak_A(k: int, n: int, N: int, rule) -> TensorOperator:
    return PairAlgebra(n, N, rule).frak_a(k)


# -- identity suite -------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    witness_word: Optional[str] = None
    discrepancy: Optional[float] = None
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        out = {"name": self.name, "pass": self.passed}
        if self.witness_word is not None:
            out["witness_word"] = self.witness_word
        if self.discrepancy is not None:
            out["discrepancy"] = self.discrepancy
        if self.seed is not None:
            out["seed"] = self.seed
        return out


@dataclass
class IdentityReport:
    rule_type: RuleType
    n: int
    N: int
    checks: List[Check] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "rule_type": str(self.rule_type),
            "n": self.n,
            "N": self.N,
            "checks": [c.to_dict() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _compare(name: str, lhs: TensorOperator, rhs: TensorOperator) -> Check:
    witness = lhs.first_difference(rhs)
    return Check(name, witness is None, None if witness is None else format_word(witness))


def verify_identities(n: int, N: int, rule) -> IdentityReport:
    """Evaluate every reducibility identity exactly and collect the outcomes."""
    if n < 2:
        raise InvalidParameterError(f"need n >= 2, got {n}")
    alg = PairAlgebra(n, N, rule)
    report = IdentityReport(alg.rule, n, N)
    add = report.checks.append
    zero = TensorOperator.zero(n, N)
    ident = alg.identity

    total = alg.B + alg.Bp
    bad = None
    for j in range(N * N):
        col = total.column(j)
        if len(col) != 1 or list(col.values()) != [1]:
            bad = j
            break
    add(Check("pair_columns_single_outcome", bad is None,
              None if bad is None else format_word(((bad // N) + 1, (bad % N) + 1))))

    for i in range(1, n):
        for j in range(i + 2, n):
            for (li, left), (lj, right) in (
                (("B", alg.b(i)), ("B", alg.b(j))),
                (("B", alg.b(i)), ("B'", alg.bp(j))),
                (("B'", alg.bp(i)), ("B", alg.b(j))),
                (("B'", alg.bp(i)), ("B'", alg.bp(j))),
            ):
                add(_compare(f"commute[{li}_{i},{lj}_{j}]", left @ right, right @ left))

    if n >= 3:
        lhs = chain([alg.bp_run(1, n - 1), alg.b_run(n - 2, 1)], n, N)
        rhs = chain([alg.b_run(n - 1, 2), alg.bp_run(1, n - 1)], n, N)
        add(_compare("braid", lhs, rhs))

    # zero products; indices satisfy 2 <= l <= k+1 <= n-1
    for k in range(1, n - 1):
        for l in range(2, k + 2):
            forms = (
                (alg.b_run(k + 1, l), alg.bp_run(l - 1, k)),
                (alg.bp_run(l - 1, k), alg.b_run(k + 1, l)),
                (alg.bp_run(k + 1, l), alg.b_run(l - 1, k)),
                (alg.b_run(l - 1, k), alg.bp_run(k + 1, l)),
            )
            for f, (outer, inner) in enumerate(forms, start=1):
                add(_compare(f"zero_product{f}[k={k},l={l}]", chain([outer, inner, outer], n, N), zero))

    for k in range(1, n - 1):
        c = chain([alg.b_run(k + 1, 2), alg.bp_run(1, k)], n, N)
        add(_compare(f"chain_nilpotent[k={k}]", c @ c, zero))

    for k in range(1, n - 1):
        a = alg.a_matrix(k)
        add(_compare(f"A_nilpotent[k={k}]", a @ a, zero))

    for k in range(1, n - 1):
        x = alg.b(k + 1) @ alg.frak_a(k - 1) @ alg.bp(k)
        add(_compare(f"frak_A_inverse[k={k}]", (ident - x) @ (ident + x), ident))
        add(_compare(f"frak_A_inverse_left[k={k}]", (ident + x) @ (ident - x), ident))
        add(_compare(f"cross_term_vanishes[k={k}]", x @ alg.b_run(k + 1, 1), zero))

    for k in range(1, n):
        lhs = alg.frak_a(k - 1) @ alg.bp(k)
        rhs = zero
        for i in range(1, k + 1):
            rhs = rhs + alg.swap(i, k + 1)
        add(_compare(f"frak_A_sum[k={k}]", lhs, rhs))

    for i in range(1, n - 1):
        for j in range(i + 1, n):
            lhs = alg.b(j) @ alg.swap(i, j) @ alg.bp(j)
            add(_compare(f"M_shift[i={i},j={j}]", lhs, alg.swap(i, j + 1)))

    return report


REDUCIBILITY_PREFIXES = (
    "braid",
    "zero_product",
    "chain_nilpotent",
    "A_nilpotent",
    "frak_A",
    "cross_term",
    "M_shift",
)


def is_reducibility_check(name: str) -> bool:
    return name.startswith(REDUCIBILITY_PREFIXES)
