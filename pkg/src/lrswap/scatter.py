"""Scattering matrices, multi-particle amplitudes and their consistency checks.

Scalars are either ``Fraction`` (exact checks) or complex floats.  The block
routines also accept numpy arrays of spectral values, which is how the
quadrature evaluates amplitudes on a whole grid at once.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from .errors import InvalidParameterError, SingularityError
from .pairalg import Check, IdentityReport, build_pair_matrices, embed
from .rules import RuleType
from .tensor import TensorOperator, check_dimension, index_to_word, word_to_index

ScatteringMatrix = TensorOperator

YBE_FLOAT_TOL = 1e-12
DEFAULT_SEED = 20250817


def _is_exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def _any_zero(x) -> bool:
    if isinstance(x, np.ndarray):
        return bool(np.any(x == 0))
    return x == 0


def _structurally_zero(x) -> bool:
    if isinstance(x, np.ndarray):
        return not np.any(x)
    return x == 0


def species_blocks(N: int) -> List[Tuple[Tuple[int, int], ...]]:
    """Invariant subspaces of ``B`` and ``B'``: ``(aa,)`` and ``(ab, ba)`` for ``a < b``."""
    blocks = [((a, a),) for a in range(1, N + 1)]
    blocks += [((a, b), (b, a)) for a, b in itertools.combinations(range(1, N + 1), 2)]
    return blocks


def _pair_entries(N: int, rule):
    B, Bp = build_pair_matrices(N, rule)

    def get(op, p, q):
        return op.entry(word_to_index(p, N), word_to_index(q, N))

    return B, Bp, get


def r_columns(xi_alpha, xi_beta, N: int, rule) -> Dict[Tuple[int, int], List[Tuple[Tuple[int, int], object]]]:
    """Blockwise ``R_{beta alpha}`` as ``{input pair: [(output pair, coefficient), ...]}``.

    ``R = -(I - B/xi_beta - B' xi_alpha)^-1 (I - B/xi_alpha - B' xi_beta)``.
    """
    rule = RuleType.parse(rule)
    if _any_zero(xi_alpha) or _any_zero(xi_beta):
        raise SingularityError("spectral values must be nonzero")
    B, Bp, get = _pair_entries(N, rule)
    inv_a = 1 / xi_alpha
    inv_b = 1 / xi_beta
    out: Dict[Tuple[int, int], List[Tuple[Tuple[int, int], object]]] = {}
    for words in species_blocks(N):
        size = len(words)
        left = [[(1 if p == q else 0) - get(B, p, q) * inv_b - get(Bp, p, q) * xi_alpha for q in words] for p in words]
        right = [[(1 if p == q else 0) - get(B, p, q) * inv_a - get(Bp, p, q) * xi_beta for q in words] for p in words]
        name = "".join(str(x) for x in words[0]) if size == 1 else "{%d,%d}" % words[0]
        if size == 1:
            det = left[0][0]
            if _any_zero(det):
                raise SingularityError(f"diagonal block {name} is singular", block=name)
            inv = [[1 / det]]
        else:
            det = left[0][0] * left[1][1] - left[0][1] * left[1][0]
            if _any_zero(det):
                raise SingularityError(f"mixed block {name} is singular", block=name)
            inv = [[left[1][1] / det, -left[0][1] / det], [-left[1][0] / det, left[0][0] / det]]
        for q_idx, q in enumerate(words):
            col = []
            for p_idx, p in enumerate(words):
                c = 0
                for k in range(size):
                    term_r = right[k][q_idx]
                    if _structurally_zero(inv[p_idx][k]) or _structurally_zero(term_r):
                        continue
                    c = c + inv[p_idx][k] * term_r
                if not _structurally_zero(c):
                    col.append((p, -c))
            out[q] = col
    return out


def r_matrix(xi_alpha, xi_beta, N: int, rule) -> ScatteringMatrix:
    """Two-particle scattering matrix ``R_{beta alpha}`` (an ``N^2 x N^2`` operator)."""
    if N < 1:
        raise InvalidParameterError(f"species count must be positive, got {N}")
    if not _is_exact(xi_alpha, xi_beta):
        xi_alpha, xi_beta = complex(xi_alpha), complex(xi_beta)
    elif xi_alpha == xi_beta:
        raise SingularityError("mixed blocks are singular when xi_alpha == xi_beta", block="mixed")
    cols = {}
    for q, outs in r_columns(xi_alpha, xi_beta, N, rule).items():
        cols[word_to_index(q, N)] = {word_to_index(p, N): c for p, c in outs}
    return TensorOperator(2, N, cols)


def r_matrix_dense(xi_alpha, xi_beta, N: int, rule) -> ScatteringMatrix:
    """Same matrix by full inversion of the ``N^2 x N^2`` factor (reference path)."""
    B, Bp = build_pair_matrices(N, rule)
    if _is_exact(xi_alpha, xi_beta):
        b = sympy.Matrix(B.to_dense())
        bp = sympy.Matrix(Bp.to_dense())
        eye = sympy.eye(N * N)
        xa, xb = sympy.Rational(xi_alpha), sympy.Rational(xi_beta)
        left = eye - b / xb - bp * xa
        if left.det() == 0:
            raise SingularityError("dense factor is singular")
        r = -(left.inv() * (eye - b / xa - bp * xb))
        dense = np.array([[Fraction(int(v.p), int(v.q)) for v in row] for row in r.tolist()], dtype=object)
        return TensorOperator.from_dense(dense, 2, N)
    xa, xb = complex(xi_alpha), complex(xi_beta)
    b = B.to_dense(float)
    bp = Bp.to_dense(float)
    eye = np.eye(N * N)
    left = eye - b / xb - bp * xa
    r = -np.linalg.solve(left, eye - b / xa - bp * xb)
    return TensorOperator.from_dense(r.astype(object), 2, N)


@dataclass(frozen=True)
class SpectralPoint:
    values: Tuple

    def __post_init__(self):
        if any(_any_zero(v) for v in self.values):
            raise InvalidParameterError("spectral values must be nonzero")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, label: int):
        """1-based access, matching particle labels."""
        if not 1 <= label <= len(self.values):
            raise InvalidParameterError(f"label {label} outside 1..{len(self.values)}")
        return self.values[label - 1]

    def check_regular(self) -> None:
        vals = self.values
        for v in vals:
            if not isinstance(v, np.ndarray) and v == 1:
                raise SingularityError("spectral value equal to 1")
        for a, b in itertools.combinations(vals, 2):
            if not isinstance(a, np.ndarray) and not isinstance(b, np.ndarray) and a == b:
                raise SingularityError("spectral values must be pairwise distinct")


def as_point(xi) -> SpectralPoint:
    return xi if isinstance(xi, SpectralPoint) else SpectralPoint(tuple(xi))


@dataclass(frozen=True)
class Permutation:
    """Permutation in one-line notation ``(sigma(1), ..., sigma(n))``."""

    images: Tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(v) for v in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise InvalidParameterError(f"{self.images} is not a permutation of 1..{len(images)}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        text = text.strip().strip("()")
        parts = text.replace(",", " ").split()
        if len(parts) == 1:
            parts = list(parts[0])
        return cls(tuple(int(p) for p in parts))

    @classmethod
    def all(cls, n: int):
        return [cls(p) for p in itertools.permutations(range(1, n + 1))]

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    @property
    def is_identity(self) -> bool:
        return self.images == tuple(range(1, self.n + 1))

    def inversions(self) -> List[Tuple[int, int]]:
        """Pairs ``(sigma(i), sigma(j))`` with ``i < j`` and ``sigma(i) > sigma(j)``."""
        s = self.images
        return [(s[i], s[j]) for i in range(self.n) for j in range(i + 1, self.n) if s[i] > s[j]]

    def reduced_word(self) -> List[int]:
        """Positions ``i_1, ..., i_k`` with ``sigma = T_{i_k} ... T_{i_1}`` (bubble sort)."""
        seq = list(self.images)
        sorting_swaps = []
        changed = True
        while changed:
            changed = False
            for i in range(len(seq) - 1):
                if seq[i] > seq[i + 1]:
                    seq[i], seq[i + 1] = seq[i + 1], seq[i]
                    sorting_swaps.append(i + 1)
                    changed = True
        return sorting_swaps[::-1]

    def all_reduced_words(self) -> List[List[int]]:
        """Every reduced word, found by peeling off the last applied transposition."""
        if self.is_identity:
            return [[]]
        words = []
        s = list(self.images)
        for i in range(self.n - 1):
            if s[i] > s[i + 1]:
                t = s[:]
                t[i], t[i + 1] = t[i + 1], t[i]
                for w in Permutation(tuple(t)).all_reduced_words():
                    words.append(w + [i + 1])
        return words

    def __str__(self) -> str:
        return "".join(str(v) for v in self.images)


def labelled_steps(word: Sequence[int], n: int) -> List[Tuple[int, int, int]]:
    """``(i, beta, alpha)`` for each transposition applied to ``(1, ..., n)`` in order."""
    seq = list(range(1, n + 1))
    steps = []
    for i in word:
        if not 1 <= i <= n - 1:
            raise InvalidParameterError(f"transposition T_{i} undefined for n={n}")
        alpha, beta = seq[i - 1], seq[i]
        steps.append((i, beta, alpha))
        seq[i - 1], seq[i] = beta, alpha
    return steps


def _word_result(word: Sequence[int], n: int) -> Tuple[int, ...]:
    seq = list(range(1, n + 1))
    for i in word:
        seq[i - 1], seq[i] = seq[i], seq[i - 1]
    return tuple(seq)


def t_matrix(i: int, beta: int, alpha: int, xi, n: int, N: int, rule) -> TensorOperator:
    """``T_{i, beta alpha}``: ``R_{beta alpha}`` placed on word positions ``i, i+1``."""
    xi = as_point(xi)
    if not 1 <= i <= n - 1:
        raise InvalidParameterError(f"site {i} outside 1..{n - 1}")
    check_dimension(n, N)
    return embed(r_matrix(xi[alpha], xi[beta], N, rule), i, n)


def a_sigma(sigma: Permutation, xi, n: int, N: int, rule, word: Optional[Sequence[int]] = None) -> TensorOperator:
    """Multi-particle amplitude ``A_sigma`` as a dense-product operator.

    ``word`` overrides the bubble-sort reduced word; it must produce ``sigma``.
    """
    xi = as_point(xi)
    if sigma.n != n or len(xi) != n:
        raise InvalidParameterError("permutation, spectral point and n disagree")
    xi.check_regular()
    word = sigma.reduced_word() if word is None else list(word)
    if _word_result(word, n) != sigma.images:
        raise InvalidParameterError(f"word {word} does not produce {sigma}")
    result = TensorOperator.identity(n, N)
    for i, beta, alpha in labelled_steps(word, n):
        result = t_matrix(i, beta, alpha, xi, n, N, rule) @ result
    return result


def propagate(sigma: Permutation, xi_values: Sequence, vector: Dict[Tuple[int, ...], object], N: int, rule,
              r_cache: Optional[dict] = None) -> Dict[Tuple[int, ...], object]:
    """Apply ``A_sigma`` to a sparse vector keyed by words, right to left.

    ``xi_values`` may hold scalars or equally shaped numpy arrays.
    """
    n = sigma.n
    if r_cache is None:
        r_cache = {}
    for i, beta, alpha in labelled_steps(sigma.reduced_word(), n):
        key = (beta, alpha)
        if key not in r_cache:
            r_cache[key] = r_columns(xi_values[alpha - 1], xi_values[beta - 1], N, rule)
        cols = r_cache[key]
        out: Dict[Tuple[int, ...], object] = {}
        for w, c in vector.items():
            for pair, coeff in cols[w[i - 1 : i + 1]]:
                target = w[: i - 1] + pair + w[i + 1 :]
                term = coeff * c
                out[target] = out[target] + term if target in out else term
        vector = out
    return vector


# -- consistency checks -----------------------------------------------------


@dataclass
class CheckResult:
    passed: bool
    discrepancy: float
    exact: bool
    witness_word: Optional[str] = None


def _compare_ops(lhs: TensorOperator, rhs: TensorOperator, exact: bool, tol: float) -> CheckResult:
    if exact:
        witness = lhs.first_difference(rhs)
        disc = 0.0 if witness is None else lhs.max_abs_diff(rhs)
        return CheckResult(witness is None, disc, True, None if witness is None else "".join(map(str, witness)))
    disc = lhs.max_abs_diff(rhs)
    witness = None
    if disc >= tol:
        diff = lhs - rhs
        worst = max(diff.items(), key=lambda e: abs(complex(e[2])))
        witness = "".join(map(str, index_to_word(worst[1], lhs.n, lhs.N)))
    return CheckResult(disc < tol, disc, False, witness)


def verify_ybe(xi_alpha, xi_beta, xi_gamma, N: int, rule, tol: float = YBE_FLOAT_TOL) -> CheckResult:
    """Yang-Baxter equation on the ``N^3``-dimensional space."""
    values = (xi_alpha, xi_beta, xi_gamma)
    exact = _is_exact(*values)
    point = SpectralPoint(values)
    point.check_regular()
    r = {}
    for hi, lo in ((2, 1), (3, 1), (3, 2)):
        r[(hi, lo)] = r_matrix(point[lo], point[hi], N, rule)
    left = embed(r[(3, 2)], 1, 3) @ embed(r[(3, 1)], 2, 3) @ embed(r[(2, 1)], 1, 3)
    right = embed(r[(2, 1)], 2, 3) @ embed(r[(3, 1)], 1, 3) @ embed(r[(3, 2)], 2, 3)
    return _compare_ops(left, right, exact, tol)


def boundary_factor(i: int, xi_left, xi_right, n: int, N: int, rule) -> TensorOperator:
    """``I - B_i / xi_left - B'_i xi_right``."""
    B, Bp = build_pair_matrices(N, rule)
    ident = TensorOperator.identity(n, N)
    return ident - embed(B, i, n).scale(1 / xi_left) - embed(Bp, i, n).scale(xi_right)


def verify_bc_sum(i: int, xi, n: int, N: int, rule, tol: float = 1e-10) -> CheckResult:
    """``sum_sigma (I - B_i/xi_sigma(i) - B'_i xi_sigma(i+1)) A_sigma = 0``."""
    xi = as_point(xi)
    if not 1 <= i <= n - 1:
        raise InvalidParameterError(f"site {i} outside 1..{n - 1}")
    exact = _is_exact(*xi.values)
    if not exact:
        xi = SpectralPoint(tuple(complex(v) for v in xi.values))
    total = TensorOperator.zero(n, N)
    for sigma in Permutation.all(n):
        factor = boundary_factor(i, xi[sigma(i)], xi[sigma(i + 1)], n, N, rule)
        total = total + factor @ a_sigma(sigma, xi, n, N, rule)
    return _compare_ops(total, TensorOperator.zero(n, N), exact, tol)


def verify_bc_pair(sigma: Permutation, i: int, xi, n: int, N: int, rule) -> CheckResult:
    """Pairwise cancellation between ``sigma`` and ``T_i sigma``."""
    xi = as_point(xi)
    alpha, beta = sigma(i), sigma(i + 1)
    imgs = list(sigma.images)
    imgs[i - 1], imgs[i] = imgs[i], imgs[i - 1]
    partner = Permutation(tuple(imgs))
    total = boundary_factor(i, xi[alpha], xi[beta], n, N, rule) @ a_sigma(sigma, xi, n, N, rule)
    total = total + boundary_factor(i, xi[beta], xi[alpha], n, N, rule) @ a_sigma(partner, xi, n, N, rule)
    return _compare_ops(total, TensorOperator.zero(n, N), _is_exact(*xi.values), 1e-10)


def random_rational(rng: random.Random, bound: int = 9) -> Fraction:
    while True:
        num = rng.randint(-bound, bound)
        den = rng.randint(-bound, bound)
        if num == 0 or den == 0:
            continue
        value = Fraction(num, den)
        if value != 1:
            return value


def random_rational_points(count: int, size: int, seed: int = DEFAULT_SEED, bound: int = 9) -> List[Tuple[Fraction, ...]]:
    """Seeded regular spectral points: nonzero, not 1, pairwise distinct."""
    rng = random.Random(seed)
    points = []
    while len(points) < count:
        candidate = tuple(random_rational(rng, bound) for _ in range(size))
        if len(set(candidate)) == size:
            points.append(candidate)
    return points


def scattering_report(n: int, N: int, rule, triples: int = 20, seed: int = DEFAULT_SEED,
                      bc_max_n: int = 4) -> IdentityReport:
    """YBE over seeded rational triples plus the boundary-condition sums."""
    rule = RuleType.parse(rule)
    report = IdentityReport(rule, n, N)
    worst = None
    for k, (a, b, c) in enumerate(random_rational_points(triples, 3, seed)):
        res = verify_ybe(a, b, c, N, rule)
        if not res.passed and worst is None:
            worst = (k, res)
    report.checks.append(Check(
        f"yang_baxter[{triples} triples]", worst is None,
        None if worst is None else worst[1].witness_word,
        0.0 if worst is None else worst[1].discrepancy, seed,
    ))
    if 2 <= n <= bc_max_n:
        (point,) = random_rational_points(1, n, seed + 1)
        for i in range(1, n):
            res = verify_bc_sum(i, point, n, N, rule)
            report.checks.append(Check(f"boundary_sum[i={i}]", res.passed, res.witness_word, res.discrepancy, seed + 1))
    return report
