"""The stochastic process: long-range swap moves, simulation and exact oracles.

A configuration stores only occupied sites; vacancies are implicit.  Every
particle carries a rate-1 clock, so the total event rate is always ``n``.
Under the TASEP-type rule an attempt can be a null move (the configuration
is left unchanged), which keeps the rate constant via a self-loop.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import InvalidParameterError, ResourceLimitError, UnsupportedRuleError
from .pairalg import PairAlgebra
from .rules import RuleType
from .tensor import TensorOperator, all_words, format_word, index_to_word, word_to_index

MAX_ORACLE_STATES = 10**6

FORWARD_JUMP = "forward-jump"
BACKWARD_PUSH = "backward-push"
BACKWARD_JUMP_OVER = "backward-jump-over"


@dataclass(frozen=True, order=True)
class Configuration:
    positions: Tuple[int, ...]
    word: Tuple[int, ...]

    def __post_init__(self):
        positions = tuple(int(x) for x in self.positions)
        word = tuple(int(s) for s in self.word)
        if len(positions) != len(word):
            raise InvalidParameterError("positions and word differ in length")
        if any(a >= b for a, b in zip(positions, positions[1:])):
            raise InvalidParameterError(f"positions {positions} are not strictly increasing")
        if any(s < 1 for s in word):
            raise InvalidParameterError(f"species labels must be positive, got {word}")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "word", word)

    @property
    def n(self) -> int:
        return len(self.positions)

    def key(self) -> str:
        """Canonical encoding ``x_1,...,x_n|pi_1...pi_n``."""
        return ",".join(map(str, self.positions)) + "|" + format_word(self.word)

    @classmethod
    def packed(cls, word: Sequence[int], start: int = 0) -> "Configuration":
        return cls(tuple(range(start, start + len(word))), tuple(word))

    def __str__(self) -> str:
        return f"({self.key()})"


def _require_dynamic_rule(rule) -> RuleType:
    rule = RuleType.parse(rule)
    if not rule.integrable:
        raise UnsupportedRuleError(
            "the non-integrable rule has no consistent multi-particle dynamics "
            "(a pushed particle can bounce back and forth forever)"
        )
    return rule


def long_range_target(c: Configuration, mover: int, rule) -> Optional[int]:
    """Site the ``mover``-th particle (1-based) swaps with, or ``None`` for a null move.

    Sites to the right are scanned in order.  Equal or stronger residents are
    skipped under the drop-push rule; under the TASEP rule an equal resident
    met before any weaker site blocks the attempt.
    """
    rule = _require_dynamic_rule(rule)
    if not 1 <= mover <= c.n:
        raise InvalidParameterError(f"mover {mover} outside 1..{c.n}")
    species = c.word[mover - 1]
    k = mover  # 0-based index of the next particle to the right
    z = c.positions[mover - 1] + 1
    while True:
        if k >= c.n or c.positions[k] != z:
            return z
        resident = c.word[k]
        if resident < species:
            return z
        if resident == species and rule is RuleType.TASEP:
            return None
        k += 1
        z += 1


def apply_move(c: Configuration, mover: int, rule) -> Configuration:
    """Configuration after the ``mover``-th particle attempts its move."""
    target = long_range_target(c, mover, rule)
    if target is None:
        return c
    positions = list(c.positions)
    word = list(c.word)
    i = mover - 1
    try:
        j = positions.index(target)
    except ValueError:
        j = None
    if j is not None:
        word[i], word[j] = word[j], word[i]
        return Configuration(tuple(positions), tuple(word))
    species = word.pop(i)
    positions.pop(i)
    # every particle between the old site and the target was skipped, so the
    # mover lands immediately after them
    insert_at = i
    while insert_at < len(positions) and positions[insert_at] < target:
        insert_at += 1
    positions.insert(insert_at, target)
    word.insert(insert_at, species)
    return Configuration(tuple(positions), tuple(word))


# -- local decomposition --------------------------------------------------------


@dataclass(frozen=True)
class HiddenStep:
    site: int
    left_species: int
    right_species: int
    resolution: str


@dataclass(frozen=True)
class MoveTrace:
    mover: int
    steps: Tuple[HiddenStep, ...] = ()
    null: bool = False


def local_decomposition(c: Configuration, mover: int, rule) -> MoveTrace:
    """Hidden-state steps realising one move through nearest-neighbour rules.

    The mover jumps forward over stronger (or, under drop-push, equal)
    residents; a weaker resident is pushed back and jumps over the
    particles the mover passed until it reaches the vacated site.
    """
    rule = _require_dynamic_rule(rule)
    if not 1 <= mover <= c.n:
        raise InvalidParameterError(f"mover {mover} outside 1..{c.n}")
    occupied = dict(zip(c.positions, c.word))
    origin = c.positions[mover - 1]
    species = occupied.pop(origin)
    site = origin
    steps: List[HiddenStep] = []
    while True:
        ahead = site + 1
        if ahead not in occupied:
            return MoveTrace(mover, tuple(steps))
        resident = occupied[ahead]
        if resident == species and rule is RuleType.TASEP:
            return MoveTrace(mover, (), null=True)
        if resident >= species:
            steps.append(HiddenStep(ahead, species, resident, FORWARD_JUMP))
            site = ahead
            continue
        steps.append(HiddenStep(ahead, species, resident, BACKWARD_PUSH))
        back = ahead - 1
        while back in occupied:
            steps.append(HiddenStep(back, occupied[back], resident, BACKWARD_JUMP_OVER))
            back -= 1
        return MoveTrace(mover, tuple(steps))


def replay_trace(c: Configuration, trace: MoveTrace) -> Configuration:
    """Execute a trace step by step on an explicit site map."""
    if trace.null:
        return c
    occupied = dict(zip(c.positions, c.word))
    origin = c.positions[trace.mover - 1]
    moving = occupied.pop(origin)
    where = origin
    for step in trace.steps:
        if step.resolution == FORWARD_JUMP:
            assert occupied.get(step.site) == step.right_species and step.left_species == moving
            where = step.site
        elif step.resolution == BACKWARD_PUSH:
            assert occupied.get(step.site) == step.right_species and step.left_species == moving
            occupied[step.site] = moving
            moving = step.right_species
            where = step.site
        elif step.resolution == BACKWARD_JUMP_OVER:
            assert occupied.get(step.site) == step.left_species and step.right_species == moving
            where = step.site
        else:
            raise InvalidParameterError(f"unknown resolution {step.resolution!r}")
    pushed_back = any(s.resolution == BACKWARD_PUSH for s in trace.steps)
    landing = where - 1 if pushed_back else where + 1
    assert landing not in occupied
    occupied[landing] = moving
    sites = sorted(occupied)
    return Configuration(tuple(sites), tuple(occupied[s] for s in sites))


# -- simulation -----------------------------------------------------------------


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of an ensemble seeded by ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def simulate(c0: Configuration, t: float, seed: int, rule, index: int = 0) -> Configuration:
    """Exact continuous-time trajectory up to time ``t``."""
    rule = _require_dynamic_rule(rule)
    if t < 0:
        raise InvalidParameterError(f"time must be nonnegative, got {t}")
    rng = trajectory_rng(seed, index)
    return _run(c0, t, rng, rule)


def _run(c: Configuration, t: float, rng: np.random.Generator, rule: RuleType) -> Configuration:
    n = c.n
    clock = 0.0
    while True:
        # inverse-CDF exponential with total rate n
        clock += -math.log1p(-rng.random()) / n
        if clock > t:
            return c
        c = apply_move(c, int(rng.integers(n)) + 1, rule)


def simulate_ensemble(c0: Configuration, t: float, trials: int, seed: int, rule) -> Dict[Configuration, int]:
    """Counts of final configurations over ``trials`` independent trajectories."""
    rule = _require_dynamic_rule(rule)
    if t < 0:
        raise InvalidParameterError(f"time must be nonnegative, got {t}")
    if trials < 1:
        raise InvalidParameterError("need at least one trajectory")
    counts: Dict[Configuration, int] = {}
    for k in range(trials):
        final = _run(c0, t, trajectory_rng(seed, k), rule)
        counts[final] = counts.get(final, 0) + 1
    return dict(sorted(counts.items()))


# -- uniformized series oracle --------------------------------------------------


def jump_chain_step(dist: Dict[Configuration, object], rule, exact: bool = False) -> Dict[Configuration, object]:
    """One step of the embedded chain: a uniformly chosen particle attempts its move."""
    out: Dict[Configuration, object] = {}
    for c, p in dist.items():
        share = Fraction(p) / c.n if exact else p / c.n
        for mover in range(1, c.n + 1):
            nxt = apply_move(c, mover, rule)
            out[nxt] = out.get(nxt, 0) + share
    if len(out) > MAX_ORACLE_STATES:
        raise ResourceLimitError(f"jump chain reached {len(out)} states (cap {MAX_ORACLE_STATES})")
    return out


def jump_chain_distribution(c0: Configuration, steps: int, rule, exact: bool = True) -> Dict[Configuration, object]:
    """Exact ``k``-step distribution of the embedded jump chain."""
    rule = _require_dynamic_rule(rule)
    dist: Dict[Configuration, object] = {c0: Fraction(1) if exact else 1.0}
    for _ in range(steps):
        dist = jump_chain_step(dist, rule, exact)
    return dist


def poisson_cutoff(mean: float, tail_tol: float) -> int:
    """Smallest ``K`` with ``P(Poisson(mean) > K) < tail_tol``."""
    if tail_tol <= 0:
        raise InvalidParameterError("tail tolerance must be positive")
    k = 0
    while stats.poisson.sf(k, mean) >= tail_tol:
        k += 1
    return k


@dataclass
class SeriesResult:
    distribution: Dict[Configuration, float]
    cutoff: int
    tail_bound: float

    @property
    def total_mass(self) -> float:
        return math.fsum(self.distribution.values())

    def probability(self, c: Configuration) -> float:
        return self.distribution.get(c, 0.0)


def series_distribution(c0: Configuration, t: float, rule, tail_tol: float = 1e-13) -> SeriesResult:
    """Transition probabilities from ``c0`` by uniformization.

    ``P(t) = sum_k Poisson(k; n t) p_k`` with ``p_k`` the exact ``k``-step
    law of the embedded chain, truncated where the Poisson tail drops
    below ``tail_tol``.
    """
    rule = _require_dynamic_rule(rule)
    if t < 0:
        raise InvalidParameterError(f"time must be nonnegative, got {t}")
    mean = c0.n * t
    if t == 0:
        return SeriesResult({c0: 1.0}, 0, 0.0)
    cutoff = poisson_cutoff(mean, tail_tol)
    weights = stats.poisson.pmf(np.arange(cutoff + 1), mean)
    acc: Dict[Configuration, List[float]] = {}
    dist: Dict[Configuration, float] = {c0: 1.0}
    for k in range(cutoff + 1):
        w = float(weights[k])
        for c, p in dist.items():
            acc.setdefault(c, []).append(w * p)
        if k < cutoff:
            dist = jump_chain_step(dist, rule)
    result = {c: math.fsum(terms) for c, terms in sorted(acc.items(), key=lambda kv: kv[0].key())}
    return SeriesResult(result, cutoff, float(stats.poisson.sf(cutoff, mean)))


def series_oracle(initial: Configuration, final: Configuration, t: float, rule, tail_tol: float = 1e-13) -> float:
    if sorted(initial.word) != sorted(final.word) or initial.n != final.n:
        return 0.0
    return series_distribution(initial, t, rule, tail_tol).probability(final)


# -- generator extraction -------------------------------------------------------


@dataclass
class GeneratorSlice:
    """Single-event rates out of every word on one position shape.

    ``rates[target_shape]`` is an ``N^n x N^n`` operator whose ``(pi, nu)``
    entry is the rate from ``(source_shape, nu)`` to ``(target_shape, pi)``.
    """

    source_shape: Tuple[int, ...]
    N: int
    rule: RuleType
    rates: Dict[Tuple[int, ...], TensorOperator] = field(default_factory=dict)

    def exit_rate(self, nu: Sequence[int]) -> int:
        j = word_to_index(nu, self.N)
        return sum(sum(op.column(j).values()) for op in self.rates.values())

    def to_dict(self) -> dict:
        n = len(self.source_shape)
        labels = [format_word(w) for w in all_words(n, self.N)]
        return {
            "source_shape": list(self.source_shape),
            "N": self.N,
            "rule": str(self.rule),
            "word_labels": labels,
            "rates": [
                {"target_shape": list(shape), "matrix": [[int(v) for v in row] for row in op.to_dense(int).tolist()]}
                for shape, op in sorted(self.rates.items())
            ],
        }


def _check_generator_size(n: int, N: int) -> None:
    if not 1 <= n <= 4 or not 1 <= N <= 3:
        raise ResourceLimitError(f"generator extraction supports n <= 4 and N <= 3, got n={n}, N={N}")


def extract_generator(shape: Sequence[int], N: int, rule) -> GeneratorSlice:
    """Tally every single-event transition from every word on ``shape``."""
    rule = _require_dynamic_rule(rule)
    shape = tuple(shape)
    n = len(shape)
    _check_generator_size(n, N)
    cols: Dict[Tuple[int, ...], Dict[int, Dict[int, int]]] = {}
    for nu in all_words(n, N):
        src = Configuration(shape, nu)
        j = word_to_index(nu, N)
        for mover in range(1, n + 1):
            dst = apply_move(src, mover, rule)
            col = cols.setdefault(dst.positions, {}).setdefault(j, {})
            i = word_to_index(dst.word, N)
            col[i] = col.get(i, 0) + 1
    rates = {s: TensorOperator(n, N, c) for s, c in sorted(cols.items())}
    return GeneratorSlice(shape, N, rule, rates)


def candidate_sources(shape: Sequence[int]) -> List[Tuple[int, ...]]:
    """Position shapes that can reach ``shape`` in one event (including itself)."""
    shape = tuple(shape)
    occupied = set(shape)
    found = {shape}
    for k, z in enumerate(shape):
        for y in range(z - 1, shape[0] - 2, -1):
            if y in occupied:
                continue
            found.add(tuple(sorted(shape[:k] + (y,) + shape[k + 1 :])))
    return sorted(found)


def incoming_rates(shape: Sequence[int], N: int, rule) -> Dict[Tuple[int, ...], TensorOperator]:
    """Master-equation matrices for ``shape``: source shape -> incoming rate operator."""
    shape = tuple(shape)
    out = {}
    for src in candidate_sources(shape):
        op = extract_generator(src, N, rule).rates.get(shape)
        if op is not None and not op.is_zero():
            out[src] = op
    return out


def _blocks(shape: Sequence[int]) -> List[Tuple[int, int]]:
    """Maximal runs of adjacent sites as ``(first index, length)`` (0-based)."""
    runs = []
    start = 0
    for k in range(1, len(shape) + 1):
        if k == len(shape) or shape[k] != shape[k - 1] + 1:
            runs.append((start, k - start))
            start = k
    return runs


def predicted_incoming_rates(shape: Sequence[int], N: int, rule) -> Dict[Tuple[int, ...], TensorOperator]:
    """Master-equation matrices assembled from ``B``, ``B'`` block by block.

    Within a run of ``l`` adjacent particles starting at index ``s`` the
    first particle arrives from the left across ``i-1`` neighbours with
    rate ``B_(s+i-1)...B_(s+1)`` (identity for ``i = 1``), and labels
    exchange in place with rate ``sum M_ij`` over pairs in the run.
    """
    rule = RuleType.parse(rule)
    shape = tuple(shape)
    n = len(shape)
    ident = TensorOperator.identity(n, N)
    alg = PairAlgebra(n, N, rule) if n >= 2 else None
    out: Dict[Tuple[int, ...], TensorOperator] = {}

    def add(src, op):
        out[src] = out[src] + op if src in out else op

    for s, length in _blocks(shape):
        for i in range(1, length + 1):
            src = list(shape)
            for k in range(s, s + i):
                src[k] -= 1
            if i == 1:
                op = ident
            else:
                op = ident
                for k in range(s + i - 1, s, -1):
                    op = op @ alg.b(k)
            add(tuple(src), op)
        for a in range(s + 1, s + length):
            for b in range(a + 1, s + length + 1):
                add(shape, alg.swap(a, b))
    return {k: v for k, v in sorted(out.items()) if not v.is_zero()}


def generator_diff(shape: Sequence[int], N: int, rule) -> List[dict]:
    """Entrywise differences between extracted and predicted incoming rates."""
    rule = _require_dynamic_rule(rule)
    shape = tuple(shape)
    _check_generator_size(len(shape), N)
    got = incoming_rates(shape, N, rule)
    want = predicted_incoming_rates(shape, N, rule)
    n = len(shape)
    zero = TensorOperator.zero(n, N)
    diffs = []
    for src in sorted(set(got) | set(want)):
        delta = got.get(src, zero) - want.get(src, zero)
        for i, j, c in delta.items():
            diffs.append({
                "source_shape": list(src),
                "pi": format_word(index_to_word(i, n, N)),
                "nu": format_word(index_to_word(j, n, N)),
                "extracted": int(got.get(src, zero).entry(i, j)),
                "predicted": int(want.get(src, zero).entry(i, j)),
            })
    return diffs


def reachable_words(word: Iterable[int]) -> List[Tuple[int, ...]]:
    """All rearrangements of ``word`` (same species multiset), sorted."""
    return sorted(set(itertools.permutations(tuple(word))))
