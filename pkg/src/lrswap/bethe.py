"""Transition probabilities from the contour-integral formula.

Each variable runs over a circle centred at 0 and the ``n``-fold integral
is approximated by the product trapezoid rule.  The only non-removable
pole of the amplitudes sits at ``xi = 1``, in the equal-species block of
the scattering matrix: at ``xi_beta = 1`` for drop-push and at
``xi_alpha = 1`` for tasep.  The drop-push contour must enclose it
(``r > 1``), the tasep contour must exclude it (``0 < r < 1``); on the wrong
side the formula no longer reproduces the dynamics.  With
``xi = r exp(i theta)`` we have ``dxi / (2 pi i) = xi dtheta / (2 pi)``, so
every node carries the weight ``xi / M`` per dimension.  Nodes of
dimension ``d`` are rotated by ``d / n`` of a grid step so that no two
variables ever coincide.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import Configuration, poisson_cutoff, reachable_words
from .errors import InvalidParameterError, NumericalInconsistencyWarning, ResourceLimitError, UnsupportedRuleError
from .rules import RuleType
from .scatter import Permutation, SpectralPoint, propagate
from .tensor import all_words, format_word

IMAG_TOL = 1e-8
RANGE_TOL = 1e-8
MAX_TABLE_STATES = 10**5
MAX_PARTICLES = 3
VANISHING_NODES = 64
# drop-push contour values grow like r^D with D the total displacement, so the
# default radius shrinks once r^D would exceed this (rounding stays near 1e-12)
ROUNDING_BUDGET = 1e4
MIN_DEFAULT_RADIUS = 1.1


@dataclass(frozen=True)
class QuadratureConfig:
    radius: Optional[float] = None
    nodes: Optional[int] = None
    convergence_check: bool = False

    def __post_init__(self):
        if self.radius is not None and not (self.radius > 0 and self.radius != 1):
            raise InvalidParameterError(f"contour radius must be positive and differ from 1, got {self.radius}")
        if self.nodes is not None:
            m = self.nodes
            if m < 8 or m & (m - 1):
                raise InvalidParameterError(f"nodes per circle must be a power of two >= 8, got {m}")

    def nodes_for(self, n: int) -> int:
        if self.nodes is not None:
            return self.nodes
        return 64 if n <= 2 else 32

    def radius_for(self, rule, n: int, displacement: int = 0) -> float:
        """Resolved radius, checked against the side of ``xi = 1`` the rule needs.

        Defaults keep the aliasing term ``(pole distance ratio)^M`` near 1e-10:
        1.5 for drop-push with ``n <= 2`` (64 nodes), 2.0 for drop-push with
        ``n = 3`` (32 nodes), 0.5 for tasep.  For drop-push the default then
        shrinks with the displacement ``D = sum(x) - sum(y)`` so that
        ``r^D <= ROUNDING_BUDGET``; aliasing decays with ``D`` so the smaller
        radius costs nothing there.  An explicit radius is used as given.
        """
        rule = RuleType.parse(rule)
        if self.radius is None:
            if rule is RuleType.TASEP:
                return 0.5
            base = 1.5 if n <= 2 else 2.0
            if displacement > 0:
                base = min(base, max(MIN_DEFAULT_RADIUS, ROUNDING_BUDGET ** (1 / displacement)))
            return base
        if rule is RuleType.TASEP and not self.radius < 1:
            raise InvalidParameterError(f"the tasep contour must exclude xi = 1 (r < 1), got r={self.radius}")
        if rule is RuleType.DROP_PUSH and not self.radius > 1:
            raise InvalidParameterError(f"the drop-push contour must enclose xi = 1 (r > 1), got r={self.radius}")
        return self.radius

    def to_dict(self, rule, n: int) -> dict:
        return {"r": self.radius_for(rule, n), "M": self.nodes_for(n), "convergence_check": self.convergence_check}


@dataclass(frozen=True)
class TransitionQuery:
    initial: Configuration
    final: Configuration
    t: float
    rule: RuleType = RuleType.DROP_PUSH

    def __post_init__(self):
        rule = RuleType.parse(self.rule)
        object.__setattr__(self, "rule", rule)
        if not rule.integrable:
            raise UnsupportedRuleError("transition probabilities need an integrable rule")
        if self.initial.n != self.final.n:
            raise InvalidParameterError("initial and final configurations differ in particle count")
        if self.t < 0:
            raise InvalidParameterError(f"time must be nonnegative, got {self.t}")

    @property
    def n(self) -> int:
        return self.initial.n

    @property
    def N(self) -> int:
        return max(self.initial.word + self.final.word)

    @property
    def species_match(self) -> bool:
        return sorted(self.initial.word) == sorted(self.final.word)


def contour_nodes(n: int, M: int, radius: float) -> List[np.ndarray]:
    """Per-dimension node arrays, shaped to broadcast into an ``M^n`` grid."""
    nodes = []
    for d in range(n):
        theta = 2 * np.pi * (np.arange(M) + d / n) / M
        xi = radius * np.exp(1j * theta)
        shape = [1] * n
        shape[d] = M
        nodes.append(xi.reshape(shape))
    return nodes


def _energy_factor(nodes: List[np.ndarray], t: float) -> np.ndarray:
    """``prod_i exp((1/xi_i - 1) t)``, broadcast over the grid."""
    out = np.ones((1,) * len(nodes), dtype=complex)
    for xi in nodes:
        out = out * np.exp((1 / xi - 1) * t)
    return out


def integrand_entry(xi, query: TransitionQuery) -> complex:
    """Integrand at one spectral point, summed over permutations (without ``dxi`` weights)."""
    xi = xi if isinstance(xi, SpectralPoint) else SpectralPoint(tuple(complex(v) for v in xi))
    n = query.n
    if len(xi) != n:
        raise InvalidParameterError("spectral point has the wrong dimension")
    xi.check_regular()
    values = [complex(v) for v in xi.values]
    if not query.species_match:
        return 0j
    x, y = query.final.positions, query.initial.positions
    energy = np.prod([np.exp((1 / v - 1) * query.t) for v in values])
    total = 0j
    for sigma in Permutation.all(n):
        column = propagate(sigma, values, {query.initial.word: 1}, query.N, query.rule)
        amp = column.get(query.final.word, 0)
        if amp == 0:
            continue
        mono = 1
        for i in range(1, n + 1):
            s = sigma(i)
            mono *= values[s - 1] ** (x[i - 1] - y[s - 1] - 1)
        total += amp * mono
    return complex(total * energy)


class _ColumnIntegrator:
    """Integrals of one amplitude column ``A_sigma e_nu`` against position monomials."""

    def __init__(self, initial: Configuration, t: float, N: int, rule: RuleType, radius: float, M: int,
                 sigmas: Optional[Sequence[Permutation]] = None):
        n = initial.n
        self.n = n
        self.M = M
        self.initial = initial
        self.nodes = contour_nodes(n, M, radius)
        self.flat = [v.reshape(-1) for v in self.nodes]
        self.base = _energy_factor(self.nodes, t) / float(M) ** n
        self.sigmas = list(Permutation.all(n) if sigmas is None else sigmas)
        self.columns = []
        for sigma in self.sigmas:
            col = propagate(sigma, self.nodes, {initial.word: 1}, N, rule)
            self.columns.append({w: c * self.base for w, c in col.items()})

    def _monomial(self, sigma: Permutation, x: Sequence[int]) -> np.ndarray:
        # prod_i xi_sigma(i)^(x_i - y_sigma(i)); the extra power is the dxi weight
        y = self.initial.positions
        exps = [0] * self.n
        for i in range(1, self.n + 1):
            s = sigma(i)
            exps[s - 1] = x[i - 1] - y[s - 1]
        out = np.ones((1,) * self.n, dtype=complex)
        for d in range(self.n):
            out = out * self.nodes[d] ** exps[d]
        return out

    def integrate(self, x: Sequence[int]) -> Dict[Tuple[int, ...], complex]:
        totals: Dict[Tuple[int, ...], complex] = {}
        for sigma, col in zip(self.sigmas, self.columns):
            mono = self._monomial(sigma, x)
            for w, c in col.items():
                val = complex(np.sum(np.broadcast_to(c * mono, (self.M,) * self.n)))
                totals[w] = totals.get(w, 0j) + val
        return totals


@dataclass
class ProbabilityResult:
    probability: float
    imag_residual: float
    conv_delta: Optional[float] = None
    nodes: int = 0
    radius: float = 0.0

    @property
    def flagged(self) -> bool:
        return abs(self.imag_residual) > IMAG_TOL or not (-RANGE_TOL <= self.probability <= 1 + RANGE_TOL)


def _check_size(n: int) -> None:
    if n > MAX_PARTICLES:
        raise ResourceLimitError(f"quadrature is limited to n <= {MAX_PARTICLES} (cost M^n n!), got n={n}")


def _warn_imag(value: complex, where: str) -> None:
    if abs(value.imag) > IMAG_TOL:
        warnings.warn(f"imaginary residue {value.imag:.3e} at {where}", NumericalInconsistencyWarning, stacklevel=3)


def transition_probability(query: TransitionQuery, cfg: QuadratureConfig = QuadratureConfig()) -> ProbabilityResult:
    """``P_(Y,nu)(X, pi; t)`` by product trapezoid quadrature."""
    n = query.n
    _check_size(n)
    M = cfg.nodes_for(n)
    r = cfg.radius_for(query.rule, n, _displacement(query.final.positions, query.initial.positions))
    if not query.species_match:
        return ProbabilityResult(0.0, 0.0, 0.0 if cfg.convergence_check else None, M, r)
    value = _single(query, r, M)
    delta = None
    if cfg.convergence_check:
        delta = abs(_single(query, r, 2 * M).real - value.real)
    _warn_imag(value, str(query.final))
    return ProbabilityResult(value.real, value.imag, delta, M, r)


def _displacement(x: Sequence[int], y: Sequence[int]) -> int:
    return sum(x) - sum(y)


def _single(query: TransitionQuery, radius: float, M: int) -> complex:
    integ = _ColumnIntegrator(query.initial, query.t, query.N, query.rule, radius, M)
    return integ.integrate(query.final.positions).get(query.final.word, 0j)


def probability_matrix(Y: Sequence[int], X: Sequence[int], t: float, N: int, rule,
                       cfg: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Full ``N^n x N^n`` block ``P_Y(X; t)`` with rows ``pi`` and columns ``nu`` (complex)."""
    n = len(Y)
    _check_size(n)
    rule = RuleType.parse(rule)
    M = cfg.nodes_for(n)
    r = cfg.radius_for(rule, n)
    words = list(all_words(n, N))
    out = np.zeros((len(words), len(words)), dtype=complex)
    for j, nu in enumerate(words):
        integ = _ColumnIntegrator(Configuration(tuple(Y), nu), t, N, rule, r, M)
        col = integ.integrate(X)
        for i, pi in enumerate(words):
            out[i, j] = col.get(pi, 0j)
    return out


def vanishing_check(sigma: Permutation, X: Sequence[int], Y: Sequence[int], N: int, rule,
                    cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Largest ``|integral|`` of the single-``sigma`` term at ``t = 0`` over all ``(pi, nu)``.

    At ``X = Y`` the integrand keeps a pole at 1, so aliasing decays only
    like the pole distance ratio to the power ``M``; without an explicit node
    count 64 nodes are used for every ``n``.
    """
    n = sigma.n
    _check_size(n)
    if sigma.is_identity:
        raise InvalidParameterError("the identity permutation does not vanish")
    X, Y = tuple(X), tuple(Y)
    if len(X) != n or len(Y) != n:
        raise InvalidParameterError("positions must have n entries")
    if any(a >= b for a, b in zip(X, X[1:])) or any(a >= b for a, b in zip(Y, Y[1:])):
        raise InvalidParameterError("positions must be strictly increasing")
    if any(y > x for x, y in zip(X, Y)):
        raise InvalidParameterError("need y_i <= x_i for every i")
    rule = RuleType.parse(rule)
    M = cfg.nodes if cfg.nodes is not None else VANISHING_NODES
    r = cfg.radius_for(rule, n)
    worst = 0.0
    for nu in all_words(n, N):
        integ = _ColumnIntegrator(Configuration(Y, nu), 0.0, N, rule, r, M, sigmas=[sigma])
        for val in integ.integrate(X).values():
            worst = max(worst, abs(val))
    return worst


# -- tables -----------------------------------------------------------------


@dataclass
class TableRow:
    positions: Tuple[int, ...]
    word: Tuple[int, ...]
    probability: float
    imag_residual: float
    conv_delta: Optional[float] = None
    radius: float = 0.0


@dataclass
class ProbabilityTable:
    initial: Configuration
    t: float
    rule: RuleType
    window: int
    radius: float
    nodes: int
    rows: List[TableRow] = field(default_factory=list)

    @property
    def total_mass(self) -> float:
        return math.fsum(r.probability for r in self.rows)

    @property
    def deficit(self) -> float:
        return 1.0 - self.total_mass

    @property
    def min_radius(self) -> float:
        """Smallest contour radius used by any row (the default shrinks far from the start)."""
        return min((r.radius for r in self.rows), default=self.radius)

    @property
    def max_imag(self) -> float:
        return max((abs(r.imag_residual) for r in self.rows), default=0.0)

    @property
    def flagged(self) -> List[TableRow]:
        return [r for r in self.rows if not (-RANGE_TOL <= r.probability <= 1 + RANGE_TOL)
                or abs(r.imag_residual) > IMAG_TOL]

    def lookup(self) -> Dict[Configuration, float]:
        return {Configuration(r.positions, r.word): r.probability for r in self.rows}

    def to_csv(self) -> str:
        n = self.initial.n
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x_{i}" for i in range(1, n + 1)] + ["word", "p_bethe", "imag_residual", "conv_delta"])
        for r in self.rows:
            writer.writerow(list(r.positions) + [format_word(r.word), repr(r.probability), repr(r.imag_residual),
                                                 "" if r.conv_delta is None else repr(r.conv_delta)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "query": {"Y": list(self.initial.positions), "nu": format_word(self.initial.word), "t": self.t,
                      "rule": str(self.rule), "window": self.window},
            "cfg": {"r": self.radius, "r_min": self.min_radius, "M": self.nodes},
            "total_mass": self.total_mass,
            "deficit": self.deficit,
            "max_imag": self.max_imag,
            "flagged": len(self.flagged),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def window_positions(Y: Sequence[int], window: int) -> List[Tuple[int, ...]]:
    """Strictly increasing position tuples inside ``[y_1, y_n + window]``."""
    lo, hi = Y[0], Y[-1] + window
    return list(itertools.combinations(range(lo, hi + 1), len(Y)))


def poisson_window(n: int, t: float, tol: float = 1e-9) -> int:
    """Window size so that the rightmost particle exits it with probability below ``tol``.

    The rightmost occupied site advances by at most one per event.
    """
    if t == 0:
        return 0
    return poisson_cutoff(n * t, tol)


def probability_table(initial: Configuration, t: float, window: int, rule=RuleType.DROP_PUSH,
                      cfg: QuadratureConfig = QuadratureConfig(), N: Optional[int] = None) -> ProbabilityTable:
    """Bethe probabilities for every state in the window with the same species multiset."""
    rule = RuleType.parse(rule)
    if not rule.integrable:
        raise UnsupportedRuleError("transition probabilities need an integrable rule")
    n = initial.n
    _check_size(n)
    if window < 0:
        raise InvalidParameterError("window must be nonnegative")
    N = max(initial.word) if N is None else N
    positions = window_positions(initial.positions, window)
    words = reachable_words(initial.word)
    if len(positions) * len(words) > MAX_TABLE_STATES:
        raise ResourceLimitError(f"{len(positions) * len(words)} states exceed the table cap {MAX_TABLE_STATES}")
    M = cfg.nodes_for(n)
    r = cfg.radius_for(rule, n)
    table = ProbabilityTable(initial, t, rule, window, r, M)
    integrators: Dict[Tuple[float, int], _ColumnIntegrator] = {}

    def integrator(radius: float, nodes: int) -> _ColumnIntegrator:
        if (radius, nodes) not in integrators:
            integrators[(radius, nodes)] = _ColumnIntegrator(initial, t, N, rule, radius, nodes)
        return integrators[(radius, nodes)]

    for x in positions:
        rx = cfg.radius_for(rule, n, _displacement(x, initial.positions))
        vals = integrator(rx, M).integrate(x)
        fine_vals = integrator(rx, 2 * M).integrate(x) if cfg.convergence_check else None
        for w in words:
            v = vals.get(w, 0j)
            delta = None if fine_vals is None else abs(fine_vals.get(w, 0j).real - v.real)
            table.rows.append(TableRow(tuple(x), w, v.real, v.imag, delta, rx))
    if table.max_imag > IMAG_TOL:
        warnings.warn(f"imaginary residue up to {table.max_imag:.3e}", NumericalInconsistencyWarning, stacklevel=2)
    return table
