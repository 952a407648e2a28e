"""Reference computations that share no code path with the engines under test."""

import itertools
from fractions import Fraction

import numpy as np
import sympy
from scipy.linalg import expm

from lrswap.dynamics import Configuration, apply_move, reachable_words


def expm_oracle(c0, t, right_edge, rule):
    """Transition law on the window ``[y_1, right_edge]`` via a matrix exponential.

    Sorted positions never decrease, so a state that leaves the window can
    never come back; dropping the outside is exact for inside states.
    """
    words = reachable_words(c0.word)
    states = [Configuration(x, w)
              for x in itertools.combinations(range(c0.positions[0], right_edge + 1), c0.n)
              for w in words]
    index = {s: k for k, s in enumerate(states)}
    q = np.zeros((len(states), len(states)))
    for s in states:
        for mover in range(1, c0.n + 1):
            q[index[s], index[s]] -= 1
            target = apply_move(s, mover, rule)
            if target in index:
                q[index[s], index[target]] += 1
    row = expm(q * t)[index[c0]]
    return {s: float(row[k]) for k, s in enumerate(states)}


def dense_pair(N, rule):
    """``B``, ``B'`` rebuilt by reading the outcome tables entry by entry."""
    dim = N * N
    b = sympy.zeros(dim, dim)
    bp = sympy.zeros(dim, dim)
    words = list(itertools.product(range(1, N + 1), repeat=2))
    pos = {w: k for k, w in enumerate(words)}
    for (a, c) in words:
        col = pos[(a, c)]
        if rule == "drop-push":
            if a == c:
                b[col, col] = 1
            elif a < c:
                b[pos[(c, a)], col] = 1
            else:
                bp[pos[(c, a)], col] = 1
        elif rule == "tasep":
            if a < c:
                b[pos[(c, a)], col] = 1
            elif a == c:
                bp[col, col] = 1
            else:
                bp[pos[(c, a)], col] = 1
    return b, bp


def dense_r(xa, xb, N, rule):
    b, bp = dense_pair(N, rule)
    eye = sympy.eye(N * N)
    xa, xb = sympy.Rational(xa), sympy.Rational(xb)
    return -(eye - b / xb - bp * xa).inv() * (eye - b / xa - bp * xb)


def to_fraction_matrix(m):
    return [[Fraction(int(sympy.fraction(v)[0]), int(sympy.fraction(v)[1])) for v in row] for row in m.tolist()]
