"""Acceptance gate: one test per criterion, each at its stated tolerance and time budget."""

import itertools
import math
import time
from fractions import Fraction

import pytest

from lrswap.bethe import (
    QuadratureConfig,
    TransitionQuery,
    poisson_window,
    probability_table,
    transition_probability,
    vanishing_check,
)
from lrswap.cli import main
from lrswap.dynamics import (
    Configuration,
    extract_generator,
    generator_diff,
    incoming_rates,
    jump_chain_distribution,
    series_distribution,
    simulate_ensemble,
)
from lrswap.pairalg import PairAlgebra, is_reducibility_check, verify_identities
from lrswap.rules import RuleType
from lrswap.scatter import Permutation, r_matrix, random_rational_points, verify_ybe

C = Configuration
INTEGRABLE = [RuleType.DROP_PUSH, RuleType.TASEP]


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


@pytest.mark.criterion(1, "exact reducibility identity suite")
def test_criterion_1_identity_suite():
    sizes = [(3, 2), (3, 3), (4, 2), (4, 3), (5, 2)]
    with Clock() as clock:
        for rule in INTEGRABLE:
            for n, N in sizes:
                report = verify_identities(n, N, rule)
                assert report.all_passed, (rule, n, N, [c.name for c in report.failures])
                names = {c.name.split("[")[0] for c in report.checks}
                assert {"braid", "chain_nilpotent", "A_nilpotent", "frak_A_inverse", "frak_A_sum", "M_shift"} <= names
    assert clock.elapsed < 10


@pytest.mark.criterion(2, "Yang-Baxter equation over seeded rational triples")
def test_criterion_2_yang_baxter():
    triples = random_rational_points(20, 3, seed=2024)
    cases = [(rule, N) for rule in INTEGRABLE for N in (2, 3)] + [(RuleType.NON_INTEGRABLE, 2)]
    with Clock() as clock:
        for rule, N in cases:
            for a, b, c in triples:
                res = verify_ybe(a, b, c, N, rule)
                assert res.exact and res.passed, (rule, N, (a, b, c), res.witness_word)
    assert clock.elapsed < 5


@pytest.mark.criterion(3, "non-integrability witness")
def test_criterion_3_non_integrable_witness():
    for a, b, c in random_rational_points(20, 3, seed=3):
        assert verify_ybe(a, b, c, 2, RuleType.NON_INTEGRABLE).passed
    report = verify_identities(3, 2, RuleType.NON_INTEGRABLE)
    failures = [c for c in report.failures if is_reducibility_check(c.name)]
    assert failures
    assert all(c.witness_word for c in failures)


@pytest.mark.criterion(4, "R matrix ground truth for two species")
def test_criterion_4_r_matrix_ground_truth():
    z = Fraction(0)
    for x1, x2 in random_rational_points(10, 2, seed=4):
        d = -(1 - x1) * x2 / ((1 - x2) * x1)
        expected = [[d, z, z, z], [z, z, x2, z], [z, 1 / x1, z, z], [z, z, z, d]]
        assert r_matrix(x1, x2, 2, RuleType.DROP_PUSH).to_dense().tolist() == expected


@pytest.mark.criterion(5, "generator cross-check against the master equation")
def test_criterion_5_generator():
    with Clock() as clock:
        for rule in INTEGRABLE:
            for N in (2, 3):
                for shape in [(0, 1), (0, 2), (0, 1, 2), (0, 1, 3), (0, 2, 3), (0, 2, 4)]:
                    assert generator_diff(shape, N, rule) == [], (rule, N, shape)
                alg = PairAlgebra(3, N, rule)
                rates = incoming_rates((0, 1, 2), N, rule)
                # M'' = B' x I + I x B' + (B' x I)(I x B')(B x I)
                assert rates[(0, 1, 2)] == alg.bp(1) + alg.bp(2) + alg.bp(1) @ alg.bp(2) @ alg.b(1)
                two = PairAlgebra(2, N, rule)
                rates2 = incoming_rates((0, 1), N, rule)
                assert rates2[(-1, 0)] == two.b(1) and rates2[(0, 1)] == two.bp(1)
    assert clock.elapsed < 10


def _n2_battery():
    starts = [C((0, 1), (2, 1)), C((0, 1), (1, 2)), C((0, 2), (1, 1)), C((0, 1), (2, 2))]
    targets = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (0, 3)]
    for rule in INTEGRABLE:
        for t in (0.3, 1.0, 2.0):
            for c0 in starts:
                for pos in targets:
                    for word in sorted(set(itertools.permutations(c0.word))):
                        yield rule, t, c0, C(pos, word)


N3_BATTERY = [
    (C((0, 1, 2), (2, 3, 1)), [C((0, 1, 2), (1, 3, 2)), C((1, 2, 4), (3, 2, 1)), C((0, 3, 5), (2, 1, 3))]),
    (C((0, 1, 3), (3, 1, 2)), [C((0, 2, 3), (1, 3, 2)), C((1, 3, 4), (3, 1, 2))]),
    (C((0, 1, 2), (2, 1, 1)), [C((0, 1, 2), (1, 1, 2)), C((1, 2, 3), (1, 2, 1)), C((0, 2, 4), (2, 1, 1))]),
    (C((0, 1, 2), (3, 3, 1)), [C((1, 2, 3), (3, 1, 3)), C((0, 2, 3), (1, 3, 3))]),
]


@pytest.mark.criterion(6, "Bethe quadrature against the series oracle")
def test_criterion_6_bethe_vs_series():
    with Clock() as clock:
        worst2, count2, cache = 0.0, 0, {}
        for rule, t, c0, target in _n2_battery():
            key = (rule, t, c0)
            if key not in cache:
                cache[key] = series_distribution(c0, t, rule, tail_tol=1e-14)
            res = transition_probability(TransitionQuery(c0, target, t, rule), QuadratureConfig(nodes=64))
            worst2 = max(worst2, abs(res.probability - cache[key].probability(target)))
            count2 += 1
        worst3, count3 = 0.0, 0
        for rule in INTEGRABLE:
            for c0, targets in N3_BATTERY:
                series = series_distribution(c0, 1.0, rule, tail_tol=1e-12)
                for target in targets:
                    res = transition_probability(TransitionQuery(c0, target, 1.0, rule), QuadratureConfig(nodes=32))
                    worst3 = max(worst3, abs(res.probability - series.probability(target)))
                    count3 += 1
    print(f"n=2: {count2} queries, max diff {worst2:.2e}; n=3: {count3} queries, max diff {worst3:.2e}; "
          f"{clock.elapsed:.1f} s")
    assert count2 >= 50 and count3 >= 10
    assert worst2 < 1e-8
    assert worst3 < 1e-6
    assert clock.elapsed < 120


VANISHING_CASES = [
    ((0, 1), (0, 1)), ((1, 2), (0, 1)), ((0, 3), (0, 2)), ((2, 5), (0, 1)),
    ((0, 1, 2), (0, 1, 2)), ((0, 2, 3), (0, 1, 2)), ((1, 3, 4), (0, 1, 3)), ((2, 3, 6), (0, 2, 3)),
]


@pytest.mark.criterion(7, "initial condition and non-identity vanishing")
@pytest.mark.parametrize("rule", INTEGRABLE)
def test_criterion_7_initial_condition_and_vanishing(rule):
    for c0 in [C((0, 1), (2, 1)), C((0, 2), (1, 1)), C((0, 1, 2), (2, 3, 1)), C((0, 1, 3), (1, 1, 2))]:
        table = probability_table(c0, 0.0, 3, rule)
        for row in table.rows:
            expected = 1.0 if (row.positions, row.word) == (c0.positions, c0.word) else 0.0
            assert abs(row.probability - expected) < 1e-9
    for x, y in VANISHING_CASES:
        n = len(x)
        for images in itertools.permutations(range(1, n + 1)):
            sigma = Permutation(images)
            if sigma.is_identity:
                continue
            for N in (1, 2):
                assert vanishing_check(sigma, x, y, N, rule) < 1e-9, (sigma, x, y, N)


@pytest.mark.criterion(8, "conservation of probability")
@pytest.mark.parametrize("rule", INTEGRABLE)
def test_criterion_8_conservation(rule):
    for c0, t in [(C((0, 1), (2, 1)), 2.0), (C((0, 1, 2), (2, 3, 1)), 1.0), (C((0, 1, 2), (1, 1, 1)), 1.5)]:
        assert abs(series_distribution(c0, t, rule, tail_tol=1e-12).total_mass - 1) < 1e-12
    for c0, t in [(C((0, 1), (2, 1)), 1.0), (C((0, 1), (1, 1)), 2.0), (C((0, 1, 2), (2, 1, 1)), 1.0)]:
        table = probability_table(c0, t, poisson_window(c0.n, t), rule)
        assert abs(table.deficit) < 1e-6
        assert not table.flagged


@pytest.mark.criterion(9, "Monte Carlo consistency and reproducibility")
def test_criterion_9_monte_carlo(tmp_path):
    c0 = C((0, 1), (2, 1))
    trials = 100_000
    with Clock() as clock:
        counts = simulate_ensemble(c0, 1.0, trials, 12345, RuleType.DROP_PUSH)
        series = series_distribution(c0, 1.0, RuleType.DROP_PUSH)
        checked = 0
        for state, p in series.distribution.items():
            if p <= 1e-3:
                continue
            se = math.sqrt(p * (1 - p) / trials)
            assert abs(counts.get(state, 0) / trials - p) < 4 * se, state
            checked += 1
        argv = ["simulate", "--nu", "21", "--t", "1", "--trials", str(trials), "--seed", "12345",
                "--output-dir", str(tmp_path)]
        assert main(argv + ["--prefix", "first"]) == 0
        assert main(argv + ["--prefix", "second"]) == 0
    assert checked > 10
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()
    assert clock.elapsed < 30


@pytest.mark.criterion(10, "single-species reductions")
def test_criterion_10_single_species():
    eighth = Fraction(1, 8)
    hand = {(3, 4): eighth, (2, 4): eighth, (2, 3): 2 * eighth, (1, 4): eighth, (1, 3): 2 * eighth, (0, 4): eighth}
    chain = jump_chain_distribution(C((0, 1), (1, 1)), 3, RuleType.DROP_PUSH)
    assert chain == {C(pos, (1, 1)): p for pos, p in hand.items()}
    # species-blind: the all-twos word moves exactly like the all-ones word
    chain2 = jump_chain_distribution(C((0, 1), (2, 2)), 3, RuleType.DROP_PUSH)
    assert {c.positions: p for c, p in chain2.items()} == hand
    rates = extract_generator((0, 1), 1, RuleType.TASEP).rates
    assert rates[(0, 1)].word_entry((1, 1), (1, 1)) == 1
    assert rates[(0, 2)].word_entry((1, 1), (1, 1)) == 1
    assert set(rates) == {(0, 1), (0, 2)}
