import json

import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from lrswap.errors import InvalidParameterError, ResourceLimitError
from lrswap.pairalg import (
    PairAlgebra,
    build_pair_matrices,
    embed,
    frak_A,
    is_reducibility_check,
    swap_matrix,
    verify_identities,
)
from lrswap.rules import RuleType
from lrswap.tensor import TensorOperator

from oracles import dense_pair

INTEGRABLE = [RuleType.DROP_PUSH, RuleType.TASEP]
ALL_RULES = INTEGRABLE + [RuleType.NON_INTEGRABLE]

# two-particle master equation, rows/columns 11, 12, 21, 22
DROP_PUSH_B = [[1, 0, 0, 0], [0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1]]
DROP_PUSH_BP = [[0, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 0], [0, 0, 0, 0]]
TASEP_B = [[0, 0, 0, 0], [0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0]]
TASEP_BP = [[1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 0], [0, 0, 0, 1]]


def dense(op):
    return [[int(v) for v in row] for row in op.to_dense(int).tolist()]


@pytest.mark.parametrize("rule, b, bp", [
    (RuleType.DROP_PUSH, DROP_PUSH_B, DROP_PUSH_BP),
    (RuleType.TASEP, TASEP_B, TASEP_BP),
])
def test_two_species_matrices_match_displayed_boundary_condition(rule, b, bp):
    B, Bp = build_pair_matrices(2, rule)
    assert dense(B) == b
    assert dense(Bp) == bp


@pytest.mark.parametrize("rule", ["drop-push", "tasep"])
@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_pair_matrices_match_independent_tables(rule, N):
    B, Bp = build_pair_matrices(N, rule)
    b, bp = dense_pair(N, rule)
    assert sympy.Matrix(B.to_dense()) == b
    assert sympy.Matrix(Bp.to_dense()) == bp


@pytest.mark.parametrize("rule", ALL_RULES)
@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_every_attempt_has_one_outcome(rule, N):
    B, Bp = build_pair_matrices(N, rule)
    assert B.is_partial_permutation() and Bp.is_partial_permutation()
    total = B + Bp
    for j in range(N * N):
        assert list(total.column(j).values()) == [1]


def test_rule_parsing():
    assert RuleType.parse("DropPushType") is RuleType.DROP_PUSH
    assert RuleType.parse("tasep") is RuleType.TASEP
    assert RuleType.parse("non_integrable") is RuleType.NON_INTEGRABLE
    assert not RuleType.NON_INTEGRABLE.integrable
    with pytest.raises(InvalidParameterError):
        RuleType.parse("asep")


@given(st.sampled_from(ALL_RULES), st.integers(2, 3), st.integers(4, 5), st.data())
def test_far_apart_factors_commute(rule, N, n, data):
    if N**n > 400:
        N = 2
    alg = PairAlgebra(n, N, rule)
    i = data.draw(st.integers(1, n - 3))
    j = data.draw(st.integers(i + 2, n - 1))
    for x in (alg.b(i), alg.bp(i)):
        for y in (alg.b(j), alg.bp(j)):
            assert x @ y == y @ x


@pytest.mark.parametrize("rule", INTEGRABLE)
@pytest.mark.parametrize("N", [2, 3, 4])
def test_three_particle_crossing_has_two_forms(rule, N):
    # (B' x I)(I x B')(B x I) = (I x B)(B' x I)(I x B')
    alg = PairAlgebra(3, N, rule)
    lhs = alg.bp(1) @ alg.bp(2) @ alg.b(1)
    rhs = alg.b(2) @ alg.bp(1) @ alg.bp(2)
    assert lhs == rhs


@pytest.mark.parametrize("rule", INTEGRABLE)
@pytest.mark.parametrize("n, N", [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (4, 3), (5, 2)])
def test_identity_suite_passes(rule, n, N):
    report = verify_identities(n, N, rule)
    assert report.all_passed, [c.name for c in report.failures]


def test_non_integrable_rule_breaks_reducibility_with_witness():
    report = verify_identities(3, 2, RuleType.NON_INTEGRABLE)
    failed = [c for c in report.failures if is_reducibility_check(c.name)]
    assert failed
    assert all(c.witness_word and len(c.witness_word) == 3 for c in failed)


@pytest.mark.parametrize("rule", INTEGRABLE)
def test_same_shape_rate_two_and_three_particles(rule):
    alg2 = PairAlgebra(2, 3, rule)
    assert alg2.same_shape_rate() == alg2.bp(1)
    alg3 = PairAlgebra(3, 3, rule)
    expected = alg3.bp(1) + alg3.bp(2) + alg3.bp(1) @ alg3.bp(2) @ alg3.b(1)
    assert alg3.same_shape_rate() == expected


@pytest.mark.parametrize("rule", INTEGRABLE)
def test_swap_matrices_are_partial_permutations(rule):
    alg = PairAlgebra(4, 3, rule)
    for i in range(1, 4):
        for j in range(i + 1, 5):
            assert alg.swap(i, j).is_partial_permutation()
    assert swap_matrix(1, 3, 3, 2, rule) == PairAlgebra(3, 2, rule).swap(1, 3)


@pytest.mark.parametrize("rule", INTEGRABLE)
def test_frak_a_closed_form_inverts(rule):
    alg = PairAlgebra(4, 2, rule)
    ident = alg.identity
    for k in range(1, 3):
        x = alg.b(k + 1) @ alg.frak_a(k - 1) @ alg.bp(k)
        assert alg.frak_a(k) @ (ident - x) == ident
    assert frak_A(0, 3, 2, rule) == TensorOperator.identity(3, 2)


def test_a_matrix_base_case_and_recursion():
    alg = PairAlgebra(4, 2, RuleType.DROP_PUSH)
    assert alg.a_matrix(0) == alg.identity
    a1 = alg.b(2) @ (alg.identity + alg.identity) @ alg.bp(1)
    assert alg.a_matrix(1) == a1


def test_arrival_operator():
    alg = PairAlgebra(3, 2, RuleType.DROP_PUSH)
    assert alg.arrival(1) == alg.identity
    assert alg.arrival(3) == alg.b(2) @ alg.b(1)
    assert embed(alg.B, 1, 3) == alg.b(1)


def test_parameter_errors():
    with pytest.raises(InvalidParameterError):
        PairAlgebra(1, 2, "drop-push")
    with pytest.raises(ResourceLimitError):
        PairAlgebra(9, 3, "drop-push")
    alg = PairAlgebra(3, 2, "drop-push")
    with pytest.raises(InvalidParameterError):
        alg.swap(2, 2)
    with pytest.raises(InvalidParameterError):
        alg.b(3)
    with pytest.raises(InvalidParameterError):
        build_pair_matrices(0, "tasep")


def test_report_serialisation():
    report = verify_identities(3, 2, RuleType.NON_INTEGRABLE)
    data = json.loads(report.to_json())
    assert data["rule_type"] == "non-integrable"
    assert {"name", "pass"} <= set(data["checks"][0])
    assert any("witness_word" in c for c in data["checks"])
