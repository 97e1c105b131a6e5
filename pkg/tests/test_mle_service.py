"""닫힌 형식 MLE, 접두 MLE, 압축/중복 제거 MLE, 보조정리 합, MLE 검증 테스트"""

from fractions import Fraction

import pytest

from services.exceptions import GripRequired
from services.grip_service import grip_check, omega_at_level
from services.ips_service import block_marginals, initial_state, ips_step
from services.matrix_service import column_labeling, column_weights, load_data_vector, monomial_map
from services.mle_service import (
    closed_form_mle,
    compressed_data,
    compressed_mle,
    dedup_data,
    dedup_mle,
    floret_shares,
    lemma_sums,
    mle_parameters,
    prefix_mle,
    verify_mle,
    verify_model_point,
)
from tests.conftest import DATA_DIR, random_rational_vector


# ==================== 14열 예제 ====================

def test_grip14_closed_form_goldens(grip14, grip14_data):
    d = grip14_data
    result = closed_form_mle(grip14, d, grip_check(grip14))
    alpha1_0 = sum(d[:7])
    alpha3_0 = d[0] + d[7]
    alpha3_3 = d[3] + d[5] + d[10] + d[12]
    assert alpha1_0 == Fraction(4, 15)
    assert alpha3_0 == Fraction(3, 35)
    assert result.p_star[0] == alpha1_0 * alpha3_0 == Fraction(4, 175)
    assert alpha3_3 == Fraction(34, 105)
    assert result.p_star[3] == Fraction(1, 2) * alpha1_0 * alpha3_3
    assert result.p_star[3] == result.p_star[5]
    assert sum(result.p_star) == 1
    assert result.column_weights == column_weights(grip14)


def test_explain_lists_one_factor_per_block(grip14, grip14_data):
    result = closed_form_mle(grip14, grip14_data, grip_check(grip14), explain=True)
    assert len(result.factors) == grip14.m
    first = result.factors[0]
    assert [f.block for f in first] == [0, 1, 2]
    assert first[0].ratio == Fraction(4, 15)
    assert all(f.ratio == f.numerator / f.denominator for f in first)
    assert closed_form_mle(grip14, grip14_data, grip_check(grip14)).factors is None


def test_k_step_ips_and_mid_cycle_states(grip14, grip14_data):
    report = grip_check(grip14)
    state = initial_state(grip14)
    for block in range(grip14.k):
        state = ips_step(state, grip14, grip14_data, block)
        assert state.as_list() == prefix_mle(grip14, grip14_data, report, block + 1).p_star
    assert state.as_list() == closed_form_mle(grip14, grip14_data, report).p_star


def test_parameters_reproduce_mle_through_monomial_map(grip14, grip14_data):
    report = grip_check(grip14)
    params = mle_parameters(grip14, grip14_data, report)
    assert len(params) == grip14.n_rows
    assert monomial_map(grip14, params) == closed_form_mle(grip14, grip14_data, report).p_star


def test_floret_shares_sum_to_one_per_floret(grip14, grip14_data):
    shares = floret_shares(grip14, grip14_data, grip_check(grip14))
    assert sum(shares[0]) == 1
    assert sum(shares[2][:3]) == 1
    assert sum(shares[2][3:]) == 1


def test_lemma_sums_grip14(grip14, grip14_data):
    pairs = lemma_sums(grip14, grip14_data, grip_check(grip14))
    assert len(pairs) == 5
    assert all(lhs == rhs for lhs, rhs in pairs)


# ==================== 압축과 중복 제거 ====================

@pytest.mark.parametrize("level", [1, 2])
def test_compressed_mle_sums_to_one_and_meets_birch(grip14, grip14_data, level):
    report = grip_check(grip14)
    omega = omega_at_level(grip14, level)
    p_tilde = compressed_mle(grip14, grip14_data, report, level, omega)
    assert len(p_tilde) == sum(omega.x)
    assert sum(p_tilde) == 1
    assert sum(compressed_data(grip14, grip14_data, omega, level)) == 1


def test_dedup_mle_matches_aggregated_mle(grip14, grip14_data):
    report = grip_check(grip14)
    full = closed_form_mle(grip14, grip14_data, report).p_star
    d_bar = dedup_data(grip14, grip14_data)
    assert len(d_bar) == 10
    reduced = dedup_mle(grip14, d_bar, report)
    labels = column_labeling(grip14.stacked_rows()).labels
    weights = column_weights(grip14)
    for j in range(grip14.m):
        assert full[j] * weights[j] == reduced[labels[j]]


# ==================== 검증과 오류 ====================

def test_verify_mle_certifies_closed_form(grip14, grip14_data):
    p_star = closed_form_mle(grip14, grip14_data, grip_check(grip14)).p_star
    verdict = verify_mle(grip14, p_star, grip14_data)
    assert verdict.birch_ok and verdict.model_ok
    assert verdict.certified
    assert verify_model_point(grip14, initial_state(grip14).as_list())
    assert not verify_mle(grip14, initial_state(grip14).as_list(), grip14_data).birch_ok


def test_model_point_rejects_non_model_vector(twobytwo):
    assert not verify_model_point(twobytwo, [Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10)])


def test_closed_form_requires_grip(diffrep_a):
    d = load_data_vector(DATA_DIR / "diffrep_d.txt")
    report = grip_check(diffrep_a)
    with pytest.raises(GripRequired) as excinfo:
        closed_form_mle(diffrep_a, d, report)
    assert excinfo.value.exit_code == 2
    with pytest.raises(GripRequired):
        prefix_mle(diffrep_a, d, report, 2)
    with pytest.raises(GripRequired):
        lemma_sums(diffrep_a, d, report)
    # 길이 1 접두는 항상 닫힌 형식
    assert prefix_mle(diffrep_a, d, report, 1).p_star == [Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)]


def test_prefix_level_out_of_range(grip14, grip14_data):
    with pytest.raises(IndexError):
        prefix_mle(grip14, grip14_data, grip_check(grip14), 0)


# ==================== 트리 코퍼스 ====================

def test_one_cycle_property_on_tree_corpus(tree_corpus, rng):
    for entry in tree_corpus:
        mat, report = entry["mat"], entry["report"]
        assert report.overall, entry["seed"]
        for _ in range(3):
            d = random_rational_vector(mat.m, rng)
            state = initial_state(mat)
            for block in range(mat.k):
                state = ips_step(state, mat, d, block)
                assert state.as_list() == prefix_mle(mat, d, report, block + 1).p_star
            p = state.as_list()
            assert all(block_marginals(mat, b, p) == block_marginals(mat, b, d) for b in range(mat.k))
            assert verify_model_point(mat, p), entry["seed"]


def test_lemma_identity_on_tree_corpus(tree_corpus, rng):
    for entry in tree_corpus:
        d = random_rational_vector(entry["mat"].m, rng)
        for lhs, rhs in lemma_sums(entry["mat"], d, entry["report"]):
            assert lhs == rhs, entry["seed"]
