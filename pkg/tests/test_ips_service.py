"""IPS 단계, exact/float 실행, 수렴 판정, Birch 잔차, KL 기록 테스트"""

from fractions import Fraction

import numpy as np
import pytest

from models.schemas import IpsConfig
from services.exceptions import DimensionMismatch, MaxCyclesExceeded, NonNormalizedData
from services.grip_service import grip_check
from services.ips_service import (
    IpsService,
    birch_residual,
    block_marginals,
    initial_state,
    ips_run,
    ips_step,
    kl_divergence,
    log_likelihood,
    run_float_batch,
)
from services.matrix_service import load_data_vector, load_matrix
from services.mle_service import closed_form_mle
from tests.conftest import DATA_DIR, random_rational_vector


def _expected_twobytwo_steps(d):
    """균등 초기값에서 이미 맞는 블록은 변화 없이 지나갑니다."""
    rows_match = d[0] + d[1] == Fraction(1, 2)
    cols_match = d[0] + d[2] == Fraction(1, 2)
    if rows_match and cols_match:
        return 0
    return 1 if cols_match else 2


# ==================== 단계 ====================

def test_single_step_matches_block_marginals(grip14, grip14_data):
    state = initial_state(grip14)
    for block in range(grip14.k):
        state = ips_step(state, grip14, grip14_data, block)
        assert block_marginals(grip14, block, state.p) == block_marginals(grip14, block, grip14_data)
    assert state.step_count == 3


def test_step_rejects_bad_block_and_unnormalized_data(twobytwo):
    state = initial_state(twobytwo)
    with pytest.raises(IndexError):
        ips_step(state, twobytwo, [Fraction(1, 4)] * 4, 2)
    with pytest.raises(NonNormalizedData):
        ips_step(state, twobytwo, [Fraction(1, 3)] * 4, 0)


def test_float_step(twobytwo):
    state = ips_step(initial_state(twobytwo, mode="float"), twobytwo, [0.1, 0.2, 0.3, 0.4], 0)
    assert state.mode == "float"
    assert np.allclose(state.as_list(), [0.15, 0.15, 0.35, 0.35])


# ==================== exact 실행 ====================

def test_twobytwo_one_cycle_on_random_data(twobytwo, rng):
    report = grip_check(twobytwo)
    for _ in range(100):
        d = random_rational_vector(4, rng)
        result = ips_run(twobytwo, d)
        assert result.converged
        assert result.one_cycle_exact
        assert result.steps_taken == _expected_twobytwo_steps(d)
        assert result.final == closed_form_mle(twobytwo, d, report).p_star
        assert result.birch_residual == 0


def test_twobytwo_fixed_data_takes_two_steps(twobytwo):
    d = load_data_vector(DATA_DIR / "twobytwo_d.txt")
    result = ips_run(twobytwo, d)
    assert result.steps_taken == 2
    assert result.cycles_taken == 1


def test_grip14_converges_within_one_cycle(grip14, grip14_data):
    result = ips_run(grip14, grip14_data)
    assert result.converged
    assert result.one_cycle_exact
    assert result.steps_taken <= grip14.k
    assert result.final == closed_form_mle(grip14, grip14_data, grip_check(grip14)).p_star


def test_diffrep_does_not_finish_in_one_cycle(diffrep_a):
    d = load_data_vector(DATA_DIR / "diffrep_d.txt")
    result = ips_run(diffrep_a, d, IpsConfig(max_cycles=3))
    assert result.one_cycle_exact is False
    assert not result.converged
    assert result.steps_taken == 6
    assert result.birch_residual > 0


def test_diffrep_identity_representation_takes_one_step(diffrep_a_tilde):
    d = load_data_vector(DATA_DIR / "diffrep_d.txt")
    result = ips_run(diffrep_a_tilde, d)
    assert result.steps_taken == 1
    assert result.final == d


def test_max_cycles_can_raise(diffrep_a):
    d = load_data_vector(DATA_DIR / "diffrep_d.txt")
    with pytest.raises(MaxCyclesExceeded) as excinfo:
        ips_run(diffrep_a, d, IpsConfig(max_cycles=2, raise_on_max_cycles=True))
    assert excinfo.value.state.steps_taken == 4
    assert excinfo.value.exit_code == 2


def test_history_records_decreasing_kl(diffrep_a):
    d = load_data_vector(DATA_DIR / "diffrep_d.txt")
    result = ips_run(diffrep_a, d, IpsConfig(max_cycles=4, record_history=True))
    assert len(result.history) == 8
    kls = [entry.kl for entry in result.history]
    assert all(b <= a + 1e-12 for a, b in zip(kls, kls[1:]))
    assert [entry.block for entry in result.history[:4]] == [0, 1, 0, 1]


# ==================== float 실행 ====================

def test_float_run_on_diffrep_reaches_birch(diffrep_a):
    d = load_data_vector(DATA_DIR / "diffrep_d.txt")
    result = ips_run(diffrep_a, d, IpsConfig(mode="float", float_tolerance=1e-12))
    assert result.converged
    assert result.mode == "float"
    assert result.birch_residual < 1e-9
    assert result.steps_taken > diffrep_a.k


def test_float_run_normalizes_data(twobytwo):
    result = ips_run(twobytwo, [1, 2, 3, 4], IpsConfig(mode="float"))
    assert result.converged
    assert np.allclose(result.final, [0.12, 0.18, 0.28, 0.42])


@pytest.mark.parametrize("name", ["diffrep_A.txt", "grip14.txt"])
def test_float_log_likelihood_never_decreases(name, rng):
    mat = load_matrix(DATA_DIR / name)
    for _ in range(5):
        d = random_rational_vector(mat.m, rng)
        result = ips_run(mat, d, IpsConfig(mode="float", max_cycles=50, record_history=True))
        values = [log_likelihood(d, initial_state(mat, mode="float").p)]
        values += [entry.log_likelihood for entry in result.history]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_service_instance_reuses_block_operators(twobytwo):
    service = IpsService(IpsConfig(mode="float"))
    assert service.operators(twobytwo) is service.operators(twobytwo)
    result = service.run(twobytwo, [1, 2, 3, 4])
    assert result.mode == "float"
    assert np.allclose(result.final, [0.12, 0.18, 0.28, 0.42])


def test_float_batch_matches_single_runs(twobytwo):
    D = np.array([[0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1], [0.25, 0.25, 0.25, 0.25]])
    final, steps, converged = run_float_batch(twobytwo, D, 1e-10, 100)
    assert converged.all()
    assert list(steps) == [2, 2, 0]
    assert np.allclose(final[0], [0.12, 0.18, 0.28, 0.42])


# ==================== 보조 계산 ====================

def test_birch_residual_exact_and_float(twobytwo):
    d = [Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10)]
    p = [Fraction(1, 4)] * 4
    assert birch_residual(twobytwo, p, d) == Fraction(1, 5)
    assert birch_residual(twobytwo, np.full(4, 0.25), np.asarray([0.1, 0.2, 0.3, 0.4])) == pytest.approx(0.2)
    with pytest.raises(DimensionMismatch):
        birch_residual(twobytwo, p[:3], d)


def test_log_likelihood_skips_zero_data():
    assert log_likelihood([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(0.5))


def test_kl_divergence():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([0.9, 0.1], [0.5, 0.5]) > 0
    with pytest.raises(DimensionMismatch):
        kl_divergence([1.0], [0.5, 0.5])
