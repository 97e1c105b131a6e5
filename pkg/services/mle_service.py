"""
닫힌 형식 MLE 서비스
GRIP 행렬의 유리수 MLE, 압축 데이터 MLE, 중복 제거 MLE와 MLE 검증을 제공합니다.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from models.partition import MultipartitionMatrix
from models.schemas import ColumnFactor, GripReport, MleResult, MleVerdict
from services.exceptions import GripRequired, IndexingUndefined
from services.grip_service import (
    OmegaTable,
    column_triples,
    compression,
    decomposition_at,
    omega_at_level,
    report_ratios,
)
from services.ips_service import birch_residual, block_marginals
from services.matrix_service import (
    aggregate_data,
    check_data_vector,
    column_labeling,
    column_weights,
    deduplicate,
    monomial_map,
)
from services.rational_algebra import integer_kernel_basis

logger = logging.getLogger(__name__)


def _require_grip(report: GripReport, levels: int) -> None:
    """단계 1..levels-1 의 세 조건이 모두 성립해야 합니다."""
    for lv in report.levels[: levels - 1]:
        if not (lv.well_connected and lv.floret_condition and lv.rowspan):
            raise GripRequired(f"단계 {lv.level}에서 GRIP이 성립하지 않습니다.")


def _floret_sums(
    mat: MultipartitionMatrix, report: GripReport, marginals: List[List[Fraction]], levels: int
) -> List[List[Fraction]]:
    """행마다 자신이 속한 플로렛의 주변합 합계"""
    out = [[sum(marginals[0], Fraction(0))] * mat.blocks[0].n_rows]
    for b in range(1, levels):
        dec = decomposition_at(report, b)
        totals = [sum((marginals[b][v] for v in rows), Fraction(0)) for rows in dec.florets_c]
        out.append([totals[dec.t_of_c[v]] for v in range(mat.blocks[b].n_rows)])
    return out


def floret_shares(
    mat: MultipartitionMatrix, d: Sequence[Fraction], report: GripReport, levels: Optional[int] = None
) -> List[List[Fraction]]:
    """s^ℓ_i(d) = α^ℓ_i(d) / Σ_{α ∈ F^ℓ[i]} α(d)"""
    levels = mat.k if levels is None else levels
    _require_grip(report, levels)
    marginals = [block_marginals(mat, b, d) for b in range(levels)]
    sums = _floret_sums(mat, report, marginals, levels)
    return [[a / s for a, s in zip(marginals[b], sums[b])] for b in range(levels)]


def prefix_mle(
    mat: MultipartitionMatrix,
    d: Sequence[Fraction],
    report: GripReport,
    levels: int,
    explain: bool = False,
) -> MleResult:
    """
    A^{1..ℓ} 의 닫힌 형식 MLE (ℓ = k 이면 전체 MLE)

    Args:
        mat: GRIP 행렬
        d: 정규화된 양수 데이터
        report: grip_check 결과
        levels: 접두 길이 ℓ
        explain: 열별 인자 내역 포함 여부

    Returns:
        MleResult
    """
    if not 1 <= levels <= mat.k:
        raise IndexError(f"접두 길이 {levels}가 범위를 벗어났습니다 (1..{mat.k}).")
    _require_grip(report, levels)
    data = check_data_vector(d, mat.m)
    marginals = [block_marginals(mat, b, data) for b in range(levels)]
    sums = _floret_sums(mat, report, marginals, levels)
    weights = column_weights(mat, levels)

    p_star: List[Fraction] = []
    factors: List[List[ColumnFactor]] = []
    for j in range(mat.m):
        value = Fraction(1, weights[j])
        column: List[ColumnFactor] = []
        for b in range(levels):
            i = mat.blocks[b].selector[j]
            ratio = marginals[b][i] / sums[b][i]
            value *= ratio
            if explain:
                column.append(
                    ColumnFactor(block=b, row=i, numerator=marginals[b][i], denominator=sums[b][i], ratio=ratio)
                )
        p_star.append(value)
        factors.append(column)
    return MleResult(p_star=p_star, column_weights=weights, factors=factors if explain else None)


def closed_form_mle(
    mat: MultipartitionMatrix, d: Sequence[Fraction], report: GripReport, explain: bool = False
) -> MleResult:
    if not report.overall:
        raise GripRequired("GRIP이 성립하지 않는 행렬에는 닫힌 형식 MLE를 쓸 수 없습니다.")
    return prefix_mle(mat, d, report, mat.k, explain=explain)


def mle_parameters(mat: MultipartitionMatrix, d: Sequence[Fraction], report: GripReport) -> List[Fraction]:
    """쌓인 행 순서의 매개변수 s^ℓ_i(d) / C^ℓ_i (φ_A 에 넣으면 MLE)"""
    if not report.overall:
        raise GripRequired("GRIP이 성립하지 않습니다.")
    ratios = report_ratios(report)
    shares = floret_shares(mat, d, report)
    return [s / ratios.at(b, i) for b, row in enumerate(shares) for i, s in enumerate(row)]


def lemma_sums(
    mat: MultipartitionMatrix, d: Sequence[Fraction], report: GripReport
) -> List[Tuple[Fraction, Fraction]]:
    """마지막 블록의 행 i마다 (Σ_{j∈I^k_i} p^{k-1}_j, C^k_i · Σ_{F^k[i]} α(d))"""
    if not report.overall:
        raise GripRequired("GRIP이 성립하지 않습니다.")
    if mat.k < 2:
        return []
    last = mat.k - 1
    previous = prefix_mle(mat, d, report, last).p_star
    ratios = report_ratios(report)
    marginals = block_marginals(mat, last, d)
    dec = decomposition_at(report, last)
    out = []
    for i in range(mat.blocks[last].n_rows):
        lhs = sum((previous[j] for j in mat.blocks[last].index_set(i)), Fraction(0))
        floret_total = sum((marginals[v] for v in dec.florets_c[dec.t_of_c[i]]), Fraction(0))
        out.append((lhs, ratios.at(last, i) * floret_total))
    return out


# ==================== 압축 ====================

def compressed_data(
    mat: MultipartitionMatrix, d: Sequence[Fraction], omega: Optional[OmegaTable], level: int
) -> List[Fraction]:
    """
    d̃_{(u,s′)} = Σ_{v ∈ 플로렛} Σ_{n < y_v} d_{(u,v,s′·y_v+n)}

    Returns:
        (u, s′) 순서로 나열한 압축 데이터
    """
    if omega is None:
        raise IndexingUndefined(f"단계 {level}의 ω 분해가 없습니다.")
    triples = column_triples(mat, level)
    by_triple = {triple: Fraction(d[j]) for j, triple in enumerate(triples)}
    dec = omega.decomposition
    if len(omega.x) != len(dec.t_of_b) or len(omega.y) != len(dec.t_of_c):
        raise IndexingUndefined("ω 분해와 열 색인이 맞지 않습니다.")
    out: List[Fraction] = []
    for u, x_u in enumerate(omega.x):
        rows_c = dec.florets_c[dec.t_of_b[u]]
        for s_prime in range(x_u):
            total = Fraction(0)
            for v in rows_c:
                for n in range(omega.y[v]):
                    key = (u, v, s_prime * omega.y[v] + n)
                    if key not in by_triple:
                        raise IndexingUndefined(f"열 색인 {key}가 없습니다.")
                    total += by_triple[key]
            out.append(total)
    return out


def compressed_mle(
    mat: MultipartitionMatrix,
    d: Sequence[Fraction],
    report: GripReport,
    level: int,
    omega: Optional[OmegaTable] = None,
) -> List[Fraction]:
    """Ã^{1..ℓ} 위에서 d̃ 의 MLE: (u, s′) 성분 = Y_u · p*_{(u,0)}(d)"""
    _require_grip(report, level + 1)
    omega = omega or omega_at_level(mat, level)
    p_prefix = prefix_mle(mat, d, report, level).p_star
    labeling = column_labeling(mat.stacked_rows(level))
    representatives = labeling.representatives()

    out: List[Fraction] = []
    for u, x_u in enumerate(omega.x):
        out.extend([omega.big_y(u) * p_prefix[representatives[u]]] * x_u)

    compressed = compression(mat.prefix(level), omega.x)
    d_tilde = compressed_data(mat, d, omega, level)
    if birch_residual(compressed, out, d_tilde) != 0:
        raise GripRequired(f"단계 {level}의 압축 MLE가 Birch 조건을 만족하지 않습니다.")
    return out


def dedup_mle(mat: MultipartitionMatrix, d_bar: Sequence[Fraction], report: GripReport) -> List[Fraction]:
    """중복 열을 제거한 Ā 의 MLE φ_Ā(s(d̄))"""
    if not report.overall:
        raise GripRequired("GRIP이 성립하지 않는 행렬의 중복 제거 MLE는 정의되지 않습니다.")
    reduced, _ = deduplicate(mat)
    data = check_data_vector(d_bar, reduced.m)
    shares = floret_shares(reduced, data, report)
    return monomial_map(reduced, [s for row in shares for s in row])


def dedup_data(mat: MultipartitionMatrix, d: Sequence[Fraction]) -> List[Fraction]:
    _, labeling = deduplicate(mat)
    return aggregate_data(d, labeling)


# ==================== 검증 ====================

def verify_model_point(mat: MultipartitionMatrix, p: Sequence[Fraction]) -> bool:
    """격자 기저 관계 ∏ p^{b+} = ∏ p^{b-} 를 모두 만족하는지 확인합니다."""
    values = [Fraction(x) for x in p]
    for b in integer_kernel_basis(mat.stacked_rows()):
        lhs = math.prod(values[j] ** e for j, e in enumerate(b) if e > 0)
        rhs = math.prod(values[j] ** -e for j, e in enumerate(b) if e < 0)
        if lhs != rhs:
            return False
    return True


def verify_mle(mat: MultipartitionMatrix, p: Sequence[Fraction], d: Sequence[Fraction]) -> MleVerdict:
    birch_ok = birch_residual(mat, [Fraction(x) for x in p], [Fraction(x) for x in d]) == 0
    verdict = MleVerdict(birch_ok=birch_ok, model_ok=verify_model_point(mat, p))
    logger.debug("MLE 검증: birch=%s model=%s", verdict.birch_ok, verdict.model_ok)
    return verdict
