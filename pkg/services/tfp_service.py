"""
토릭 섬유곱(TFP) 서비스
압축 행렬과 ⋒ 등급으로 TFP 매개화 행렬을 만들고, 접두 행렬과의 행공간 동치,
Quad/Lift 생성 이항식 열거를 검증합니다.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from models.partition import MultipartitionMatrix, Row
from models.schemas import BinomialModel, GripReport, TfpLevelReport, TfpReport
from services import settings
from services.exceptions import (
    GeneratorCapExceeded,
    GripRequired,
    IndexingUndefined,
    LiftNotInKernel,
    NotMultihomogeneous,
    PreconditionError,
)
from services.grip_service import (
    FloretCounterexample,
    FloretDecomposition,
    column_triples,
    compression,
    decomposition_at,
    factor_omega,
    floret_condition,
    grip_check,
    level_pair,
)
from services.rational_algebra import integer_kernel_basis, mat_vec, rank, rowspan_contains, rowspan_equal

logger = logging.getLogger(__name__)


# ==================== 타입 ====================

@dataclass(frozen=True)
class Binomial:
    """z 변수 번호 → 지수 쌍으로 나타낸 이항식 z^a − z^b"""

    positive: Tuple[Tuple[int, int], ...]
    negative: Tuple[Tuple[int, int], ...]

    @classmethod
    def from_counts(cls, positive: Mapping[int, int], negative: Mapping[int, int]) -> "Binomial":
        return cls(
            positive=tuple(sorted((i, e) for i, e in positive.items() if e)),
            negative=tuple(sorted((i, e) for i, e in negative.items() if e)),
        )

    def exponent_vector(self, n: int) -> List[int]:
        vec = [0] * n
        for i, e in self.positive:
            vec[i] += e
        for i, e in self.negative:
            vec[i] -= e
        return vec

    def to_model(self, names: Sequence[str]) -> BinomialModel:
        return BinomialModel(
            positive={names[i]: e for i, e in self.positive},
            negative={names[i]: e for i, e in self.negative},
        )


@dataclass(frozen=True)
class TfpInstance:
    """
    두 인자 행렬의 섬유곱 데이터

    왼쪽 열 a 와 오른쪽 열 b 는 등급(플로렛 번호)이 같을 때 z 변수 (a, b) 를 이룹니다.
    z 변수는 등급, 왼쪽 열, 오른쪽 열 순으로 나열됩니다. 행렬에서 만든 경우
    column_of 는 z 변수를 A^{1..ℓ+1} 의 열로 보냅니다.
    """

    left: Tuple[Row, ...]
    right: Tuple[Row, ...]
    left_degrees: Tuple[int, ...]
    right_degrees: Tuple[int, ...]
    variables: Tuple[Tuple[int, int], ...]
    names: Tuple[str, ...]
    level: Optional[int] = None
    column_of: Optional[Tuple[int, ...]] = None

    @property
    def n_degrees(self) -> int:
        return max(max(self.left_degrees, default=-1), max(self.right_degrees, default=-1)) + 1

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def left_columns(self, t: int) -> List[int]:
        return [a for a, deg in enumerate(self.left_degrees) if deg == t]

    def right_columns(self, t: int) -> List[int]:
        return [b for b, deg in enumerate(self.right_degrees) if deg == t]

    def variable_index(self) -> Dict[Tuple[int, int], int]:
        return {pair: i for i, pair in enumerate(self.variables)}

    def grading_rows(self) -> List[Row]:
        """D: 등급마다 z 변수의 지시 벡터"""
        return [
            tuple(1 if self.left_degrees[a] == t else 0 for a, _ in self.variables)
            for t in range(self.n_degrees)
        ]


def _enumerate_variables(left_degrees: Sequence[int], right_degrees: Sequence[int]) -> List[Tuple[int, int]]:
    n_degrees = max(list(left_degrees) + list(right_degrees), default=-1) + 1
    out = []
    for t in range(n_degrees):
        lefts = [a for a, deg in enumerate(left_degrees) if deg == t]
        rights = [b for b, deg in enumerate(right_degrees) if deg == t]
        out.extend((a, b) for a in lefts for b in rights)
    return out


def instance_from_factors(
    left: Sequence[Sequence[int]],
    right: Sequence[Sequence[int]],
    left_degrees: Sequence[int],
    right_degrees: Sequence[int],
) -> TfpInstance:
    """
    임의의 두 0/1 인자 행렬과 열 등급으로 섬유곱 인스턴스를 만듭니다.
    z 변수 이름은 "t,j,k" (j, k 는 등급 t 안에서의 왼쪽/오른쪽 순번)입니다.
    """
    if left and len(left[0]) != len(left_degrees):
        raise IndexingUndefined("왼쪽 인자의 열 수와 등급 수가 다릅니다.")
    if right and len(right[0]) != len(right_degrees):
        raise IndexingUndefined("오른쪽 인자의 열 수와 등급 수가 다릅니다.")
    variables = _enumerate_variables(left_degrees, right_degrees)
    local_left = _local_positions(left_degrees)
    local_right = _local_positions(right_degrees)
    names = tuple(f"{left_degrees[a]},{local_left[a]},{local_right[b]}" for a, b in variables)
    return TfpInstance(
        left=tuple(tuple(row) for row in left),
        right=tuple(tuple(row) for row in right),
        left_degrees=tuple(left_degrees),
        right_degrees=tuple(right_degrees),
        variables=tuple(variables),
        names=names,
    )


def _local_positions(degrees: Sequence[int]) -> List[int]:
    seen: Counter = Counter()
    out = []
    for deg in degrees:
        out.append(seen[deg])
        seen[deg] += 1
    return out


# ==================== 행렬에서 만든 인스턴스 ====================

def _instance_at(mat: MultipartitionMatrix, level: int, dec: FloretDecomposition) -> TfpInstance:
    B, C = level_pair(mat, level)
    omega = factor_omega(B, C, dec)
    left_matrix = compression(mat.prefix(level), omega.x)
    left_degrees = [dec.t_of_b[u] for u, x_u in enumerate(omega.x) for _ in range(x_u)]
    left_keys = [(u, s) for u, x_u in enumerate(omega.x) for s in range(x_u)]

    right_keys = [(v, s) for v, y_v in enumerate(omega.y) for s in range(y_v)]
    right = [tuple(1 if v == i else 0 for v, _ in right_keys) for i in range(C.n_rows)]
    right_degrees = [dec.t_of_c[v] for v, _ in right_keys]

    variables = _enumerate_variables(left_degrees, right_degrees)
    column_by_triple = {triple: j for j, triple in enumerate(column_triples(mat, level))}
    names: List[str] = []
    column_of: List[int] = []
    for a, b in variables:
        u, s_prime = left_keys[a]
        v, s_second = right_keys[b]
        triple = (u, v, s_prime * omega.y[v] + s_second)
        if triple not in column_by_triple:
            raise IndexingUndefined(f"z 변수 {triple}에 해당하는 열이 없습니다.")
        names.append(",".join(map(str, triple)))
        column_of.append(column_by_triple[triple])
    if sorted(column_of) != list(range(mat.m)):
        raise IndexingUndefined(f"단계 {level}의 z 색인이 열과 일대일 대응하지 않습니다.")

    return TfpInstance(
        left=tuple(left_matrix.stacked_rows()),
        right=tuple(right),
        left_degrees=tuple(left_degrees),
        right_degrees=tuple(right_degrees),
        variables=tuple(variables),
        names=tuple(names),
        level=level,
        column_of=tuple(column_of),
    )


def build_tfp_instance(mat: MultipartitionMatrix, report: GripReport, level: int) -> TfpInstance:
    """
    A^{1..ℓ+1} 를 Ã^{1..ℓ} 와 Ã^{ℓ+1} 의 섬유곱으로 나타내는 인스턴스

    Raises:
        GripRequired: 단계 1..ℓ 중 GRIP 조건이 깨진 단계가 있을 때
    """
    if not 1 <= level < mat.k:
        raise IndexError(f"단계 {level}가 범위를 벗어났습니다 (1..{mat.k - 1}).")
    for lv in report.levels[:level]:
        if not (lv.well_connected and lv.floret_condition and lv.rowspan):
            raise GripRequired(f"단계 {lv.level}에서 GRIP이 성립하지 않습니다.")
    return _instance_at(mat, level, decomposition_at(report, level))


def tfp_parametrization_matrix(inst: TfpInstance) -> List[Row]:
    """z 변수 (a, b) 의 열 = [왼쪽 열 a; 오른쪽 열 b]"""
    rows = [tuple(row[a] for a, _ in inst.variables) for row in inst.left]
    rows += [tuple(row[b] for _, b in inst.variables) for row in inst.right]
    return rows


def _indicator(degrees: Sequence[int], t: int) -> List[int]:
    return [1 if deg == t else 0 for deg in degrees]


def _level_report(mat: MultipartitionMatrix, inst: TfpInstance) -> TfpLevelReport:
    multigraded = all(
        rowspan_contains(inst.left, _indicator(inst.left_degrees, t))[0]
        and rowspan_contains(inst.right, _indicator(inst.right_degrees, t))[0]
        for t in range(inst.n_degrees)
    )
    grading = inst.grading_rows()
    independent = rank(grading) == len(grading)
    prefix_rows = mat.stacked_rows(inst.level + 1)
    aligned = [tuple(row[j] for j in inst.column_of) for row in prefix_rows]
    same_rowspan = rowspan_equal(tfp_parametrization_matrix(inst), aligned)
    ok = multigraded and independent and same_rowspan
    detail = None
    if not multigraded:
        detail = "⋒ 등급이 압축 행렬의 행공간에 없습니다."
    elif not same_rowspan:
        detail = "TFP 매개화 행렬과 접두 행렬의 행공간이 다릅니다."
    return TfpLevelReport(
        level=inst.level,
        florets=inst.n_degrees,
        variables=inst.n_variables,
        multigraded=multigraded,
        grading_independent=independent,
        rowspan_equal=same_rowspan,
        ok=ok,
        detail=detail,
    )


def verify_tfp_equality(mat: MultipartitionMatrix, level: int, report: Optional[GripReport] = None) -> TfpLevelReport:
    """I(A^{1..ℓ+1}) 가 섬유곱과 같은지 (매개화 행렬의 행공간 동치로) 판정합니다."""
    report = report or grip_check(mat)
    inst = build_tfp_instance(mat, report, level)
    result = _level_report(mat, inst)
    logger.info("TFP 단계 %d: ok=%s", level, result.ok)
    return result


def verify_iterated_tfp(mat: MultipartitionMatrix) -> TfpReport:
    """
    GRIP 보고서 없이 모든 단계에서 플로렛 분해, ω 계수 1 분해, 등급과 행공간 동치를 확인합니다.
    결과는 grip_check 의 판정과 일치해야 합니다.
    """
    levels: List[TfpLevelReport] = []
    for ell in range(1, mat.k):
        B, C = level_pair(mat, ell)
        dec = floret_condition(B, C)
        if isinstance(dec, FloretCounterexample):
            levels.append(_failed_level(ell, "플로렛 조건이 성립하지 않습니다."))
            continue
        try:
            inst = _instance_at(mat, ell, dec)
        except PreconditionError as exc:
            levels.append(_failed_level(ell, str(exc), florets=dec.f))
            continue
        levels.append(_level_report(mat, inst))

    overall = all(lv.ok for lv in levels)
    expected = grip_check(mat).overall
    if overall != expected:
        logger.warning("⚠️ 반복 TFP 판정(%s)이 GRIP 판정(%s)과 다릅니다.", overall, expected)
    return TfpReport(overall=overall, levels=levels)


def _failed_level(level: int, detail: str, florets: int = 0) -> TfpLevelReport:
    return TfpLevelReport(
        level=level, florets=florets, variables=0, multigraded=False,
        grading_independent=False, rowspan_equal=False, ok=False, detail=detail,
    )


# ==================== 생성 이항식 ====================

def _check_cap(count: int) -> None:
    if count > settings.GENERATOR_OUTPUT_CAP:
        raise GeneratorCapExceeded(
            f"생성 이항식 {count}개가 출력 한도 {settings.GENERATOR_OUTPUT_CAP}개를 넘습니다."
        )


def quad_generators(inst: TfpInstance) -> List[Binomial]:
    """등급마다 z_{jk} z_{j′k′} − z_{jk′} z_{j′k} (j < j′, k < k′)"""
    index = inst.variable_index()
    total = sum(
        math.comb(len(inst.left_columns(t)), 2) * math.comb(len(inst.right_columns(t)), 2)
        for t in range(inst.n_degrees)
    )
    _check_cap(total)
    out: List[Binomial] = []
    for t in range(inst.n_degrees):
        for j, j2 in itertools.combinations(inst.left_columns(t), 2):
            for k, k2 in itertools.combinations(inst.right_columns(t), 2):
                out.append(
                    Binomial.from_counts(
                        Counter([index[(j, k)], index[(j2, k2)]]),
                        Counter([index[(j, k2)], index[(j2, k)]]),
                    )
                )
    return out


def _expand(counts: Mapping[int, int]) -> List[int]:
    return [col for col, e in sorted(counts.items()) for _ in range(e)]


def lift_binomial(
    inst: TfpInstance,
    positive: Mapping[int, int],
    negative: Mapping[int, int],
    side: str = "left",
) -> List[Binomial]:
    """
    한쪽 인자의 이항식 f = ∏ x_{j_α} − ∏ x_{j′_α} 를 다른 쪽 열의 모든 선택으로 들어 올립니다.

    Args:
        inst: 섬유곱 인스턴스
        positive, negative: 인자 열 번호 → 지수
        side: f 가 속한 인자 ("left" 또는 "right")

    Raises:
        NotMultihomogeneous: 양쪽 항의 등급 다중집합이 다를 때
        LiftNotInKernel: 들어 올린 이항식이 매개화 행렬의 커널에 없을 때 (f 가 인자의 커널에 없음)
    """
    if side not in ("left", "right"):
        raise ValueError(f"알 수 없는 인자: {side}")
    degrees = inst.left_degrees if side == "left" else inst.right_degrees
    other = inst.right_columns if side == "left" else inst.left_columns

    pos = sorted(_expand(positive), key=lambda c: (degrees[c], c))
    neg = sorted(_expand(negative), key=lambda c: (degrees[c], c))
    if sorted(degrees[c] for c in pos) != sorted(degrees[c] for c in neg):
        raise NotMultihomogeneous("이항식의 두 항이 같은 ⋒ 등급을 갖지 않습니다.")

    choices = [other(degrees[c]) for c in pos]
    _check_cap(math.prod(len(options) for options in choices))
    index = inst.variable_index()

    def pair(col: int, partner: int) -> int:
        return index[(col, partner)] if side == "left" else index[(partner, col)]

    param = tfp_parametrization_matrix(inst)
    out: List[Binomial] = []
    for picks in itertools.product(*choices):
        lifted = Binomial.from_counts(
            Counter(pair(c, k) for c, k in zip(pos, picks)),
            Counter(pair(c, k) for c, k in zip(neg, picks)),
        )
        if not in_kernel(inst, lifted, param):
            raise LiftNotInKernel(f"{side} 인자의 이항식이 커널에 없습니다: {dict(positive)} − {dict(negative)}")
        out.append(lifted)
    return out


def factor_lifts(inst: TfpInstance) -> List[Binomial]:
    """두 인자 행렬의 정수 커널 기저를 이항식으로 보고 모두 들어 올립니다."""
    out: List[Binomial] = []
    for side, rows, n in (("left", inst.left, len(inst.left_degrees)), ("right", inst.right, len(inst.right_degrees))):
        for vec in integer_kernel_basis(rows, width=n):
            positive = {c: e for c, e in enumerate(vec) if e > 0}
            negative = {c: -e for c, e in enumerate(vec) if e < 0}
            out.extend(lift_binomial(inst, positive, negative, side=side))
            _check_cap(len(out))
    return out


def in_kernel(inst: TfpInstance, binomial: Binomial, param: Optional[List[Row]] = None) -> bool:
    """지수 벡터 차이가 TFP 매개화 행렬의 커널에 있는지 확인합니다."""
    param = tfp_parametrization_matrix(inst) if param is None else param
    vec = binomial.exponent_vector(inst.n_variables)
    return all(x == 0 for x in mat_vec(param, vec))


def generator_report(mat: MultipartitionMatrix, level: int, with_generators: bool = False) -> TfpReport:
    """한 단계의 동치 판정과 (선택적으로) Quad/Lift 생성 이항식"""
    report = grip_check(mat)
    level_report = verify_tfp_equality(mat, level, report)
    if not with_generators:
        return TfpReport(overall=level_report.ok, levels=[level_report])
    inst = build_tfp_instance(mat, report, level)
    quads = quad_generators(inst)
    lifts = factor_lifts(inst)
    unsound = [b for b in quads if not in_kernel(inst, b)]
    if unsound:
        logger.warning("⚠️ 커널에 없는 생성 이항식 %d개", len(unsound))
    return TfpReport(
        overall=level_report.ok and not unsound,
        levels=[level_report],
        quads=[b.to_model(inst.names) for b in quads],
        lifts=[b.to_model(inst.names) for b in lifts],
    )
