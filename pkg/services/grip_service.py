"""
GRIP 판정 서비스
⋓/⋒ 연산, 플로렛 조건, 연결 비율, ω = x·y 분해, 압축 행렬과 GRIP 보고서를 계산합니다.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx

from models.partition import MultipartitionMatrix, PartitionMatrix
from models.schemas import GripReport, LevelReport
from services.exceptions import (
    CountExceedsMultiplicity,
    DimensionMismatch,
    FloretsUndefined,
    RankOneViolation,
)
from services.matrix_service import column_labeling, column_weights
from services.rational_algebra import rowspan_contains

logger = logging.getLogger(__name__)


# ==================== 결과 타입 ====================

@dataclass(frozen=True)
class FloretDecomposition:
    """(B, C) 쌍의 플로렛 분해. 플로렛 번호는 가장 작은 C 행 순서."""

    florets_b: Tuple[Tuple[int, ...], ...]
    florets_c: Tuple[Tuple[int, ...], ...]
    t_of_b: Tuple[int, ...]
    t_of_c: Tuple[int, ...]

    @property
    def f(self) -> int:
        return len(self.florets_c)


@dataclass(frozen=True)
class FloretCounterexample:
    """연결된 C 행 집합이 겹치지만 같지 않은 B 행 쌍"""

    u: int
    u_prime: int
    neighbours_u: Tuple[int, ...]
    neighbours_u_prime: Tuple[int, ...]

    def as_dict(self) -> Dict[str, object]:
        return {
            "rows": [self.u, self.u_prime],
            "neighbours": [list(self.neighbours_u), list(self.neighbours_u_prime)],
        }


@dataclass(frozen=True)
class WellConnectedCounterexample:
    block: int
    row: int
    column: int
    column_prime: int
    ratio: Fraction
    ratio_prime: Fraction

    def as_dict(self) -> Dict[str, object]:
        return {
            "block": self.block,
            "row": self.row,
            "columns": [self.column, self.column_prime],
            "ratios": [str(self.ratio), str(self.ratio_prime)],
        }


@dataclass(frozen=True)
class ConnectionRatios:
    """블록/행별 C^ℓ_i (c^0 ≡ 1 이므로 첫 블록은 |I^1_i|)"""

    ratios: Tuple[Tuple[Fraction, ...], ...]

    def at(self, block: int, row: int) -> Fraction:
        return self.ratios[block][row]

    def column_product(self, mat: MultipartitionMatrix, j: int) -> Fraction:
        out = Fraction(1)
        for b, block in enumerate(mat.blocks):
            out *= self.ratios[b][block.selector[j]]
        return out


@dataclass(frozen=True)
class OmegaTable:
    """ω_uv 표와 플로렛별 원시 분해 x, y"""

    omega: Dict[Tuple[int, int], int]
    x: Tuple[int, ...]
    y: Tuple[int, ...]
    decomposition: FloretDecomposition

    def value(self, u: int, v: int) -> int:
        return self.omega.get((u, v), 0)

    def big_y(self, u: int) -> int:
        """Y_u = Σ_{v ∈ 같은 플로렛} y_v"""
        t = self.decomposition.t_of_b[u]
        return sum(self.y[v] for v in self.decomposition.florets_c[t])

    def big_x(self, v: int) -> int:
        t = self.decomposition.t_of_c[v]
        return sum(self.x[u] for u in self.decomposition.florets_b[t])


# ==================== ⋓ / ⋒ ====================

def cup(blocks: Sequence[PartitionMatrix]) -> PartitionMatrix:
    """⋓: 쌓은 블록의 서로 다른 열마다 한 행을 갖는 분할 행렬"""
    if not blocks:
        raise DimensionMismatch("⋓ 연산에는 블록이 하나 이상 필요합니다.")
    m = blocks[0].n_cols
    if any(block.n_cols != m for block in blocks):
        raise DimensionMismatch("⋓ 연산의 블록 열 수가 서로 다릅니다.")
    labeling = column_labeling([row for block in blocks for row in block.rows])
    return PartitionMatrix.from_selector(labeling.labels, labeling.beta)


def connected(row_b: Sequence[int], row_c: Sequence[int]) -> bool:
    if len(row_b) != len(row_c):
        raise DimensionMismatch(f"행 길이가 다릅니다: {len(row_b)} != {len(row_c)}")
    return any(a and b for a, b in zip(row_b, row_c))


def _neighbours(B: PartitionMatrix, C: PartitionMatrix) -> Dict[int, set]:
    out: Dict[int, set] = {u: set() for u in range(B.n_rows)}
    for u, v in zip(B.selector, C.selector):
        out[u].add(v)
    return out


def floret_condition(
    B: PartitionMatrix, C: PartitionMatrix
) -> Union[FloretDecomposition, FloretCounterexample]:
    """
    B 행과 C 행의 연결 그래프에서 플로렛을 구합니다.

    Args:
        B: 앞쪽 분할 행렬
        C: 다음 분할 행렬

    Returns:
        FloretDecomposition, 또는 조건 위반 시 FloretCounterexample
    """
    if B.n_cols != C.n_cols:
        raise DimensionMismatch(f"열 수가 다릅니다: {B.n_cols} != {C.n_cols}")

    graph = nx.Graph()
    graph.add_nodes_from(("B", u) for u in range(B.n_rows))
    graph.add_nodes_from(("C", v) for v in range(C.n_rows))
    graph.add_edges_from((("B", u), ("C", v)) for u, v in zip(B.selector, C.selector))
    neighbours = _neighbours(B, C)

    components = []
    for nodes in nx.connected_components(graph):
        rows_b = tuple(sorted(i for side, i in nodes if side == "B"))
        rows_c = tuple(sorted(i for side, i in nodes if side == "C"))
        components.append((rows_b, rows_c))

    # 완전 이분 그래프인지 확인
    for rows_b, rows_c in components:
        full = set(rows_c)
        if all(neighbours[u] == full for u in rows_b):
            continue
        for a, u in enumerate(rows_b):
            for u_prime in rows_b[a + 1:]:
                nu, nu_prime = neighbours[u], neighbours[u_prime]
                if nu & nu_prime and nu != nu_prime:
                    return FloretCounterexample(
                        u, u_prime, tuple(sorted(nu)), tuple(sorted(nu_prime))
                    )

    components.sort(key=lambda comp: comp[1][0])
    t_of_b = [0] * B.n_rows
    t_of_c = [0] * C.n_rows
    for t, (rows_b, rows_c) in enumerate(components):
        for u in rows_b:
            t_of_b[u] = t
        for v in rows_c:
            t_of_c[v] = t
    return FloretDecomposition(
        florets_b=tuple(comp[0] for comp in components),
        florets_c=tuple(comp[1] for comp in components),
        t_of_b=tuple(t_of_b),
        t_of_c=tuple(t_of_c),
    )


def cap(B: PartitionMatrix, C: PartitionMatrix, dec: FloretDecomposition) -> PartitionMatrix:
    """⋒: 열 j가 속한 플로렛을 가리키는 f×m 지시 행렬"""
    if B.n_cols != C.n_cols:
        raise DimensionMismatch(f"열 수가 다릅니다: {B.n_cols} != {C.n_cols}")
    return PartitionMatrix.from_selector([dec.t_of_c[v] for v in C.selector], dec.f)


# ==================== 연결 비율 ====================

def _ratio_table(
    mat: MultipartitionMatrix,
) -> Tuple[List[List[Optional[Fraction]]], List[Optional[WellConnectedCounterexample]]]:
    """블록별 연결 비율 (일정하지 않은 행은 None)과 블록별 첫 위반"""
    previous = [1] * mat.m
    table: List[List[Optional[Fraction]]] = []
    failures: List[Optional[WellConnectedCounterexample]] = []
    for b, block in enumerate(mat.blocks):
        current = column_weights(mat, b + 1)
        rows: List[Optional[Fraction]] = []
        failure: Optional[WellConnectedCounterexample] = None
        for i in range(block.n_rows):
            columns = sorted(block.index_set(i))
            first = columns[0]
            ratio = Fraction(current[first], previous[first])
            bad = next((j for j in columns if Fraction(current[j], previous[j]) != ratio), None)
            if bad is None:
                rows.append(ratio)
                continue
            rows.append(None)
            if failure is None:
                failure = WellConnectedCounterexample(
                    b, i, first, bad, ratio, Fraction(current[bad], previous[bad])
                )
        table.append(rows)
        failures.append(failure)
        previous = current
    return table, failures


def well_connected(
    mat: MultipartitionMatrix,
) -> Union[ConnectionRatios, WellConnectedCounterexample]:
    table, failures = _ratio_table(mat)
    first = next((f for f in failures if f is not None), None)
    if first is not None:
        return first
    return ConnectionRatios(tuple(tuple(row) for row in table))


def connection_ratios(mat: MultipartitionMatrix) -> ConnectionRatios:
    result = well_connected(mat)
    if isinstance(result, WellConnectedCounterexample):
        raise RankOneViolation(
            f"연결 비율이 정의되지 않습니다 (블록 {result.block}, 행 {result.row})."
        )
    return result


# ==================== ω 분해와 압축 ====================

def omega_counts(B: PartitionMatrix, C: PartitionMatrix) -> Dict[Tuple[int, int], int]:
    """ω_uv: 열 [e_u; e_v]의 개수"""
    return dict(Counter(zip(B.selector, C.selector)))


def factor_omega(B: PartitionMatrix, C: PartitionMatrix, dec: FloretDecomposition) -> OmegaTable:
    """
    플로렛마다 ω를 x·y 로 분해합니다. y는 플로렛 안에서 원시 벡터입니다.

    Raises:
        RankOneViolation: ω가 플로렛 안에서 계수 1이 아닐 때
    """
    omega = omega_counts(B, C)
    x = [0] * B.n_rows
    y = [0] * C.n_rows
    for t, (rows_b, rows_c) in enumerate(zip(dec.florets_b, dec.florets_c)):
        u0, v0 = rows_b[0], rows_c[0]
        reference = [omega.get((u0, v), 0) for v in rows_c]
        if any(w == 0 for w in reference):
            raise RankOneViolation(f"플로렛 {t}의 행 {u0}가 모든 C 행과 연결되지 않습니다.")
        g = 0
        for w in reference:
            g = gcd(g, w)
        for v, w in zip(rows_c, reference):
            y[v] = w // g
        for u in rows_b:
            w = omega.get((u, v0), 0)
            if w == 0 or w % y[v0]:
                raise RankOneViolation(f"플로렛 {t}에서 ω_{{{u},{v0}}} = {w}를 y로 나눌 수 없습니다.")
            x[u] = w // y[v0]
        for u in rows_b:
            for v in rows_c:
                if omega.get((u, v), 0) != x[u] * y[v]:
                    raise RankOneViolation(
                        f"플로렛 {t}에서 ω_{{{u},{v}}} ≠ x_u·y_v ({omega.get((u, v), 0)} ≠ {x[u] * y[v]})"
                    )
    return OmegaTable(omega=omega, x=tuple(x), y=tuple(y), decomposition=dec)


def compression(prefix: MultipartitionMatrix, counts: Sequence[int]) -> MultipartitionMatrix:
    """클래스 u의 대표 열을 counts[u]번 반복한 압축 행렬 (u, 복사 순서)"""
    labeling = column_labeling(prefix.stacked_rows())
    if len(counts) != labeling.beta:
        raise DimensionMismatch(f"반복 횟수 {len(counts)}개가 클래스 수 {labeling.beta}와 다릅니다.")
    sizes = labeling.sizes()
    representatives = labeling.representatives()
    columns: List[int] = []
    for u, count in enumerate(counts):
        if not 1 <= count <= sizes[u]:
            raise CountExceedsMultiplicity(
                f"클래스 {u}의 반복 횟수 {count}가 허용 범위 1..{sizes[u]}를 벗어납니다."
            )
        columns.extend([representatives[u]] * count)
    return prefix.restrict(columns)


def column_triples(mat: MultipartitionMatrix, level: int) -> List[Tuple[int, int, int]]:
    """B_ℓA^{ℓ+1}의 각 열 j를 (u, v, s)로 색인합니다."""
    if not 1 <= level < mat.k:
        raise IndexError(f"단계 {level}가 범위를 벗어났습니다 (1..{mat.k - 1}).")
    labels = column_labeling(mat.stacked_rows(level)).labels
    selector = mat.blocks[level].selector
    seen: Counter = Counter()
    triples = []
    for u, v in zip(labels, selector):
        triples.append((u, v, seen[(u, v)]))
        seen[(u, v)] += 1
    return triples


def level_pair(mat: MultipartitionMatrix, level: int) -> Tuple[PartitionMatrix, PartitionMatrix]:
    """(B_ℓ, A^{ℓ+1})"""
    if not 1 <= level < mat.k:
        raise IndexError(f"단계 {level}가 범위를 벗어났습니다 (1..{mat.k - 1}).")
    return cup(mat.blocks[:level]), mat.blocks[level]


def omega_at_level(mat: MultipartitionMatrix, level: int) -> OmegaTable:
    B, C = level_pair(mat, level)
    dec = floret_condition(B, C)
    if isinstance(dec, FloretCounterexample):
        raise FloretsUndefined(f"단계 {level}에서 플로렛 조건이 성립하지 않습니다.")
    return factor_omega(B, C, dec)


# ==================== GRIP ====================

def _evaluate(mat: MultipartitionMatrix) -> GripReport:
    """모든 단계 ℓ ∈ [k−1]에서 세 조건을 평가합니다. 실패해도 나머지 단계를 계속 평가합니다."""
    table, failures = _ratio_table(mat)
    levels: List[LevelReport] = []
    for ell in range(1, mat.k):
        B, C = level_pair(mat, ell)
        counterexample: Dict[str, object] = {}
        wc_failure = failures[ell]
        if wc_failure is not None:
            counterexample["well_connected"] = wc_failure.as_dict()

        dec = floret_condition(B, C)
        florets_b = florets_c = None
        certificate = None
        rowspan_ok = False
        if isinstance(dec, FloretCounterexample):
            counterexample["floret_condition"] = dec.as_dict()
        else:
            florets_b = [list(rows) for rows in dec.florets_b]
            florets_c = [list(rows) for rows in dec.florets_c]
            prefix_rows = mat.stacked_rows(ell)
            certificate = []
            for t, row in enumerate(cap(B, C, dec).rows):
                ok, coefficients = rowspan_contains(prefix_rows, row)
                if not ok:
                    counterexample["rowspan"] = {"floret": t}
                    certificate = None
                    break
                certificate.append(coefficients)
            rowspan_ok = certificate is not None

        levels.append(
            LevelReport(
                level=ell,
                well_connected=wc_failure is None,
                floret_condition=florets_c is not None,
                rowspan=rowspan_ok,
                counterexample=counterexample or None,
                florets_b=florets_b,
                florets_c=florets_c,
                connection_ratios=table[ell],
                rowspan_certificate=certificate,
            )
        )

    overall = all(lv.well_connected and lv.floret_condition and lv.rowspan for lv in levels)
    n_first = mat.blocks[0].n_rows
    report = GripReport(
        overall=overall,
        k=mat.k,
        m=mat.m,
        well_connected=all(f is None for f in failures),
        connection_ratios=table,
        levels=levels,
        level_one_florets={
            "single_root": [list(range(n_first))],
            "per_row": [[i] for i in range(n_first)],
        },
    )
    logger.info("GRIP 판정: overall=%s (k=%d, m=%d)", overall, mat.k, mat.m)
    return report


class GripService:
    """GRIP 판정 서비스 클래스 (행렬별 보고서를 보관합니다)"""

    def __init__(self):
        self._reports: Dict[MultipartitionMatrix, GripReport] = {}

    def check(self, mat: MultipartitionMatrix) -> GripReport:
        """
        GRIP 보고서를 돌려줍니다. 같은 행렬은 다시 계산하지 않습니다.

        Args:
            mat: 다중 분할 행렬

        Returns:
            GripReport
        """
        report = self._reports.get(mat)
        if report is None:
            report = _evaluate(mat)
            self._reports[mat] = report
        return report.model_copy(deep=True)

    def clear(self) -> None:
        self._reports.clear()


# 전역 서비스 인스턴스
grip_service = GripService()


def grip_check(mat: MultipartitionMatrix) -> GripReport:
    return grip_service.check(mat)


def decomposition_at(report: GripReport, level: int) -> FloretDecomposition:
    """보고서에 저장된 단계 ℓ의 플로렛 분해를 복원합니다."""
    if not 1 <= level < report.k:
        raise IndexError(f"단계 {level}가 범위를 벗어났습니다 (1..{report.k - 1}).")
    lv = report.level(level)
    if lv.florets_b is None or lv.florets_c is None:
        raise FloretsUndefined(f"단계 {level}에서 플로렛 조건이 성립하지 않습니다.")
    t_of_b = [0] * sum(len(rows) for rows in lv.florets_b)
    t_of_c = [0] * sum(len(rows) for rows in lv.florets_c)
    for t, rows in enumerate(lv.florets_b):
        for u in rows:
            t_of_b[u] = t
    for t, rows in enumerate(lv.florets_c):
        for v in rows:
            t_of_c[v] = t
    return FloretDecomposition(
        florets_b=tuple(tuple(rows) for rows in lv.florets_b),
        florets_c=tuple(tuple(rows) for rows in lv.florets_c),
        t_of_b=tuple(t_of_b),
        t_of_c=tuple(t_of_c),
    )


def florets_by_level(mat: MultipartitionMatrix, report: GripReport) -> List[List[int]]:
    """블록 b의 행 i가 속한 플로렛 번호 (첫 블록은 하나의 뿌리 플로렛)"""
    out: List[List[int]] = [[0] * mat.blocks[0].n_rows]
    for b in range(1, mat.k):
        out.append(list(decomposition_at(report, b).t_of_c))
    return out


def floret_members(mat: MultipartitionMatrix, report: GripReport, block: int, row: int) -> List[int]:
    """F^ℓ[i]: 행 i와 같은 플로렛의 행들"""
    if block == 0:
        return list(range(mat.blocks[0].n_rows))
    dec = decomposition_at(report, block)
    return list(dec.florets_c[dec.t_of_c[row]])


def report_ratios(report: GripReport) -> ConnectionRatios:
    if not report.well_connected:
        raise RankOneViolation("잘 연결되지 않은 행렬에는 연결 비율이 없습니다.")
    return ConnectionRatios(tuple(tuple(row) for row in report.connection_ratios))
