"""
유리수 선형대수
Fraction 기반 가우스 소거로 계수, 행공간 포함/동치, 정수 커널 기저를 계산합니다.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple, Union

from services.exceptions import DimensionMismatch

logger = logging.getLogger(__name__)

FractionMatrix = List[List[Fraction]]
Number = Union[int, Fraction]


# ==================== 정수 보조 함수 ====================

def _lcm(a: int, b: int) -> int:
    return abs(a * b) // gcd(a, b) if a and b else abs(a or b)


def _lcm_list(xs: Sequence[int]) -> int:
    return reduce(_lcm, xs, 1)


def _gcd_list(xs: Sequence[int]) -> int:
    return reduce(gcd, xs, 0) if xs else 1


def primitive_integer_vector(vec: Sequence[Number]) -> Tuple[int, ...]:
    """분모 최소공배수로 정수화하고 gcd로 나눠 원시 벡터를 만듭니다 (첫 비영 성분 양수)."""
    fracs = [Fraction(x) for x in vec]
    scale = _lcm_list([f.denominator for f in fracs])
    ints = [int(f * scale) for f in fracs]
    g = _gcd_list(ints)
    if g == 0:
        return tuple(ints)
    ints = [x // g for x in ints]
    first = next(x for x in ints if x != 0)
    if first < 0:
        ints = [-x for x in ints]
    return tuple(ints)


def to_fraction_matrix(rows: Sequence[Sequence[Number]]) -> FractionMatrix:
    return [[Fraction(x) for x in row] for row in rows]


def _width(rows: Sequence[Sequence[Number]], fallback: Optional[int] = None) -> int:
    if not rows:
        if fallback is None:
            raise DimensionMismatch("빈 행렬의 열 수를 알 수 없습니다.")
        return fallback
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DimensionMismatch(f"행 {i}의 길이 {len(row)}가 {width}와 다릅니다.")
    return width


# ==================== 소거 ====================

def form_rational(m: FractionMatrix, t: Optional[List[Fraction]] = None) -> List[int]:
    """
    제자리 전진 소거 (피벗 = 열 순서상 첫 비영 원소)

    Args:
        m: 수정될 Fraction 행렬
        t: 함께 소거할 우변 벡터 (선택)

    Returns:
        피벗이 없는 자유 열 목록
    """
    free_vars: List[int] = []
    n_rows = len(m)
    if n_rows == 0:
        return free_vars
    n_cols = len(m[0])
    piv_r = 0
    for piv_c in range(n_cols):
        i_row = next((r for r in range(piv_r, n_rows) if m[r][piv_c] != 0), None)
        if i_row is None:
            free_vars.append(piv_c)
            continue
        if i_row != piv_r:
            m[piv_r], m[i_row] = m[i_row], m[piv_r]
            if t is not None:
                t[piv_r], t[i_row] = t[i_row], t[piv_r]
        fp = m[piv_r][piv_c]
        for r in range(piv_r + 1, n_rows):
            fr = m[r][piv_c]
            if fr == 0:
                continue
            frp = fr / fp
            for c in range(piv_c, n_cols):
                m[r][c] -= m[piv_r][c] * frp
            if t is not None:
                t[r] -= t[piv_r] * frp
        piv_r += 1
        if piv_r == n_rows:
            free_vars.extend(range(piv_c + 1, n_cols))
            break
    return free_vars


def back_substitution_rational(
    m: FractionMatrix,
    t: Optional[List[Fraction]],
    free_vars: Sequence[int],
    sol: List[Fraction],
) -> Optional[List[Fraction]]:
    """자유 변수 값이 채워진 sol에 피벗 변수를 역대입합니다. 불능이면 None."""
    n_rows = len(m)
    n_cols = len(sol)
    rank = n_cols - len(free_vars)
    if t is not None:
        for r in range(rank, n_rows):
            if t[r] != 0:
                return None
    free_set = set(free_vars)
    piv_cols = [c for c in range(n_cols) if c not in free_set]
    for r in range(len(piv_cols) - 1, -1, -1):
        piv_c = piv_cols[r]
        s = Fraction(0) if t is None else -t[r]
        for c in range(piv_c + 1, n_cols):
            if m[r][c]:
                s += m[r][c] * sol[c]
        sol[piv_c] = -s / m[r][piv_c]
    return sol


def row_echelon(rows: Sequence[Sequence[Number]]) -> Tuple[FractionMatrix, List[int]]:
    m = to_fraction_matrix(rows)
    free_vars = form_rational(m)
    return m, free_vars


def rref(rows: Sequence[Sequence[Number]]) -> Tuple[FractionMatrix, List[int]]:
    """기약 행사다리꼴과 피벗 열 목록"""
    m = to_fraction_matrix(rows)
    if not m:
        return m, []
    n_cols = len(m[0])
    pivots: List[int] = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        lead = m[r][c]
        if lead != 1:
            m[r] = [x / lead for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                factor = m[i][c]
                m[i] = [a - factor * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence[Number]]) -> int:
    if not rows:
        return 0
    width = _width(rows)
    _, free_vars = row_echelon(rows)
    return width - len(free_vars)


# ==================== 행공간 ====================

def _distinct_columns(rows: Sequence[Sequence[Number]], width: int) -> List[int]:
    """동일한 열 중 첫 번째만 남긴 열 인덱스"""
    seen: Dict[Tuple, int] = {}
    for j in range(width):
        key = tuple(row[j] for row in rows)
        seen.setdefault(key, j)
    return sorted(seen.values())


def rowspan_contains(
    rows: Sequence[Sequence[Number]], v: Sequence[Number]
) -> Tuple[bool, Optional[List[Fraction]]]:
    """
    v가 rows의 유리 선형결합인지 판정합니다.

    Args:
        rows: 행렬의 행들
        v: 판정할 벡터

    Returns:
        (포함 여부, 계수 벡터 또는 None)
    """
    width = _width(rows, fallback=len(v))
    if len(v) != width:
        raise DimensionMismatch(f"벡터 길이 {len(v)}가 열 수 {width}와 다릅니다.")
    if not rows:
        zero = all(Fraction(x) == 0 for x in v)
        return zero, ([] if zero else None)
    cols = _distinct_columns(list(rows) + [list(v)], width)
    # Mᵀ c = v 를 푼다
    system = [[Fraction(row[j]) for row in rows] for j in cols]
    rhs = [Fraction(v[j]) for j in cols]
    free_vars = form_rational(system, rhs)
    sol = [Fraction(0)] * len(rows)
    solved = back_substitution_rational(system, rhs, free_vars, sol)
    if solved is None:
        return False, None
    return True, solved


def rowspan_equal(m1: Sequence[Sequence[Number]], m2: Sequence[Sequence[Number]]) -> bool:
    w1 = _width(m1, fallback=None if not m2 else len(m2[0]))
    w2 = _width(m2, fallback=w1)
    if w1 != w2:
        raise DimensionMismatch(f"열 수가 다릅니다: {w1} != {w2}")
    joint = list(m1) + list(m2)
    cols = _distinct_columns(joint, w1)

    def _restrict(rows: Sequence[Sequence[Number]]) -> List[List[Number]]:
        return [[row[j] for j in cols] for row in rows]

    r1 = rank(_restrict(m1))
    r2 = rank(_restrict(m2))
    if r1 != r2:
        return False
    return rank(_restrict(joint)) == r1


# ==================== 커널 ====================

def integer_kernel_basis(rows: Sequence[Sequence[Number]], width: Optional[int] = None) -> List[Tuple[int, ...]]:
    """유리 커널을 생성하는 원시 정수 벡터들 (자유 열마다 하나)"""
    n_cols = _width(rows, fallback=width)
    if not rows:
        return [tuple(1 if c == f else 0 for c in range(n_cols)) for f in range(n_cols)]
    reduced, pivots = rref(rows)
    pivot_set = set(pivots)
    basis: List[Tuple[int, ...]] = []
    for f in range(n_cols):
        if f in pivot_set:
            continue
        vec = [Fraction(0)] * n_cols
        vec[f] = Fraction(1)
        for r, p in enumerate(pivots):
            vec[p] = -reduced[r][f]
        basis.append(primitive_integer_vector(vec))
    logger.debug("커널 기저 %d개 (열 %d, 계수 %d)", len(basis), n_cols, len(pivots))
    return basis


def mat_vec(rows: Sequence[Sequence[Number]], v: Sequence[Number]) -> List[Fraction]:
    return [sum((Fraction(a) * b for a, b in zip(row, v) if a), Fraction(0)) for row in rows]
