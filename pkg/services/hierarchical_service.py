"""
계층 모형 서비스
단체 복합체, 계층 모형 행렬 A_Γ, RIP 순서 검사/탐색, 분해 가능성 판정을 제공합니다.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, Iterator, List, Optional, Sequence, Tuple

from models.partition import MultipartitionMatrix
from models.schemas import RipVerdict
from services import settings
from services.exceptions import ComplexFormatError, FacetCountTooLarge, GripRequired, InvalidFacetOrder

logger = logging.getLogger(__name__)

STATES_PREFIX = "states:"


@dataclass(frozen=True)
class SimplicialComplex:
    """
    바탕 집합 {1..n} 위의 패싯 목록과 꼭짓점별 상태 수

    패싯은 정렬된 튜플이며 서로 포함 관계가 없고, 합집합이 바탕 집합 전체입니다.
    """

    facets: Tuple[Tuple[int, ...], ...]
    state_sizes: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.facets:
            raise ComplexFormatError("패싯이 하나 이상 필요합니다.")
        for facet in self.facets:
            if not facet:
                raise ComplexFormatError("빈 패싯은 허용되지 않습니다.")
        ground = set().union(*map(set, self.facets))
        if ground != set(range(1, self.n + 1)):
            raise ComplexFormatError(f"패싯의 합집합이 {{1..{self.n}}}가 아닙니다: {sorted(ground)}")
        for a, b in itertools.permutations(range(len(self.facets)), 2):
            if set(self.facets[a]) <= set(self.facets[b]):
                raise ComplexFormatError(f"패싯 {list(self.facets[a])}가 {list(self.facets[b])}에 포함됩니다.")
        if any(size < 1 for size in self.state_sizes):
            raise ComplexFormatError("상태 수는 양의 정수여야 합니다.")

    @classmethod
    def from_facets(
        cls, facets: Sequence[Sequence[int]], state_sizes: Optional[Sequence[int]] = None
    ) -> "SimplicialComplex":
        normalized = tuple(tuple(sorted(set(f))) for f in facets)
        n = max((v for f in normalized for v in f), default=0)
        sizes = tuple(state_sizes) if state_sizes is not None else (2,) * n
        if len(sizes) != n:
            raise ComplexFormatError(f"상태 수 {len(sizes)}개가 꼭짓점 수 {n}과 다릅니다.")
        return cls(facets=normalized, state_sizes=sizes)

    @property
    def n(self) -> int:
        return len(self.state_sizes)

    @property
    def n_facets(self) -> int:
        return len(self.facets)


# ==================== 입출력 ====================

def parse_complex_text(text: str) -> SimplicialComplex:
    """
    한 줄에 패싯 하나 (공백 구분 꼭짓점 번호), 선택적 머리줄 `states: n1 n2 …`

    Raises:
        ComplexFormatError: 정수가 아닌 토큰, 빈 입력, 잘못된 패싯 구조
    """
    facets: List[List[int]] = []
    sizes: Optional[List[int]] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.lower().startswith(STATES_PREFIX):
                sizes = [int(tok) for tok in line[len(STATES_PREFIX):].split()]
            else:
                facets.append([int(tok) for tok in line.split()])
        except ValueError as exc:
            raise ComplexFormatError(f"{lineno}행: 정수가 아닌 토큰이 있습니다: {line!r}") from exc
    if not facets:
        raise ComplexFormatError("패싯이 없습니다.")
    if any(v < 1 for f in facets for v in f):
        raise ComplexFormatError("꼭짓점 번호는 1부터 시작합니다.")
    return SimplicialComplex.from_facets(facets, sizes)


def load_complex(path: Path | str) -> SimplicialComplex:
    return parse_complex_text(Path(path).read_text(encoding="utf-8"))


def format_complex_text(cx: SimplicialComplex) -> str:
    lines = []
    if any(size != 2 for size in cx.state_sizes):
        lines.append(STATES_PREFIX + " " + " ".join(map(str, cx.state_sizes)))
    lines.extend(" ".join(map(str, f)) for f in cx.facets)
    return "\n".join(lines) + "\n"


# ==================== A_Γ ====================

def _check_order(cx: SimplicialComplex, order: Optional[Sequence[int]]) -> List[int]:
    if order is None:
        return list(range(cx.n_facets))
    order = list(order)
    if sorted(order) != list(range(cx.n_facets)):
        raise InvalidFacetOrder(f"{order}는 패싯 0..{cx.n_facets - 1}의 순열이 아닙니다.")
    return order


def joint_states(cx: SimplicialComplex) -> List[Tuple[int, ...]]:
    """꼭짓점 1이 가장 상위 자리인 사전식 순서"""
    return list(itertools.product(*(range(size) for size in cx.state_sizes)))


def matrix_from_complex(cx: SimplicialComplex, order: Optional[Sequence[int]] = None) -> MultipartitionMatrix:
    """
    패싯 순서대로 블록을 쌓은 A_Γ. 블록 i의 행 S는 T|_{F_i} = S 인 열 T에서 1입니다.

    Args:
        cx: 단체 복합체
        order: 패싯 순열 (0-based, 기본값 주어진 순서)

    Returns:
        MultipartitionMatrix (블록 i의 행 수 = ∏_{f∈F_i} |R_f|)
    """
    order = _check_order(cx, order)
    columns = joint_states(cx)
    selectors = []
    for index in order:
        facet = cx.facets[index]
        radix = [cx.state_sizes[v - 1] for v in facet]
        selector = []
        for state in columns:
            row = 0
            for v, base in zip(facet, radix):
                row = row * base + state[v - 1]
            selector.append(row)
        if len(set(selector)) != math.prod(radix):
            raise ComplexFormatError(f"패싯 {list(facet)}의 상태가 모두 나타나지 않습니다.")
        selectors.append(selector)
    return MultipartitionMatrix.from_selectors(selectors)


# ==================== RIP ====================

def rip_check(cx: SimplicialComplex, order: Optional[Sequence[int]] = None) -> RipVerdict:
    """각 위치 r에서 (F_0 ∪ … ∪ F_{r-1}) ∩ F_r 가 어떤 F_j ∩ F_r (j < r) 와 같은지 확인합니다."""
    order = _check_order(cx, order)
    facets = [frozenset(cx.facets[i]) for i in order]
    seen: FrozenSet[int] = frozenset()
    for r, facet in enumerate(facets):
        if r > 0:
            running = seen & facet
            if not any(running == (earlier & facet) for earlier in facets[:r]):
                return RipVerdict(rip=False, order=order, failing_position=r, intersection=sorted(running))
        seen = seen | facet
    return RipVerdict(rip=True, order=order)


def _require_search_bound(cx: SimplicialComplex) -> None:
    if cx.n_facets > settings.RIP_SEARCH_MAX_FACETS:
        raise FacetCountTooLarge(
            f"패싯 {cx.n_facets}개는 탐색 한도 {settings.RIP_SEARCH_MAX_FACETS}개를 넘습니다."
        )


def rip_order_search(cx: SimplicialComplex) -> Optional[List[int]]:
    """사전식으로 가장 앞선 RIP 순서, 없으면 None"""
    _require_search_bound(cx)
    for order in itertools.permutations(range(cx.n_facets)):
        if rip_check(cx, order).rip:
            return list(order)
    logger.info("RIP 순서 없음: %s", [list(f) for f in cx.facets])
    return None


def is_decomposable(cx: SimplicialComplex) -> bool:
    """패싯 집합을 두 부분으로 나누는 분할을 재귀적으로 탐색합니다."""
    _require_search_bound(cx)
    return _decomposable(frozenset(frozenset(f) for f in cx.facets))


@lru_cache(maxsize=None)
def _decomposable(facets: FrozenSet[FrozenSet[int]]) -> bool:
    if len(facets) == 1:
        return True
    items = sorted(facets, key=sorted)
    first, rest = items[0], items[1:]
    for size in range(len(rest)):
        for chosen in itertools.combinations(rest, size):
            left = frozenset((first,) + chosen)
            right = facets - left
            shared = frozenset().union(*left) & frozenset().union(*right)
            if not any(shared == (f1 & f2) for f1 in left for f2 in right):
                continue
            if _decomposable(left) and _decomposable(right):
                return True
    return False


def enumerate_complexes(n: int, max_facets: Optional[int] = None) -> Iterator[SimplicialComplex]:
    """바탕 집합 {1..n} 을 덮는 모든 이진 단체 복합체 (패싯 반사슬)"""
    subsets = [frozenset(c) for r in range(1, n + 1) for c in itertools.combinations(range(1, n + 1), r)]
    limit = max_facets or len(subsets)
    ground = frozenset(range(1, n + 1))
    for count in range(1, limit + 1):
        for chosen in itertools.combinations(subsets, count):
            if frozenset().union(*chosen) != ground:
                continue
            if any(a < b for a in chosen for b in chosen):
                continue
            yield SimplicialComplex.from_facets([sorted(f) for f in chosen])


# ==================== 한 주기 수렴 ====================

def one_cycle_check(
    cx: SimplicialComplex, order: Optional[Sequence[int]], d: Sequence[Fraction]
) -> bool:
    """
    exact IPS를 k 단계 실행한 상태가 닫힌 형식 MLE와 정확히 같은지 확인합니다.

    Raises:
        GripRequired: 주어진 순서의 A_Γ 가 GRIP을 만족하지 않을 때
    """
    from services.grip_service import grip_check
    from services.ips_service import initial_state, ips_step
    from services.mle_service import closed_form_mle

    mat = matrix_from_complex(cx, order)
    report = grip_check(mat)
    if not report.overall:
        raise GripRequired("이 패싯 순서의 A_Γ 는 GRIP을 만족하지 않습니다.")
    state = initial_state(mat)
    for block in range(mat.k):
        state = ips_step(state, mat, d, block)
    return state.as_list() == closed_form_mle(mat, d, report).p_star
