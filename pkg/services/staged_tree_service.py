"""
단계 트리 서비스
행렬로부터 트리 T_A 구성, 단계/층화/균형 판정, 보간 다항식, A_T 변환, DOT 내보내기를 제공합니다.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import sympy

from models.partition import MultipartitionMatrix
from models.schemas import BalanceVerdict, RoundtripReport, TreeReport
from services.exceptions import NotStaged, NotStratified

logger = logging.getLogger(__name__)

Label = Tuple[int, int]
Vertex = Tuple[Label, ...]

ROOT: Vertex = ()
STAGE_COLORS = [
    "lightblue", "salmon", "palegreen", "khaki", "plum", "lightgray",
    "orange", "turquoise", "pink", "wheat",
]


def label_symbol(label: Label) -> sympy.Symbol:
    return sympy.Symbol(f"s{label[0]}_{label[1]}", positive=True)


def vertex_name(v: Vertex) -> str:
    """뿌리는 v, 그 외는 경로의 라벨을 이어 붙인 이름 (예: v_s0_1.s1_0)"""
    if not v:
        return "v"
    return "v_" + ".".join(f"s{b}_{r}" for b, r in v)


# ==================== 트리 ====================

class StagedTree:
    """
    라벨 경로를 정점으로 쓰는 뿌리 있는 방향 트리

    정점은 뿌리에서의 라벨 경로 튜플이므로 한 정점의 나가는 간선 라벨은 서로 다릅니다.
    잎의 multiplicity 속성은 행렬의 반복 열 개수를 기록합니다.
    """

    def __init__(self, graph: Optional[nx.DiGraph] = None):
        self.graph = graph if graph is not None else nx.DiGraph()
        if ROOT not in self.graph:
            self.graph.add_node(ROOT)

    @classmethod
    def from_paths(cls, paths: Iterable[Sequence[Label]], multiplicities: Optional[Mapping[Vertex, int]] = None) -> "StagedTree":
        tree = cls()
        for path in paths:
            tree.add_path(tuple(tuple(label) for label in path))
        for leaf, count in (multiplicities or {}).items():
            tree.graph.nodes[leaf]["multiplicity"] = count
        return tree

    def add_path(self, path: Vertex) -> None:
        for depth in range(1, len(path) + 1):
            parent, child = path[: depth - 1], path[:depth]
            if child not in self.graph:
                self.graph.add_edge(parent, child, label=path[depth - 1])

    @property
    def root(self) -> Vertex:
        return ROOT

    def children(self, v: Vertex) -> List[Vertex]:
        return sorted(self.graph.successors(v), key=lambda w: w[-1])

    def child(self, v: Vertex, label: Label) -> Vertex:
        return v + (label,)

    def floret(self, v: Vertex) -> frozenset:
        return frozenset(w[-1] for w in self.graph.successors(v))

    def level(self, v: Vertex) -> int:
        return len(v)

    def leaves(self) -> List[Vertex]:
        """깊이 우선 순서의 잎 목록 (자식은 라벨 순)"""
        out: List[Vertex] = []
        stack = [ROOT]
        while stack:
            v = stack.pop()
            kids = self.children(v)
            if not kids:
                out.append(v)
            stack.extend(reversed(kids))
        return out

    def internal_vertices(self) -> List[Vertex]:
        return [v for v in self.vertices() if self.graph.out_degree(v) > 0]

    def vertices(self) -> List[Vertex]:
        return sorted(self.graph.nodes, key=lambda v: (len(v), v))

    def multiplicity(self, leaf: Vertex) -> int:
        return int(self.graph.nodes[leaf].get("multiplicity", 1))

    def depth(self) -> int:
        return max(len(v) for v in self.graph.nodes)

    def stages(self) -> List[List[Vertex]]:
        """같은 플로렛을 가진 내부 정점들의 묶음 (깊이, 경로 순)"""
        groups: Dict[frozenset, List[Vertex]] = {}
        for v in self.internal_vertices():
            groups.setdefault(self.floret(v), []).append(v)
        return list(groups.values())

    def labels_by_level(self) -> List[List[Label]]:
        levels: Dict[int, set] = {}
        for parent, _, data in self.graph.edges(data=True):
            levels.setdefault(len(parent), set()).add(data["label"])
        return [sorted(levels[b]) for b in sorted(levels)]


def staged_witness(tree: StagedTree) -> Optional[Tuple[Vertex, Vertex]]:
    """플로렛이 겹치지만 같지 않은 두 정점, 없으면 None"""
    owner: Dict[Label, Vertex] = {}
    for v in tree.internal_vertices():
        floret = tree.floret(v)
        for label in floret:
            w = owner.setdefault(label, v)
            if w != v and tree.floret(w) != floret:
                return (w, v)
    return None


def is_staged(tree: StagedTree) -> bool:
    return staged_witness(tree) is None


def tree_from_matrix(mat: MultipartitionMatrix) -> StagedTree:
    """
    열 j의 경로 (0, S(1,j)), (1, S(2,j)), ... 로 T_A 를 만듭니다. 같은 열은 같은 경로입니다.

    Raises:
        NotStaged: 플로렛 조건을 어기는 정점 쌍이 있을 때
    """
    paths = [tuple((b, block.selector[j]) for b, block in enumerate(mat.blocks)) for j in range(mat.m)]
    counts = Counter(paths)
    tree = StagedTree.from_paths(counts.keys(), multiplicities=counts)
    witness = staged_witness(tree)
    if witness is not None:
        v, w = witness
        raise NotStaged(
            f"{vertex_name(v)}와 {vertex_name(w)}의 플로렛이 겹치지만 같지 않습니다.", witness=witness
        )
    return tree


def is_stratified(tree: StagedTree) -> bool:
    leaves = tree.leaves()
    if len({len(v) for v in leaves}) > 1:
        return False
    levels: Dict[frozenset, int] = {}
    for v in tree.internal_vertices():
        if levels.setdefault(tree.floret(v), len(v)) != len(v):
            return False
    return True


# ==================== 보간 다항식 ====================

@dataclass(frozen=True)
class LabelPolynomial:
    """라벨 기호의 음이 아닌 정수 계수 다항식"""

    poly: sympy.Poly

    def __mul__(self, other: "LabelPolynomial") -> "LabelPolynomial":
        return LabelPolynomial(self.poly * other.poly)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelPolynomial):
            return NotImplemented
        return self.poly.as_expr() == other.poly.as_expr() or (self.poly - other.poly).is_zero

    def __hash__(self) -> int:
        return hash(self.poly.as_expr())

    @property
    def n_terms(self) -> int:
        return len(self.poly.terms())

    def coefficient_sum(self) -> int:
        return int(sum(coeff for _, coeff in self.poly.terms()))

    def evaluate(self, values: Mapping[Label, Fraction]) -> Fraction:
        subs = {label_symbol(label): sympy.Rational(v.numerator, v.denominator) for label, v in values.items()}
        result = sympy.Rational(self.poly.as_expr().subs(subs))
        return Fraction(int(result.p), int(result.q))

    def __str__(self) -> str:
        return str(self.poly.as_expr())


def _generators(tree: StagedTree) -> List[sympy.Symbol]:
    return [label_symbol(label) for level in tree.labels_by_level() for label in level] or [sympy.Symbol("s")]


def interpolating_polynomials(tree: StagedTree, start: Optional[Vertex] = None) -> Dict[Vertex, LabelPolynomial]:
    """start 아래 모든 정점의 t(v) (잎부터 역순으로 계산)"""
    start = ROOT if start is None else start
    gens = _generators(tree)
    one = sympy.Poly(1, *gens)
    memo: Dict[Vertex, sympy.Poly] = {}
    for v in nx.dfs_postorder_nodes(tree.graph, start):
        kids = list(tree.graph.successors(v))
        if not kids:
            memo[v] = one
            continue
        total = sympy.Poly(0, *gens)
        for w in kids:
            total += sympy.Poly(label_symbol(w[-1]), *gens) * memo[w]
        memo[v] = total
    return {v: LabelPolynomial(poly) for v, poly in memo.items()}


def interpolating_polynomial(tree: StagedTree, v: Optional[Vertex] = None) -> LabelPolynomial:
    v = ROOT if v is None else v
    return interpolating_polynomials(tree, v)[v]


def is_balanced(tree: StagedTree) -> BalanceVerdict:
    """
    같은 단계의 v, w와 라벨 i, j에 대해 t(v_i)t(w_j) = t(w_i)t(v_j) 를 확인합니다.
    단계의 첫 정점과 첫 라벨을 기준으로 비교합니다.
    """
    witness = staged_witness(tree)
    if witness is not None:
        return BalanceVerdict(
            balanced=False,
            counterexample={"not_staged": [vertex_name(witness[0]), vertex_name(witness[1])]},
        )
    t = interpolating_polynomials(tree)
    for stage in tree.stages():
        if len(stage) < 2:
            continue
        v = stage[0]
        labels = sorted(tree.floret(v))
        pivot = labels[0]
        for w in stage[1:]:
            for label in labels[1:]:
                lhs = t[tree.child(v, pivot)] * t[tree.child(w, label)]
                rhs = t[tree.child(w, pivot)] * t[tree.child(v, label)]
                if lhs != rhs:
                    return BalanceVerdict(
                        balanced=False,
                        counterexample={
                            "v": vertex_name(v),
                            "w": vertex_name(w),
                            "labels": [list(pivot), list(label)],
                        },
                    )
    return BalanceVerdict(balanced=True)


# ==================== 트리 → 행렬 ====================

def matrix_from_tree(tree: StagedTree, with_multiplicity: bool = False) -> MultipartitionMatrix:
    """
    뿌리-잎 경로를 열로, 깊이를 블록으로, 라벨을 행으로 하는 A_T

    Args:
        tree: 층화된 단계 트리
        with_multiplicity: 잎의 multiplicity 만큼 열을 반복할지 여부

    Returns:
        MultipartitionMatrix
    """
    if not is_stratified(tree):
        raise NotStratified("층화되지 않은 트리는 다중 분할 행렬로 바꿀 수 없습니다.")
    labels = tree.labels_by_level()
    row_of = [{label: r for r, label in enumerate(level)} for level in labels]
    selectors: List[List[int]] = [[] for _ in labels]
    for leaf in tree.leaves():
        repeat = tree.multiplicity(leaf) if with_multiplicity else 1
        for _ in range(repeat):
            for b, label in enumerate(leaf):
                selectors[b].append(row_of[b][label])
    return MultipartitionMatrix.from_selectors(selectors)


def normalize_labels(tree: StagedTree) -> StagedTree:
    """깊이별 라벨을 (b, 0..n_b-1) 로 다시 번호 매깁니다."""
    mapping = {
        label: (b, r) for b, level in enumerate(tree.labels_by_level()) for r, label in enumerate(level)
    }
    paths = [tuple(mapping[label] for label in leaf) for leaf in tree.leaves()]
    counts = {tuple(mapping[label] for label in leaf): tree.multiplicity(leaf) for leaf in tree.leaves()}
    return StagedTree.from_paths(paths, multiplicities=counts)


def canonical_form(tree: StagedTree, v: Optional[Vertex] = None) -> str:
    v = ROOT if v is None else v
    kids = tree.children(v)
    if not kids:
        return "()"
    parts = sorted(f"{w[-1][0]}.{w[-1][1]}:{canonical_form(tree, w)}" for w in kids)
    return "(" + ",".join(parts) + ")"


def to_dot(tree: StagedTree, name: str = "staged_tree") -> str:
    """단계별 색, 간선 라벨 s^b_r, 잎의 반복 수 xN 을 담은 DOT 문자열"""
    color_of: Dict[Vertex, str] = {}
    for index, stage in enumerate(s for s in tree.stages() if len(s) > 1):
        for v in stage:
            color_of[v] = STAGE_COLORS[index % len(STAGE_COLORS)]

    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle, style=filled, fillcolor=white];"]
    for v in tree.vertices():
        attrs = [f'label="{vertex_name(v)}"']
        if v in color_of:
            attrs.append(f'fillcolor="{color_of[v]}"')
        if tree.graph.out_degree(v) == 0 and tree.multiplicity(v) > 1:
            attrs.append(f'xlabel="x{tree.multiplicity(v)}"')
            attrs.append("shape=doublecircle")
        lines.append(f'  "{vertex_name(v)}" [{", ".join(attrs)}];')
    for parent, child, data in sorted(tree.graph.edges(data=True), key=lambda e: (len(e[1]), e[1])):
        b, r = data["label"]
        lines.append(f'  "{vertex_name(parent)}" -> "{vertex_name(child)}" [label="s^{b}_{r}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_report(tree: StagedTree) -> TreeReport:
    witness = staged_witness(tree)
    verdict = is_balanced(tree)
    return TreeReport(
        staged=witness is None,
        stratified=is_stratified(tree),
        balanced=verdict.balanced,
        levels=tree.depth(),
        leaves=len(tree.leaves()),
        stages=[[vertex_name(v) for v in stage] for stage in tree.stages() if len(stage) > 1],
        counterexample=verdict.counterexample,
    )


# ==================== 왕복 검사 ====================

def roundtrip(mat: MultipartitionMatrix) -> RoundtripReport:
    """GRIP ⇒ T_A 균형·층화 ⇒ A_T ⇒ GRIP 사슬과 트리 동형을 확인합니다."""
    from services.grip_service import grip_check

    grip = grip_check(mat).overall
    try:
        tree = tree_from_matrix(mat)
    except NotStaged as exc:
        logger.info("왕복 검사: 단계 트리가 아님 (%s)", exc)
        return RoundtripReport(
            grip=grip, staged=False, stratified=False, balanced=False, regrip=False,
            isomorphic=False, consistent=not grip, detail=str(exc),
        )

    stratified = is_stratified(tree)
    balanced = is_balanced(tree).balanced
    regrip = False
    isomorphic = False
    if stratified:
        rebuilt = matrix_from_tree(tree)
        regrip = grip_check(rebuilt).overall
        isomorphic = canonical_form(normalize_labels(tree_from_matrix(rebuilt))) == canonical_form(normalize_labels(tree))

    tree_ok = stratified and balanced
    consistent = (not grip or tree_ok) and (not tree_ok or regrip) and (not stratified or isomorphic)
    detail = None
    if grip != tree_ok:
        detail = "반복 열 때문에 A와 A_T의 GRIP 판정이 다릅니다." if tree_ok else None
    return RoundtripReport(
        grip=grip, staged=True, stratified=stratified, balanced=balanced, regrip=regrip,
        isomorphic=isomorphic, consistent=consistent, detail=detail,
    )
