"""
단계 트리 생성기
시드 기반 균형·층화 트리와, GRIP/균형 판정이 실패해야 하는 근접 반례를 만듭니다.
"""

from __future__ import annotations

import itertools
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.partition import MultipartitionMatrix
from models.schemas import GeneratorConfig
from services.staged_tree_service import ROOT, Label, StagedTree, Vertex

logger = logging.getLogger(__name__)


def generate_balanced_stratified(seed: int, config: Optional[GeneratorConfig] = None) -> StagedTree:
    """
    깊이 levels 의 균형·층화 단계 트리를 만듭니다.

    깊이마다 (부모 단계, 라벨) 이 같은 정점은 반드시 같은 단계가 되고, 이렇게 강제된 묶음은
    stage_merge_prob 확률로 기존 단계에 합쳐집니다. 단계마다 새 라벨 2..max_branching 개를 받으므로
    같은 단계 정점의 부분 트리는 모두 같습니다.

    Args:
        seed: 난수 시드
        config: 깊이, 최대 분기 수, 단계 병합 확률

    Returns:
        StagedTree
    """
    config = config or GeneratorConfig()
    rng = np.random.default_rng(seed)
    tree = StagedTree()

    frontier: List[Vertex] = [ROOT]
    stage_of: Dict[Vertex, int] = {ROOT: 0}
    stage_ids = itertools.count(1)
    for depth in range(config.levels):
        stage_labels: Dict[int, List[Label]] = {}
        next_row = 0
        for v in frontier:
            stage = stage_of[v]
            if stage not in stage_labels:
                width = int(rng.integers(2, config.max_branching + 1))
                stage_labels[stage] = [(depth, next_row + r) for r in range(width)]
                next_row += width

        children: List[Vertex] = []
        forced: Dict[Tuple[int, Label], int] = {}
        stages_here: List[int] = []
        for v in frontier:
            for label in stage_labels[stage_of[v]]:
                child = v + (label,)
                tree.add_path(child)
                children.append(child)
                key = (stage_of[v], label)
                if key not in forced:
                    if stages_here and rng.random() < config.stage_merge_prob:
                        forced[key] = stages_here[int(rng.integers(len(stages_here)))]
                    else:
                        forced[key] = next(stage_ids)
                        stages_here.append(forced[key])
                stage_of[child] = forced[key]
        frontier = children

    logger.debug("생성 트리: seed=%d, 잎 %d개", seed, len(frontier))
    return tree


def swapped_floret_tree(n_s: int, a: int, b: int) -> StagedTree:
    """
    깊이 3 트리. 짝수 번째 s 정점은 t0 아래 R_a, t1 아래 R_b 플로렛을 갖고
    홀수 번째는 그 반대입니다. 단계·층화이지만 균형이 아닙니다.
    """
    r_a = [(2, r) for r in range(a)]
    r_b = [(2, a + r) for r in range(b)]
    paths = []
    for s in range(n_s):
        first, second = (r_a, r_b) if s % 2 == 0 else (r_b, r_a)
        for t, florets in ((0, first), (1, second)):
            paths.extend(((0, s), (1, t), label) for label in florets)
    return StagedTree.from_paths(paths)


def recoloured_floret_tree(n_s: int, a: int, b: int) -> StagedTree:
    """마지막 s 정점만 t0 아래 플로렛이 R_b 로 바뀐 트리 (나머지는 (R_a, R_b))"""
    r_a = [(2, r) for r in range(a)]
    r_b = [(2, a + r) for r in range(b)]
    paths = []
    for s in range(n_s):
        first = r_b if s == n_s - 1 else r_a
        for t, florets in ((0, first), (1, r_b)):
            paths.extend(((0, s), (1, t), label) for label in florets)
    return StagedTree.from_paths(paths)


def floret_tree(n_s: int, a: int, b: int) -> StagedTree:
    """모든 s 정점이 (R_a, R_b) 를 갖는 균형 트리"""
    r_a = [(2, r) for r in range(a)]
    r_b = [(2, a + r) for r in range(b)]
    paths = [
        ((0, s), (1, t), label)
        for s in range(n_s)
        for t, florets in ((0, r_a), (1, r_b))
        for label in florets
    ]
    return StagedTree.from_paths(paths)


def overlapping_floret_matrix(n: int = 2) -> MultipartitionMatrix:
    """
    두 번째 블록의 한 행이 첫 번째 블록의 두 행에 걸쳐 있는 2n 열 행렬.
    플로렛 조건이 깨지므로 T_A 는 단계 트리가 아닙니다.
    """
    if n < 2:
        raise ValueError("n은 2 이상이어야 합니다.")
    first = [0] * n + [1] * n
    second = [0] + [1] * (n - 1) + [0] + [2] * (n - 1)
    return MultipartitionMatrix.from_selectors([first, second])
