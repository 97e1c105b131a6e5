"""
공용 pytest 픽스처
data/ 예제 파일을 실제 파서로 읽고, 시드 기반 트리 코퍼스와 무작위 유리수 데이터를 제공합니다.
"""

import random
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List

import pytest

from models.partition import MultipartitionMatrix
from models.schemas import GeneratorConfig
from services.grip_service import grip_check
from services.matrix_service import load_data_vector, load_matrix
from services.staged_tree_service import matrix_from_tree
from services.tree_generator import generate_balanced_stratified

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
CORPUS_SEEDS = range(1, 201)


def random_rational_vector(m: int, rng: random.Random, high: int = 50) -> List[Fraction]:
    """합이 1인 양의 유리수 벡터"""
    draws = [rng.randint(1, high) for _ in range(m)]
    total = sum(draws)
    return [Fraction(x, total) for x in draws]


def corpus_config(seed: int) -> GeneratorConfig:
    levels = 2 + seed % 3
    return GeneratorConfig(levels=levels, max_branching=4 if levels < 4 else 3)


@pytest.fixture
def data_path() -> Callable[[str], Path]:
    return lambda name: DATA_DIR / name


@pytest.fixture
def twobytwo() -> MultipartitionMatrix:
    return load_matrix(DATA_DIR / "twobytwo.txt")


@pytest.fixture
def twobytwo_dup() -> MultipartitionMatrix:
    return load_matrix(DATA_DIR / "twobytwo_dup.txt")


@pytest.fixture
def diffrep_a() -> MultipartitionMatrix:
    return load_matrix(DATA_DIR / "diffrep_A.txt")


@pytest.fixture
def diffrep_a_tilde() -> MultipartitionMatrix:
    return load_matrix(DATA_DIR / "diffrep_A_tilde.txt")


@pytest.fixture
def grip14() -> MultipartitionMatrix:
    return load_matrix(DATA_DIR / "grip14.txt")


@pytest.fixture
def grip14_data() -> List[Fraction]:
    return load_data_vector(DATA_DIR / "grip14_d.txt")


@pytest.fixture
def staged10() -> MultipartitionMatrix:
    return load_matrix(DATA_DIR / "staged_tree10.txt")


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240601)


@pytest.fixture(scope="session")
def tree_corpus() -> List[Dict[str, object]]:
    """시드 1..200 의 균형·층화 트리와 A_T, GRIP 보고서"""
    corpus = []
    for seed in CORPUS_SEEDS:
        tree = generate_balanced_stratified(seed, corpus_config(seed))
        mat = matrix_from_tree(tree)
        corpus.append({"seed": seed, "tree": tree, "mat": mat, "report": grip_check(mat)})
    return corpus
