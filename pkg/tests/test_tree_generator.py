"""균형·층화 트리 생성기와 근접 반례 생성기 테스트"""

import math

import pytest

from models.schemas import GeneratorConfig
from services.staged_tree_service import (
    canonical_form,
    is_balanced,
    is_staged,
    is_stratified,
    matrix_from_tree,
)
from services.tree_generator import (
    floret_tree,
    generate_balanced_stratified,
    overlapping_floret_matrix,
    recoloured_floret_tree,
    swapped_floret_tree,
)
from tests.conftest import corpus_config


def test_generator_is_deterministic_per_seed():
    config = GeneratorConfig(levels=3, max_branching=3)
    first = generate_balanced_stratified(17, config)
    assert canonical_form(first) == canonical_form(generate_balanced_stratified(17, config))


def test_generated_trees_have_requested_shape():
    for seed in range(1, 31):
        config = corpus_config(seed)
        tree = generate_balanced_stratified(seed, config)
        assert tree.depth() == config.levels
        assert {len(leaf) for leaf in tree.leaves()} == {config.levels}
        for v in tree.internal_vertices():
            assert 2 <= len(tree.children(v)) <= config.max_branching


def test_corpus_trees_are_staged_stratified_and_balanced(tree_corpus):
    for entry in tree_corpus:
        tree = entry["tree"]
        assert is_staged(tree), entry["seed"]
        assert is_stratified(tree), entry["seed"]
        assert is_balanced(tree).balanced, entry["seed"]


def test_full_merge_gives_one_stage_per_level():
    tree = generate_balanced_stratified(4, GeneratorConfig(levels=3, max_branching=4, stage_merge_prob=1.0))
    widths = [len(labels) for labels in tree.labels_by_level()]
    assert len(tree.leaves()) == math.prod(widths)
    assert len(tree.stages()) == 3


def test_no_merge_is_still_balanced():
    tree = generate_balanced_stratified(9, GeneratorConfig(levels=3, max_branching=3, stage_merge_prob=0.0))
    assert is_balanced(tree).balanced
    mat = matrix_from_tree(tree)
    assert mat.k == 3
    assert mat.m == len(tree.leaves())


# ==================== 근접 반례 ====================

def test_floret_family_shapes():
    for builder in (floret_tree, swapped_floret_tree, recoloured_floret_tree):
        tree = builder(3, 2, 1)
        assert tree.depth() == 3
        assert is_staged(tree) and is_stratified(tree)
    assert len(floret_tree(3, 2, 1).leaves()) == 9
    assert len(recoloured_floret_tree(3, 2, 1).leaves()) == 8


def test_overlapping_matrix_shape():
    mat = overlapping_floret_matrix(3)
    assert mat.k == 2
    assert mat.m == 6
    assert mat.blocks[1].n_rows == 3
    with pytest.raises(ValueError):
        overlapping_floret_matrix(1)
