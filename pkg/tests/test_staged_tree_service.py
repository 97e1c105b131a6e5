"""단계 트리 구성, 단계/층화/균형 판정, 보간 다항식, A_T 변환, DOT, 왕복 검사 테스트"""

from fractions import Fraction

import pytest

from services.exceptions import NotStaged, NotStratified
from services.grip_service import grip_check
from services.matrix_service import column_weights, deduplicate
from services.staged_tree_service import (
    ROOT,
    StagedTree,
    canonical_form,
    interpolating_polynomial,
    interpolating_polynomials,
    is_balanced,
    is_staged,
    is_stratified,
    label_symbol,
    matrix_from_tree,
    normalize_labels,
    roundtrip,
    staged_witness,
    to_dot,
    tree_from_matrix,
    tree_report,
    vertex_name,
)
from services.tree_generator import (
    floret_tree,
    overlapping_floret_matrix,
    recoloured_floret_tree,
    swapped_floret_tree,
)

SWAPPED_CASES = [(n_s, a, b) for n_s in (2, 3) for a in range(1, 5) for b in range(1, 5) if a != b]
RECOLOURED_CASES = [(n_s, a, b) for n_s in (2, 3) for a in range(1, 4) for b in range(1, 4)]


# ==================== 트리 구조 ====================

def test_vertex_names_and_symbols():
    assert vertex_name(ROOT) == "v"
    assert vertex_name(((0, 1), (1, 0))) == "v_s0_1.s1_0"
    assert str(label_symbol((2, 3))) == "s2_3"


def test_tree_from_grip14(grip14):
    tree = tree_from_matrix(grip14)
    assert len(tree.leaves()) == 10
    assert tree.depth() == 3
    assert tree.multiplicity(((0, 0), (1, 1), (2, 3))) == 2
    assert tree.multiplicity(((0, 0), (1, 0), (2, 0))) == 1
    assert tree.children(ROOT) == [((0, 0),), ((0, 1),)]
    nontrivial = [stage for stage in tree.stages() if len(stage) > 1]
    assert len(nontrivial) == 3
    assert is_staged(tree)
    assert is_stratified(tree)
    assert is_balanced(tree).balanced


def test_leaves_follow_label_order(grip14):
    leaves = tree_from_matrix(grip14).leaves()
    assert leaves[0] == ((0, 0), (1, 0), (2, 0))
    assert leaves[3] == ((0, 0), (1, 1), (2, 3))
    assert leaves[-1] == ((0, 1), (1, 1), (2, 4))


def test_non_staged_matrix_raises_with_witness():
    with pytest.raises(NotStaged) as excinfo:
        tree_from_matrix(overlapping_floret_matrix(2))
    v, w = excinfo.value.witness
    assert len(v) == len(w) == 1
    assert excinfo.value.exit_code == 2


def test_staged_but_not_stratified_tree():
    tree = StagedTree.from_paths([
        ((0, 0), (5, 0), (7, 0)),
        ((0, 0), (5, 1), (7, 0)),
        ((0, 1), (1, 0), (5, 0)),
        ((0, 1), (1, 0), (5, 1)),
    ])
    assert staged_witness(tree) is None
    assert not is_stratified(tree)
    with pytest.raises(NotStratified):
        matrix_from_tree(tree)


def test_uneven_leaf_depth_is_not_stratified():
    tree = StagedTree.from_paths([((0, 0), (1, 0)), ((0, 1),)])
    assert not is_stratified(tree)


# ==================== 보간 다항식 ====================

def test_interpolating_polynomials_grip14(grip14):
    tree = tree_from_matrix(grip14)
    assert interpolating_polynomial(tree, ((0, 0),)).n_terms == 5
    root = interpolating_polynomial(tree)
    assert root.n_terms == 10
    assert root.coefficient_sum() == 10
    all_half = {label: Fraction(1, 2) for level in tree.labels_by_level() for label in level}
    assert root.evaluate(all_half) == Fraction(10, 8)


def test_root_polynomial_is_one_on_floret_normalized_parameters(grip14, tree_corpus, rng):
    trees = [tree_from_matrix(grip14)] + [tree_from_matrix(entry["mat"]) for entry in tree_corpus[:10]]
    for tree in trees:
        root = interpolating_polynomial(tree)
        for _ in range(3):
            values = {}
            for stage in tree.stages():
                labels = sorted(tree.floret(stage[0]))
                draws = [Fraction(rng.randint(1, 20)) for _ in labels]
                values.update({label: x / sum(draws) for label, x in zip(labels, draws)})
            assert root.evaluate(values) == 1


def test_monomial_count_matches_column_weight(grip14):
    tree = tree_from_matrix(grip14)
    t = interpolating_polynomials(tree)
    reduced, _ = deduplicate(grip14)
    for mat, weight in ((reduced, lambda v: t[v].n_terms), (grip14, lambda v: _leaf_count(tree, v))):
        for level in range(1, mat.k + 1):
            weights = column_weights(mat, level)
            for j in range(mat.m):
                v = tuple((b, mat.blocks[b].selector[j]) for b in range(level))
                assert weight(v) == weights[j], (level, j)


def _leaf_count(tree, v):
    """v 아래 잎의 반복 열 개수 합"""
    return sum(tree.multiplicity(leaf) for leaf in tree.leaves() if leaf[: len(v)] == v)


def test_polynomials_of_same_stage_children(grip14):
    tree = tree_from_matrix(grip14)
    t = interpolating_polynomials(tree)
    assert t[((0, 0), (1, 0))] == t[((0, 1), (1, 0))]
    assert t[((0, 0), (1, 0))] != t[((0, 0), (1, 1))]
    assert t[((0, 0),)] * t[((0, 1),)] == t[((0, 1),)] * t[((0, 0),)]
    assert all(t[leaf].n_terms == 1 for leaf in tree.leaves())


# ==================== 균형 ====================

def test_floret_tree_is_balanced():
    assert is_balanced(floret_tree(3, 2, 3)).balanced


def test_swapped_tree_counterexample():
    verdict = is_balanced(swapped_floret_tree(2, 1, 2))
    assert not verdict.balanced
    assert set(verdict.counterexample) == {"v", "w", "labels"}
    assert verdict.counterexample["v"] == "v_s0_0"


def test_balance_on_non_staged_tree_reports_witness():
    tree = StagedTree.from_paths([((0, 0), (1, 0)), ((0, 0), (1, 1)), ((0, 1), (1, 1)), ((0, 1), (1, 2))])
    verdict = is_balanced(tree)
    assert not verdict.balanced
    assert "not_staged" in verdict.counterexample


# ==================== A_T 변환 ====================

def test_matrix_from_tree_of_grip14_is_deduplicated_matrix(grip14, staged10):
    tree = tree_from_matrix(grip14)
    assert matrix_from_tree(tree) == staged10
    repeated = matrix_from_tree(tree, with_multiplicity=True)
    assert repeated.m == 14
    assert grip_check(repeated).overall


def test_normalize_labels_and_canonical_form():
    tree = StagedTree.from_paths([((0, 4), (1, 9)), ((0, 4), (1, 7)), ((0, 8), (1, 9)), ((0, 8), (1, 7))])
    normalized = normalize_labels(tree)
    assert normalized.labels_by_level() == [[(0, 0), (0, 1)], [(1, 0), (1, 1)]]
    assert canonical_form(normalized) == canonical_form(normalize_labels(normalized))
    assert canonical_form(normalized) == "(0.0:(1.0:(),1.1:()),0.1:(1.0:(),1.1:()))"


def test_dot_export(grip14):
    dot = to_dot(tree_from_matrix(grip14))
    assert dot.startswith("digraph staged_tree {")
    assert '"v" -> "v_s0_0" [label="s^0_0"];' in dot
    assert 'xlabel="x2"' in dot
    assert "fillcolor=\"lightblue\"" in dot
    assert dot.rstrip().endswith("}")


def test_tree_report(grip14):
    report = tree_report(tree_from_matrix(grip14))
    assert report.staged and report.stratified and report.balanced
    assert report.levels == 3
    assert report.leaves == 10
    assert len(report.stages) == 3
    assert report.counterexample is None


# ==================== 왕복 검사 ====================

def test_roundtrip_grip14(grip14):
    report = roundtrip(grip14)
    assert report.grip and report.staged and report.stratified and report.balanced
    assert report.regrip and report.isomorphic and report.consistent


def test_roundtrip_on_generated_corpus(tree_corpus):
    for entry in tree_corpus:
        report = roundtrip(entry["mat"])
        assert report.consistent, entry["seed"]
        assert report.grip and report.balanced and report.regrip and report.isomorphic, entry["seed"]
        assert canonical_form(tree_from_matrix(entry["mat"])) == canonical_form(entry["tree"]), entry["seed"]


@pytest.mark.parametrize("n_s,a,b", SWAPPED_CASES)
def test_swapped_near_miss_fails_grip_and_balance(n_s, a, b):
    tree = swapped_floret_tree(n_s, a, b)
    mat = matrix_from_tree(tree)
    assert not grip_check(mat).overall
    assert not grip_check(mat).level(1).well_connected
    assert not is_balanced(tree).balanced


@pytest.mark.parametrize("n_s,a,b", RECOLOURED_CASES)
def test_recoloured_near_miss_fails_grip_and_balance(n_s, a, b):
    tree = recoloured_floret_tree(n_s, a, b)
    report = roundtrip(matrix_from_tree(tree))
    assert report.staged and report.stratified
    assert not report.grip
    assert not report.balanced
    assert report.consistent


@pytest.mark.parametrize("n", [2, 3, 4])
def test_overlapping_florets_are_not_staged(n):
    mat = overlapping_floret_matrix(n)
    report = roundtrip(mat)
    assert not report.staged
    assert not report.grip
    assert report.consistent
    assert not is_staged(StagedTree.from_paths(
        tuple((b, block.selector[j]) for b, block in enumerate(mat.blocks)) for j in range(mat.m)
    ))
