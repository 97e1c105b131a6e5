"""명령행 진입점 테스트 (main.main 을 같은 프로세스에서 호출)"""

import json

import pytest

import main
from models.schemas import MleVerdict
from services import settings
from services.matrix_service import format_matrix_text, load_matrix
from services.tree_generator import overlapping_floret_matrix
from tests.conftest import DATA_DIR


def run(capsys, *argv):
    code = main.main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out) if out.strip() else None, err


# ==================== validate / grip ====================

def test_validate_ok(capsys):
    code, payload, _ = run_json(capsys, "validate", DATA_DIR / "grip14.txt")
    assert code == 0
    assert payload == {"k": 3, "m": 14, "ok": True, "violations": []}


def test_validate_reports_column_sum(capsys):
    code, payload, err = run_json(capsys, "validate", DATA_DIR / "bad_column_sum.txt")
    assert code == 1
    assert payload["violations"][0]["kind"] == "column_sum"
    assert payload["violations"][0]["column"] == 2
    assert "위반" in err


def test_grip_exit_codes(capsys):
    code, payload, _ = run_json(capsys, "grip", DATA_DIR / "grip14.txt")
    assert code == 0
    assert payload["overall"] is True
    assert payload["connection_ratios"][2] == ["1/3", "1/3", "1/3", "1/2", "1/2"]
    level = payload["levels"][0]
    assert {"well_connected", "floret_condition", "rowspan", "counterexample", "connection_ratios"} <= set(level)
    assert level["rowspan"] is True
    code, payload, _ = run_json(capsys, "grip", DATA_DIR / "diffrep_A.txt")
    assert code == 2
    assert payload["overall"] is False


def test_text_format_header(capsys):
    code, out, _ = run(capsys, "--format", "text", "grip", DATA_DIR / "twobytwo.txt")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == settings.VERSION_HEADER
    assert "overall: true" in lines


# ==================== mle / ips / experiment ====================

def test_mle_grip14(capsys):
    code, payload, _ = run_json(capsys, "mle", DATA_DIR / "grip14.txt", "--data", DATA_DIR / "grip14_d.txt")
    assert code == 0
    assert payload["p_star"][0] == "4/175"
    assert payload["factors"] is None


def test_mle_explain(capsys):
    code, payload, _ = run_json(
        capsys, "mle", DATA_DIR / "grip14.txt", "--data", DATA_DIR / "grip14_d.txt", "--explain"
    )
    assert code == 0
    assert payload["factors"][0][0]["ratio"] == "4/15"


def test_mle_verification_failure_exits_nonzero(capsys, monkeypatch):
    monkeypatch.setattr(main, "verify_mle", lambda *args: MleVerdict(birch_ok=False, model_ok=True))
    code, payload, err = run_json(capsys, "mle", DATA_DIR / "grip14.txt", "--data", DATA_DIR / "grip14_d.txt")
    assert code == 2
    assert payload["p_star"][0] == "4/175"
    assert "birch=False" in err


def test_mle_without_grip(capsys):
    code, out, err = run(capsys, "mle", DATA_DIR / "diffrep_A.txt", "--data", DATA_DIR / "diffrep_d.txt")
    assert code == 2
    assert out == ""
    assert "GRIP" in err


def test_ips_exact(capsys):
    code, payload, _ = run_json(capsys, "ips", DATA_DIR / "twobytwo.txt", "--data", DATA_DIR / "twobytwo_d.txt")
    assert code == 0
    assert payload["steps_taken"] == 2
    assert payload["final"] == ["3/25", "9/50", "7/25", "21/50"]
    assert payload["one_cycle_exact"] is True


def test_ips_rejects_wrong_data_length(capsys):
    code, _, err = run(capsys, "ips", DATA_DIR / "twobytwo.txt", "--data", DATA_DIR / "diffrep_d.txt")
    assert code == 1
    assert "❌" in err


def test_experiment_csv_to_stdout(capsys):
    code, out, err = run(capsys, "experiment", DATA_DIR / "diffrep_A_tilde.txt", "--trials", 4)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "trial,steps,final_birch_residual"
    assert len(lines) == 5
    assert "mean=1.00 min=1 max=1" in err


def test_experiment_csv_to_file(capsys, tmp_path):
    target = tmp_path / "steps.csv"
    code, out, _ = run(capsys, "experiment", DATA_DIR / "diffrep_A_tilde.txt", "--trials", 3, "--csv", target)
    assert code == 0
    assert out.strip() == "mean=1.00 min=1 max=1"
    assert target.read_text(encoding="utf-8").startswith("trial,steps")


# ==================== tree / hier / tfp / roundtrip ====================

def test_tree_with_dot(capsys, tmp_path):
    dot = tmp_path / "tree.dot"
    code, payload, _ = run_json(capsys, "tree", DATA_DIR / "grip14.txt", "--dot", dot)
    assert code == 0
    assert payload["leaves"] == 10
    assert payload["balanced"] is True
    assert dot.read_text(encoding="utf-8").startswith("digraph")


def test_tree_not_staged(capsys, tmp_path):
    path = tmp_path / "overlap.txt"
    path.write_text(format_matrix_text(overlapping_floret_matrix(2)), encoding="utf-8")
    code, out, _ = run(capsys, "tree", path)
    assert code == 2
    assert out == ""


def test_hier_find_rip_on_triangle(capsys):
    code, payload, _ = run_json(capsys, "hier", DATA_DIR / "complex_12_13_23.txt", "--find-rip")
    assert code == 0
    assert payload["found_order"] == "NoRipOrder"
    assert payload["decomposable"] is False
    assert payload["rip"]["failing_position"] == 2


def test_hier_order_is_one_based_and_emits_matrix(capsys, tmp_path):
    target = tmp_path / "chain.txt"
    code, payload, _ = run_json(
        capsys, "hier", DATA_DIR / "complex_123_345.txt", "--order", "2,1", "--emit-matrix", target
    )
    assert code == 0
    assert payload["rip"] == {"failing_position": None, "intersection": None, "order": [1, 0], "rip": True}
    text = target.read_text(encoding="utf-8")
    assert text.startswith(f"# partition-mle v{settings.VERSION}\n# facets:\n")
    mat = load_matrix(target)
    assert mat.m == 32
    assert mat.blocks[0].selector[:2] == (0, 1)


@pytest.mark.parametrize("order", ["1,1", "1,x"])
def test_hier_bad_order(capsys, order):
    code, _, _ = run(capsys, "hier", DATA_DIR / "complex_123_345.txt", "--order", order)
    assert code == 1


def test_tfp_with_generators(capsys):
    code, payload, _ = run_json(capsys, "tfp", DATA_DIR / "grip14.txt", "--level", 2, "--generators")
    assert code == 0
    assert payload["overall"] is True
    assert len(payload["quads"]) == 9
    assert payload["levels"][0]["variables"] == 14


def test_tfp_requires_grip(capsys):
    code, _, _ = run(capsys, "tfp", DATA_DIR / "diffrep_A.txt", "--level", 1)
    assert code == 2


def test_roundtrip(capsys):
    code, payload, _ = run_json(capsys, "roundtrip", DATA_DIR / "grip14.txt")
    assert code == 0
    assert payload["consistent"] is True
    assert payload["isomorphic"] is True


# ==================== 인자 오류 ====================

def test_unknown_flag_and_help(capsys):
    assert main.main(["grip", str(DATA_DIR / "grip14.txt"), "--bogus"]) == 1
    assert main.main(["--help"]) == 0
    capsys.readouterr()


def test_missing_file(capsys):
    code, _, err = run(capsys, "grip", DATA_DIR / "no_such_matrix.txt")
    assert code == 1
    assert "[ERROR]" in err
