"""
partition-mle - 분할 모형 정확 산술 도구
명령행 진입점: 행렬 검증, GRIP 판정, 닫힌 형식 MLE, IPS, 반복 실험, 단계 트리, 계층 모형, TFP
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, TextIO

from pydantic import BaseModel

# 로컬 모듈 임포트
from models.schemas import ExperimentConfig, IpsConfig
from services import settings
from services.exceptions import MatrixValidationError, PartitionModelError
from services.experiment_service import experiment_service
from services.grip_service import grip_service
from services.hierarchical_service import (
    format_complex_text,
    is_decomposable,
    load_complex,
    matrix_from_complex,
    rip_check,
    rip_order_search,
)
from services.ips_service import ips_service
from services.matrix_service import (
    load_data_vector,
    load_matrix,
    parse_matrix_text,
    save_matrix,
    validate_blocks,
)
from services.mle_service import closed_form_mle, verify_mle
from services.staged_tree_service import roundtrip, to_dot, tree_from_matrix, tree_report
from services.tfp_service import generator_report

logger = logging.getLogger(__name__)


# ==================== 출력 ====================

def _jsonable(payload: Any) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    if isinstance(payload, dict):
        return {key: _jsonable(value) for key, value in payload.items()}
    if isinstance(payload, list):
        return [_jsonable(value) for value in payload]
    return payload


def emit(payload: Any, fmt: str, out: Optional[TextIO] = None) -> None:
    """JSON (키 정렬, 들여쓰기 2) 또는 버전 머리줄이 붙은 key: value 텍스트"""
    out = out or sys.stdout
    data = _jsonable(payload)
    if fmt == "json":
        out.write(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
        return
    out.write(settings.VERSION_HEADER + "\n")
    if not isinstance(data, dict):
        out.write(json.dumps(data, sort_keys=True, ensure_ascii=False) + "\n")
        return
    for key in sorted(data):
        value = data[key]
        text = value if isinstance(value, str) else json.dumps(value, sort_keys=True, ensure_ascii=False)
        out.write(f"{key}: {text}\n")


def status(message: str) -> None:
    print(message, file=sys.stderr)


# ==================== 하위 명령 ====================

def cmd_validate(args: argparse.Namespace) -> int:
    raw = parse_matrix_text(Path(args.file).read_text(encoding="utf-8"))
    report = validate_blocks(raw)
    emit(report, args.format)
    status("✅ 유효한 다중 분할 행렬입니다." if report.ok else f"❌ 위반 {len(report.violations)}건")
    return 0 if report.ok else 1


def cmd_grip(args: argparse.Namespace) -> int:
    report = grip_service.check(load_matrix(args.file))
    emit(report, args.format)
    status("✅ GRIP 성립" if report.overall else "❌ GRIP 불성립")
    return 0 if report.overall else 2


def cmd_mle(args: argparse.Namespace) -> int:
    mat = load_matrix(args.file)
    d = load_data_vector(args.data)
    report = grip_service.check(mat)
    if not report.overall:
        failing = [lv.model_dump(mode="json") for lv in report.levels if lv.counterexample]
        status(f"❌ GRIP 불성립: {json.dumps(failing, ensure_ascii=False)}")
    result = closed_form_mle(mat, d, report, explain=args.explain)
    verdict = verify_mle(mat, result.p_star, d)
    emit(result, args.format)
    if not verdict.certified:
        status(f"❌ MLE 검증 실패: birch={verdict.birch_ok} model={verdict.model_ok}")
        return 2
    status("✅ Birch 조건과 모형 관계 확인")
    return 0


def cmd_ips(args: argparse.Namespace) -> int:
    mat = load_matrix(args.file)
    d = load_data_vector(args.data)
    config = IpsConfig(
        mode=args.mode,
        max_cycles=args.max_cycles,
        float_tolerance=args.tol,
        record_history=args.history,
    )
    result = ips_service.run(mat, d, config)
    emit(result, args.format)
    status(f"{'✅' if result.converged else '⚠️'} steps_taken={result.steps_taken}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    mat = load_matrix(args.file)
    config = ExperimentConfig(
        trials=args.trials,
        tolerance=args.tol,
        seed=args.seed,
        max_cycles=args.max_cycles,
        workers=args.workers,
    )
    df = experiment_service.run(mat, config)
    summary = experiment_service.summarize(df)
    if args.csv:
        experiment_service.write_csv(df, args.csv)
        print(summary.summary_line())
        status(f"📥 CSV 저장: {args.csv}")
    else:
        experiment_service.write_csv(df, sys.stdout)
        status(summary.summary_line())
    return 0


def cmd_tree(args: argparse.Namespace) -> int:
    tree = tree_from_matrix(load_matrix(args.file))
    if args.dot:
        Path(args.dot).write_text(to_dot(tree), encoding="utf-8")
        status(f"📥 DOT 저장: {args.dot}")
    report = tree_report(tree)
    emit(report, args.format)
    return 0


def _parse_order(text: Optional[str]) -> Optional[List[int]]:
    """1부터 시작하는 쉼표 구분 순서를 0-based 목록으로 바꿉니다."""
    if text is None:
        return None
    try:
        return [int(tok) - 1 for tok in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"잘못된 패싯 순서: {text}") from exc


def cmd_hier(args: argparse.Namespace) -> int:
    cx = load_complex(args.file)
    order = _parse_order(args.order)
    payload: Dict[str, Any] = {"rip": rip_check(cx, order)}
    if args.find_rip:
        found = rip_order_search(cx)
        payload["found_order"] = found if found is not None else "NoRipOrder"
        payload["decomposable"] = is_decomposable(cx)
        if found is not None:
            order = found
    if args.emit_matrix:
        mat = matrix_from_complex(cx, order)
        header = f"partition-mle v{settings.VERSION}\nfacets:\n{format_complex_text(cx).strip()}"
        save_matrix(mat, args.emit_matrix, header=header)
        status(f"📥 A_Γ 저장: {args.emit_matrix} ({mat.n_rows}×{mat.m})")
    emit(payload, args.format)
    return 0


def cmd_tfp(args: argparse.Namespace) -> int:
    report = generator_report(load_matrix(args.file), args.level, with_generators=args.generators)
    emit(report, args.format)
    status("✅ TFP 동치 확인" if report.overall else "❌ TFP 동치 실패")
    return 0 if report.overall else 2


def cmd_roundtrip(args: argparse.Namespace) -> int:
    report = roundtrip(load_matrix(args.file))
    emit(report, args.format)
    status("✅ 왕복 검사 일치" if report.consistent else "❌ 왕복 검사 불일치")
    return 0 if report.consistent else 2


# ==================== 인자 파서 ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partition-mle", description="분할 모형 정확 산술 도구")
    parser.add_argument("--format", choices=["json", "text"], default="json", help="출력 형식")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="로그 레벨 (기본: 환경설정)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="행렬 파일 검증")
    p.add_argument("file", type=Path)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("grip", help="GRIP 판정 보고서")
    p.add_argument("file", type=Path)
    p.set_defaults(handler=cmd_grip)

    p = sub.add_parser("mle", help="닫힌 형식 MLE")
    p.add_argument("file", type=Path)
    p.add_argument("--data", type=Path, required=True, help="데이터 벡터 파일")
    p.add_argument("--explain", action="store_true", help="열별 인자 내역 포함")
    p.set_defaults(handler=cmd_mle)

    p = sub.add_parser("ips", help="반복 비례 조정 실행")
    p.add_argument("file", type=Path)
    p.add_argument("--data", type=Path, required=True, help="데이터 벡터 파일")
    p.add_argument("--mode", choices=["exact", "float"], default="exact")
    p.add_argument("--tol", type=float, default=settings.DEFAULT_FLOAT_TOLERANCE, help="float 모드 허용 오차")
    p.add_argument("--max-cycles", type=int, default=None, help="최대 사이클 수")
    p.add_argument("--history", action="store_true", help="단계별 변화량/KL 기록")
    p.set_defaults(handler=cmd_ips)

    p = sub.add_parser("experiment", help="무작위 데이터 IPS 단계 수 실험")
    p.add_argument("file", type=Path)
    p.add_argument("--trials", type=int, default=settings.DEFAULT_TRIALS)
    p.add_argument("--tol", type=float, default=settings.DEFAULT_FLOAT_TOLERANCE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-cycles", type=int, default=settings.DEFAULT_FLOAT_MAX_CYCLES)
    p.add_argument("--workers", type=int, default=settings.EXPERIMENT_WORKERS)
    p.add_argument("--csv", type=Path, default=None, help="CSV 출력 경로 (기본: 표준 출력)")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("tree", help="단계 트리 판정과 DOT 내보내기")
    p.add_argument("file", type=Path)
    p.add_argument("--dot", type=Path, default=None, help="DOT 출력 경로")
    p.set_defaults(handler=cmd_tree)

    p = sub.add_parser("hier", help="계층 모형 RIP 검사")
    p.add_argument("file", type=Path, help="단체 복합체 파일")
    p.add_argument("--order", default=None, help="1부터 시작하는 패싯 순서 (예: 2,1,3)")
    p.add_argument("--find-rip", action="store_true", help="RIP 순서 탐색")
    p.add_argument("--emit-matrix", type=Path, default=None, help="A_Γ 출력 경로")
    p.set_defaults(handler=cmd_hier)

    p = sub.add_parser("tfp", help="토릭 섬유곱 동치 검증")
    p.add_argument("file", type=Path)
    p.add_argument("--level", type=int, required=True, help="접두 길이 ℓ (1..k-1)")
    p.add_argument("--generators", action="store_true", help="Quad/Lift 생성 이항식 출력")
    p.set_defaults(handler=cmd_tfp)

    p = sub.add_parser("roundtrip", help="GRIP ⇔ 균형·층화 트리 왕복 검사")
    p.add_argument("file", type=Path)
    p.set_defaults(handler=cmd_roundtrip)
    return parser


# ==================== 실행 ====================

def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 1

    logging.basicConfig(level=str(args.log_level).upper(), format="%(levelname)s %(name)s: %(message)s")
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except MatrixValidationError as exc:
        if exc.report is not None:
            emit(exc.report, args.format)
        status(f"❌ {exc}")
        return exc.exit_code
    except PartitionModelError as exc:
        status(f"❌ {exc}")
        return exc.exit_code
    except (OSError, argparse.ArgumentTypeError) as exc:
        status(f"[ERROR] {exc}")
        return 1
    except Exception as exc:
        logger.exception("예상하지 못한 오류")
        status(f"[ERROR] {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
