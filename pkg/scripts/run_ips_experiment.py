import argparse
import sys
from pathlib import Path

from models.schemas import ExperimentConfig
from services import settings
from services.experiment_service import experiment_service
from services.matrix_service import load_matrix

DEFAULT_MATRIX = Path("data/diffrep_A.txt")
DEFAULT_OUTPUT = Path("data/diffrep_A_steps.csv")


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Measure IPS step counts on random Dirichlet data for one matrix representation."
    )
    parser.add_argument(
        "--matrix",
        type=Path,
        default=DEFAULT_MATRIX,
        help="다중 분할 행렬 파일 경로.",
    )
    parser.add_argument(
        "--output",
        type=Path,
        default=DEFAULT_OUTPUT,
        help="trial, steps, final_birch_residual CSV 저장 경로.",
    )
    parser.add_argument(
        "--trials",
        type=int,
        default=settings.DEFAULT_TRIALS,
        help="무작위 데이터 벡터 개수.",
    )
    parser.add_argument(
        "--tol",
        type=float,
        default=settings.DEFAULT_FLOAT_TOLERANCE,
        help="조용한 단계의 최대 변화량 기준.",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=0,
        help="시행별 시드 (seed, trial) 의 seed.",
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=settings.EXPERIMENT_WORKERS,
        help="청크 병렬 실행 스레드 수.",
    )
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    mat = load_matrix(args.matrix)
    config = ExperimentConfig(trials=args.trials, tolerance=args.tol, seed=args.seed, workers=args.workers)

    print(f"총 {config.trials}개 시행 실행 중... ({args.matrix}, k={mat.k}, m={mat.m})", file=sys.stderr)
    df = experiment_service.run(mat, config)
    summary = experiment_service.summarize(df)

    args.output.parent.mkdir(parents=True, exist_ok=True)
    experiment_service.write_csv(df, args.output)
    print(summary.summary_line())
    print(
        f"Experiment complete. Converged: {summary.converged}/{summary.trials} | CSV -> {args.output}",
        file=sys.stderr,
    )


if __name__ == "__main__":
    try:
        main()
    except Exception as err:
        print(f"[ERROR] {err}", file=sys.stderr)
        sys.exit(1)
