import argparse
import sys
from pathlib import Path

from models.schemas import GeneratorConfig
from services.grip_service import grip_service
from services.matrix_service import save_matrix
from services.staged_tree_service import is_balanced, matrix_from_tree
from services.tree_generator import generate_balanced_stratified

DEFAULT_OUTPUT_DIR = Path("data/tree_corpus")


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Write generated balanced stratified staged-tree matrices in the matrix text format."
    )
    parser.add_argument(
        "--output-dir",
        type=Path,
        default=DEFAULT_OUTPUT_DIR,
        help="행렬 파일을 저장할 디렉터리.",
    )
    parser.add_argument(
        "--seeds",
        type=int,
        default=200,
        help="시드 1..N 으로 트리를 생성합니다.",
    )
    parser.add_argument(
        "--min-levels",
        type=int,
        default=2,
        help="최소 깊이.",
    )
    parser.add_argument(
        "--max-levels",
        type=int,
        default=4,
        help="최대 깊이.",
    )
    parser.add_argument(
        "--max-branching",
        type=int,
        default=3,
        help="단계당 최대 라벨 수.",
    )
    parser.add_argument(
        "--check",
        action="store_true",
        help="저장 전에 균형 판정과 GRIP 판정을 함께 확인",
    )
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    args.output_dir.mkdir(parents=True, exist_ok=True)
    span = args.max_levels - args.min_levels + 1
    failures = 0

    for seed in range(1, args.seeds + 1):
        config = GeneratorConfig(levels=args.min_levels + seed % span, max_branching=args.max_branching)
        tree = generate_balanced_stratified(seed, config)
        mat = matrix_from_tree(tree)
        if args.check and not (is_balanced(tree).balanced and grip_service.check(mat).overall):
            failures += 1
            print(f"⚠️ seed={seed}: 균형/GRIP 판정 불일치", file=sys.stderr)
        header = f"seed={seed} levels={config.levels} max_branching={config.max_branching}"
        save_matrix(mat, args.output_dir / f"tree_{seed:03d}.txt", header=header)

    print(f"Corpus complete. Matrices: {args.seeds} | Failures: {failures} | Dir -> {args.output_dir}")
    if failures:
        sys.exit(2)


if __name__ == "__main__":
    try:
        main()
    except Exception as err:
        print(f"[ERROR] {err}", file=sys.stderr)
        sys.exit(1)
