"""
다중 분할 행렬 서비스
행렬/데이터 텍스트 파싱, 검증, 열 라벨링, 단항식 사상을 제공합니다.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from models.partition import ColumnLabeling, MultipartitionMatrix
from models.schemas import ValidationReport, Violation
from services import settings
from services.exceptions import (
    DimensionMismatch,
    EntryNotBinary,
    MatrixParseError,
    MatrixValidationError,
    NonNormalizedData,
    NonPositiveData,
)

logger = logging.getLogger(__name__)

BLOCK_SEPARATOR = "---"
COMMENT_PREFIX = "#"

RawBlocks = List[List[List[int]]]


# ==================== 행렬 텍스트 형식 ====================

def parse_matrix_text(text: str) -> RawBlocks:
    """
    `#` 주석과 `---` 블록 구분자를 가진 0/1 행렬 텍스트를 읽습니다.

    Args:
        text: 행렬 텍스트

    Returns:
        블록별 행 목록 (아직 열 합 검증 전)
    """
    blocks: RawBlocks = [[]]
    width: Optional[int] = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith(COMMENT_PREFIX):
            continue
        if line == BLOCK_SEPARATOR:
            blocks.append([])
            continue
        try:
            row = [int(token) for token in line.split()]
        except ValueError as exc:
            raise MatrixParseError(f"{lineno}번째 줄을 정수 행으로 읽을 수 없습니다: {line!r}") from exc
        if any(entry not in (0, 1) for entry in row):
            raise EntryNotBinary(f"{lineno}번째 줄에 0/1이 아닌 값이 있습니다.")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DimensionMismatch(f"{lineno}번째 줄의 길이 {len(row)}가 {width}와 다릅니다.")
        blocks[-1].append(row)

    if not width:
        raise MatrixParseError("행렬에 행이 없습니다.")
    return blocks


def format_matrix_text(mat: MultipartitionMatrix, header: Optional[str] = None) -> str:
    lines: List[str] = []
    if header:
        lines.extend(f"{COMMENT_PREFIX} {h}" for h in header.splitlines())
    for b, block in enumerate(mat.blocks):
        if b:
            lines.append(BLOCK_SEPARATOR)
        lines.extend(" ".join(str(x) for x in row) for row in block.rows)
    return "\n".join(lines) + "\n"


def validate_blocks(raw: Sequence[Sequence[Sequence[int]]]) -> ValidationReport:
    """열 합과 빈 행을 검사합니다. 비이진 원소와 길이 불일치는 예외로 처리합니다."""
    if not raw or not any(raw):
        raise MatrixParseError("블록이 하나 이상 필요합니다.")
    m: Optional[int] = None
    violations: List[Violation] = []
    for b, block in enumerate(raw):
        for i, row in enumerate(block):
            if any(entry not in (0, 1) for entry in row):
                raise EntryNotBinary(f"블록 {b} 행 {i}에 0/1이 아닌 값이 있습니다.")
            if m is None:
                m = len(row)
            elif len(row) != m:
                raise DimensionMismatch(f"블록 {b} 행 {i}의 길이 {len(row)}가 {m}와 다릅니다.")
    if not m:
        raise MatrixParseError("열이 없는 행렬은 허용되지 않습니다.")

    for b, block in enumerate(raw):
        if not block:
            violations.append(Violation(kind="column_count", block=b, detail="빈 블록"))
            continue
        for j in range(m):
            total = sum(row[j] for row in block)
            if total != 1:
                violations.append(
                    Violation(kind="column_sum", block=b, column=j, detail=f"열 합 {total}")
                )
        for i, row in enumerate(block):
            if not any(row):
                violations.append(Violation(kind="empty_row", block=b, row=i, detail="지지 집합이 비어 있음"))

    report = ValidationReport(ok=not violations, k=len(raw), m=m, violations=violations)
    if violations:
        logger.info("검증 실패: 위반 %d건", len(violations))
    return report


def matrix_from_blocks(raw: Sequence[Sequence[Sequence[int]]]) -> MultipartitionMatrix:
    report = validate_blocks(raw)
    if not report.ok:
        first = report.violations[0]
        raise MatrixValidationError(
            f"다중 분할 행렬이 아닙니다 (블록 {first.block}: {first.detail})", report
        )
    return MultipartitionMatrix.from_blocks(raw)


def parse_matrix(text: str) -> MultipartitionMatrix:
    return matrix_from_blocks(parse_matrix_text(text))


def load_matrix(path: Path | str) -> MultipartitionMatrix:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"행렬 파일을 찾을 수 없습니다: {path}")
    return parse_matrix(path.read_text(encoding="utf-8"))


def save_matrix(mat: MultipartitionMatrix, path: Path | str, header: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_matrix_text(mat, header=header), encoding="utf-8")
    return path


# ==================== 인덱스 ====================

def index_set(mat: MultipartitionMatrix, block: int, i: int) -> List[int]:
    """I^ℓ_i: 블록 block의 행 i가 1인 열들 (오름차순)"""
    if not 0 <= block < mat.k:
        raise IndexError(f"블록 인덱스 {block}가 범위를 벗어났습니다 (0..{mat.k - 1}).")
    return sorted(mat.blocks[block].index_set(i))


def row_selector(mat: MultipartitionMatrix, block: int, j: int) -> int:
    if not 0 <= block < mat.k:
        raise IndexError(f"블록 인덱스 {block}가 범위를 벗어났습니다 (0..{mat.k - 1}).")
    if not 0 <= j < mat.m:
        raise IndexError(f"열 인덱스 {j}가 범위를 벗어났습니다 (0..{mat.m - 1}).")
    return mat.blocks[block].selector[j]


def column_labeling(rows: Sequence[Sequence[int]]) -> ColumnLabeling:
    """첫 등장 순서로 동일 열 클래스를 번호 매깁니다."""
    if not rows:
        raise DimensionMismatch("행이 없는 행렬의 열 라벨링은 정의되지 않습니다.")
    width = len(rows[0])
    classes: Dict[Tuple[int, ...], int] = {}
    labels: List[int] = []
    for j in range(width):
        key = tuple(row[j] for row in rows)
        labels.append(classes.setdefault(key, len(classes)))
    return ColumnLabeling(tuple(labels), len(classes))


def prefix_labeling(mat: MultipartitionMatrix, levels: int) -> ColumnLabeling:
    if not 1 <= levels <= mat.k:
        raise IndexError(f"접두 길이 {levels}가 범위를 벗어났습니다 (1..{mat.k}).")
    return column_labeling(mat.stacked_rows(levels))


def column_weights(mat: MultipartitionMatrix, levels: Optional[int] = None) -> List[int]:
    """c^ℓ_j: A^{1..ℓ}에서 열 j와 같은 열의 개수 (자기 자신 포함)"""
    levels = mat.k if levels is None else levels
    labeling = prefix_labeling(mat, levels)
    sizes = labeling.sizes()
    return [sizes[u] for u in labeling.labels]


def monomial_map(mat: MultipartitionMatrix, t: Sequence[Any]) -> List[Any]:
    """φ_A(t)_j = ∏_ℓ t[offset_ℓ + S(ℓ,j)] (Fraction과 sympy 기호 모두 가능)"""
    if len(t) != mat.n_rows:
        raise DimensionMismatch(f"매개변수 길이 {len(t)}가 전체 행 수 {mat.n_rows}와 다릅니다.")
    return [
        math.prod(t[mat.offsets[b] + block.selector[j]] for b, block in enumerate(mat.blocks))
        for j in range(mat.m)
    ]


def deduplicate(mat: MultipartitionMatrix) -> Tuple[MultipartitionMatrix, ColumnLabeling]:
    """중복 열을 제거한 Ā (첫 등장 순서)와 라벨링"""
    labeling = column_labeling(mat.stacked_rows())
    return mat.restrict(labeling.representatives()), labeling


# ==================== 데이터 벡터 ====================

def parse_data_text(text: str) -> List[Fraction]:
    """한 줄에 하나씩 `num/den` 또는 10진수 (정확히 변환)"""
    values: List[Fraction] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith(COMMENT_PREFIX):
            continue
        for token in line.split():
            try:
                values.append(Fraction(token))
            except (ValueError, ZeroDivisionError) as exc:
                raise MatrixParseError(f"{lineno}번째 줄의 데이터 값을 읽을 수 없습니다: {token!r}") from exc
    if not values:
        raise MatrixParseError("데이터 벡터가 비어 있습니다.")
    return values


def load_data_vector(path: Path | str) -> List[Fraction]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"데이터 파일을 찾을 수 없습니다: {path}")
    return parse_data_text(path.read_text(encoding="utf-8"))


def format_data_text(d: Sequence[Fraction]) -> str:
    return "\n".join(str(Fraction(x)) for x in d) + "\n"


def check_data_vector(d: Sequence[Fraction], m: int, mode: str = "exact") -> List[Fraction]:
    """
    데이터 벡터의 길이, 양수성, 정규화를 확인합니다.

    Args:
        d: 데이터 벡터
        m: 열 수
        mode: exact 이면 합이 정확히 1이어야 하고, float 이면 경고 후 정규화합니다.

    Returns:
        확인된 (필요 시 정규화된) 데이터 벡터
    """
    if len(d) != m:
        raise DimensionMismatch(f"데이터 길이 {len(d)}가 열 수 {m}와 다릅니다.")
    values = [Fraction(x) for x in d]
    if any(x <= 0 for x in values):
        raise NonPositiveData("데이터 성분은 모두 양수여야 합니다.")
    total = sum(values, Fraction(0))
    if total != 1:
        if mode == "exact":
            raise NonNormalizedData(f"데이터 합이 {total}입니다 (1이어야 함).")
        logger.warning("⚠️ 데이터 합 %s를 1로 정규화합니다.", total)
        values = [x / total for x in values]
    return values


def aggregate_data(d: Sequence[Fraction], labeling: ColumnLabeling) -> List[Fraction]:
    """d̄_u = Σ_{λ(j)=u} d_j"""
    if len(d) != len(labeling.labels):
        raise DimensionMismatch(f"데이터 길이 {len(d)}가 열 수 {len(labeling.labels)}와 다릅니다.")
    out = [Fraction(0)] * labeling.beta
    for j, u in enumerate(labeling.labels):
        out[u] += Fraction(d[j])
    return out


def version_header() -> str:
    return settings.VERSION_HEADER
