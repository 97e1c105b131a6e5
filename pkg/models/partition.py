"""
분할 행렬 도메인 타입
0/1 분할 블록, 다중 분할 행렬, 열 라벨링을 불변 객체로 정의합니다.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, List, Sequence, Tuple

from services.exceptions import DimensionMismatch, EntryNotBinary, MatrixValidationError

Row = Tuple[int, ...]


@dataclass(frozen=True)
class PartitionMatrix:
    """열 합이 모두 1인 0/1 블록 (A^ℓ)"""

    rows: Tuple[Row, ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise MatrixValidationError("분할 블록에 행이 없습니다.")
        width = len(self.rows[0])
        if width == 0:
            raise MatrixValidationError("열이 없는 블록은 허용되지 않습니다.")
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DimensionMismatch(f"행 {i}의 길이 {len(row)}가 {width}와 다릅니다.")
            if any(entry not in (0, 1) for entry in row):
                raise EntryNotBinary(f"행 {i}에 0/1이 아닌 값이 있습니다.")
        for j in range(width):
            total = sum(row[j] for row in self.rows)
            if total != 1:
                raise MatrixValidationError(f"열 {j}의 합이 {total}입니다 (1이어야 함).")
        for i, row in enumerate(self.rows):
            if not any(row):
                raise MatrixValidationError(f"행 {i}의 지지 집합이 비어 있습니다.")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "PartitionMatrix":
        return cls(tuple(tuple(int(x) for x in row) for row in rows))

    @classmethod
    def from_selector(cls, selector: Sequence[int], n_rows: int) -> "PartitionMatrix":
        """열 j가 행 selector[j]에 속하도록 블록을 만듭니다."""
        rows = [[0] * len(selector) for _ in range(n_rows)]
        for j, i in enumerate(selector):
            rows[i][j] = 1
        return cls.from_rows(rows)

    @classmethod
    def identity(cls, m: int) -> "PartitionMatrix":
        return cls.from_selector(list(range(m)), m)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.rows[0])

    @cached_property
    def selector(self) -> Tuple[int, ...]:
        """각 열 j에 대해 1을 가진 유일한 행 S(j)"""
        out = [0] * self.n_cols
        for i, row in enumerate(self.rows):
            for j, entry in enumerate(row):
                if entry:
                    out[j] = i
        return tuple(out)

    def index_set(self, i: int) -> FrozenSet[int]:
        if not 0 <= i < self.n_rows:
            raise IndexError(f"행 인덱스 {i}가 범위를 벗어났습니다 (0..{self.n_rows - 1}).")
        return frozenset(j for j, entry in enumerate(self.rows[i]) if entry)

    def restrict(self, columns: Sequence[int]) -> "PartitionMatrix":
        """주어진 열만 남긴 블록 (중복 허용, 빈 행 제거 없음)"""
        return PartitionMatrix(tuple(tuple(row[j] for j in columns) for row in self.rows))


@dataclass(frozen=True)
class MultipartitionMatrix:
    """같은 열 집합 위에 쌓인 분할 블록들 A^{1..k}"""

    blocks: Tuple[PartitionMatrix, ...]

    def __post_init__(self) -> None:
        if not self.blocks:
            raise MatrixValidationError("블록이 하나 이상 필요합니다.")
        m = self.blocks[0].n_cols
        for b, block in enumerate(self.blocks):
            if block.n_cols != m:
                raise DimensionMismatch(f"블록 {b}의 열 수 {block.n_cols}가 {m}와 다릅니다.")

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[Sequence[int]]]) -> "MultipartitionMatrix":
        return cls(tuple(PartitionMatrix.from_rows(rows) for rows in blocks))

    @classmethod
    def from_selectors(cls, selectors: Sequence[Sequence[int]]) -> "MultipartitionMatrix":
        return cls(
            tuple(PartitionMatrix.from_selector(sel, max(sel) + 1) for sel in selectors)
        )

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def m(self) -> int:
        return self.blocks[0].n_cols

    @property
    def n_rows(self) -> int:
        return sum(block.n_rows for block in self.blocks)

    @cached_property
    def offsets(self) -> Tuple[int, ...]:
        """쌓인 행렬에서 각 블록의 첫 행 위치"""
        out, acc = [], 0
        for block in self.blocks:
            out.append(acc)
            acc += block.n_rows
        return tuple(out)

    def column_signature(self, j: int, levels: int | None = None) -> Tuple[int, ...]:
        """앞쪽 levels개 블록에서 열 j가 선택하는 행 번호들"""
        levels = self.k if levels is None else levels
        return tuple(self.blocks[b].selector[j] for b in range(levels))

    def signatures(self, levels: int | None = None) -> List[Tuple[int, ...]]:
        return [self.column_signature(j, levels) for j in range(self.m)]

    def stacked_rows(self, levels: int | None = None) -> List[Row]:
        levels = self.k if levels is None else levels
        return [row for block in self.blocks[:levels] for row in block.rows]

    def prefix(self, levels: int) -> "MultipartitionMatrix":
        if not 1 <= levels <= self.k:
            raise IndexError(f"접두 길이 {levels}가 범위를 벗어났습니다 (1..{self.k}).")
        return MultipartitionMatrix(self.blocks[:levels])

    def restrict(self, columns: Sequence[int]) -> "MultipartitionMatrix":
        return MultipartitionMatrix(tuple(block.restrict(columns) for block in self.blocks))

    def as_lists(self) -> List[List[List[int]]]:
        return [[list(row) for row in block.rows] for block in self.blocks]


@dataclass(frozen=True)
class ColumnLabeling:
    """동일한 열끼리 같은 클래스 번호를 갖는 라벨링 (λ, β)"""

    labels: Tuple[int, ...]
    beta: int

    def classes(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in range(self.beta)]
        for j, u in enumerate(self.labels):
            out[u].append(j)
        return out

    def representatives(self) -> List[int]:
        return [members[0] for members in self.classes()]

    def sizes(self) -> Dict[int, int]:
        return {u: len(members) for u, members in enumerate(self.classes())}
