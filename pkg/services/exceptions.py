"""
예외 정의
행렬 검증, 전제 조건 위반, 자원 한도 초과를 구분하는 예외 계층입니다.
"""

from __future__ import annotations

from typing import Any, Optional


class PartitionModelError(Exception):
    """모든 도메인 예외의 기반 클래스 (CLI 종료 코드 1)"""

    exit_code = 1


class PreconditionError(PartitionModelError):
    """연산의 전제 조건이 충족되지 않음 (종료 코드 2)"""

    exit_code = 2


class ResourceLimitError(PartitionModelError):
    """탐색/열거 한도 초과 (종료 코드 3)"""

    exit_code = 3


# ==================== 입력 오류 ====================

class MatrixParseError(PartitionModelError):
    pass


class EntryNotBinary(PartitionModelError):
    pass


class DimensionMismatch(PartitionModelError):
    pass


class MatrixValidationError(PartitionModelError):
    """검증 보고서를 함께 전달합니다."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class NonNormalizedData(PartitionModelError):
    pass


class NonPositiveData(PartitionModelError):
    pass


class InvalidFacetOrder(PartitionModelError):
    pass


class ComplexFormatError(PartitionModelError):
    pass


# ==================== 전제 조건 위반 ====================

class GripRequired(PreconditionError):
    pass


class FloretsUndefined(PreconditionError):
    pass


class RankOneViolation(PreconditionError):
    pass


class CountExceedsMultiplicity(PreconditionError):
    pass


class IndexingUndefined(PreconditionError):
    pass


class NotStratified(PreconditionError):
    pass


class NotMultihomogeneous(PreconditionError):
    pass


class LiftNotInKernel(PreconditionError):
    pass


class ZeroMarginal(PreconditionError):
    pass


class NotStaged(PreconditionError):
    """플로렛이 겹치지만 같지 않은 두 정점을 증거로 담습니다."""

    def __init__(self, message: str, witness: Optional[tuple] = None):
        super().__init__(message)
        self.witness = witness


class MaxCyclesExceeded(PreconditionError):
    """최대 사이클 도달 시 마지막 상태를 담습니다."""

    def __init__(self, message: str, state: Any = None):
        super().__init__(message)
        self.state = state


# ==================== 자원 한도 ====================

class FacetCountTooLarge(ResourceLimitError):
    pass


class GeneratorCapExceeded(ResourceLimitError):
    pass
