"""
Pydantic 스키마 정의
검증/분석 보고서와 실행 설정을 직렬화 가능한 스키마로 정의합니다.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Annotated, Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator, field_serializer

from services import settings


def _to_fraction(value: Any) -> Fraction:
    """정수, Fraction, "num/den" 문자열만 허용합니다. float는 거부."""
    if isinstance(value, float):
        raise ValueError("유리수 필드에는 float를 쓸 수 없습니다.")
    if isinstance(value, (Fraction, int, str)):
        return Fraction(value)
    raise ValueError(f"유리수로 변환할 수 없는 값: {value!r}")


def format_scalar(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, list):
        return [format_scalar(v) for v in value]
    return value


Rational = Annotated[Fraction, PlainValidator(_to_fraction), PlainSerializer(str, return_type=str)]


class ReportModel(BaseModel):
    """보고서 공통 설정"""

    model_config = ConfigDict(frozen=True)


# ==================== 검증 ====================

class Violation(ReportModel):
    kind: Literal["column_sum", "empty_row", "column_count"]
    block: int
    column: Optional[int] = None
    row: Optional[int] = None
    detail: str


class ValidationReport(ReportModel):
    """행렬 검증 결과"""
    ok: bool
    k: int
    m: int
    violations: List[Violation] = []


# ==================== GRIP ====================

class LevelReport(ReportModel):
    """GRIP 한 단계 (⋓A^1..A^ℓ, A^{ℓ+1}) 의 판정"""
    level: int = Field(..., ge=1, description="접두 길이 ℓ")
    well_connected: bool
    floret_condition: bool
    rowspan: bool
    counterexample: Optional[Dict[str, Any]] = None
    florets_b: Optional[List[List[int]]] = None
    florets_c: Optional[List[List[int]]] = None
    connection_ratios: List[Optional[Rational]] = []
    rowspan_certificate: Optional[List[List[Rational]]] = None


class GripReport(ReportModel):
    """GRIP 전체 판정"""
    overall: bool
    k: int
    m: int
    well_connected: bool
    connection_ratios: List[List[Optional[Rational]]]
    levels: List[LevelReport] = []
    level_one_florets: Dict[str, List[List[int]]] = {}

    def level(self, ell: int) -> LevelReport:
        return self.levels[ell - 1]


# ==================== IPS ====================

class IpsConfig(ReportModel):
    mode: Literal["exact", "float"] = "exact"
    max_cycles: Optional[int] = Field(None, ge=1)
    float_tolerance: float = Field(settings.DEFAULT_FLOAT_TOLERANCE, gt=0)
    record_history: bool = False
    raise_on_max_cycles: bool = False

    def cycle_cap(self) -> int:
        if self.max_cycles is not None:
            return self.max_cycles
        if self.mode == "exact":
            return settings.DEFAULT_EXACT_MAX_CYCLES
        return settings.DEFAULT_FLOAT_MAX_CYCLES


class IpsHistoryEntry(ReportModel):
    step: int
    block: int
    delta: float
    kl: Optional[float] = None
    log_likelihood: Optional[float] = None
    log_likelihood: Optional[float] = None


class IpsResult(ReportModel):
    """IPS 실행 결과 (exact 모드는 Fraction, float 모드는 float)"""
    mode: Literal["exact", "float"]
    final: List[Any]
    steps_taken: int
    cycles_taken: Rational
    converged: bool
    birch_residual: Any
    one_cycle_exact: Optional[bool] = None
    history: List[IpsHistoryEntry] = []

    @field_serializer("final", "birch_residual")
    def _serialize_scalars(self, value: Any) -> Any:
        return format_scalar(value)


# ==================== 반복 실험 ====================

class ExperimentConfig(ReportModel):
    trials: int = Field(settings.DEFAULT_TRIALS, ge=1)
    tolerance: float = Field(settings.DEFAULT_FLOAT_TOLERANCE, gt=0)
    seed: int = Field(0, ge=0)
    sampler: Literal["dirichlet"] = "dirichlet"
    max_cycles: int = Field(settings.DEFAULT_FLOAT_MAX_CYCLES, ge=1)
    workers: int = Field(settings.EXPERIMENT_WORKERS, ge=1)
    chunk_size: int = Field(settings.EXPERIMENT_CHUNK_SIZE, ge=1)


class ExperimentSummary(ReportModel):
    trials: int
    mean: float
    min: int
    max: int
    converged: int
    histogram: Dict[int, int]

    def summary_line(self) -> str:
        return f"mean={self.mean:.2f} min={self.min} max={self.max}"


# ==================== MLE ====================

class ColumnFactor(ReportModel):
    """열 j의 한 블록 인자 α^ℓ_{S(ℓ,j)}(d) / Σ_floret α(d)"""
    block: int
    row: int
    numerator: Rational
    denominator: Rational
    ratio: Rational


class MleResult(ReportModel):
    p_star: List[Rational]
    column_weights: List[int]
    factors: Optional[List[List[ColumnFactor]]] = None


class MleVerdict(ReportModel):
    birch_ok: bool
    model_ok: bool

    @property
    def certified(self) -> bool:
        return self.birch_ok and self.model_ok


# ==================== 단계 트리 / 계층 모형 / TFP ====================

class GeneratorConfig(ReportModel):
    levels: int = Field(3, ge=1)
    max_branching: int = Field(3, ge=2)
    stage_merge_prob: float = Field(0.5, ge=0.0, le=1.0)


class BalanceVerdict(ReportModel):
    balanced: bool
    counterexample: Optional[Dict[str, Any]] = None


class TreeReport(ReportModel):
    staged: bool
    stratified: bool
    balanced: bool
    levels: int
    leaves: int
    stages: List[List[str]] = []
    counterexample: Optional[Dict[str, Any]] = None


class RipVerdict(ReportModel):
    rip: bool
    order: List[int]
    failing_position: Optional[int] = None
    intersection: Optional[List[int]] = None


class BinomialModel(ReportModel):
    """지수 벡터 쌍으로 표현한 이항식 (키 = z 변수 이름)"""
    positive: Dict[str, int]
    negative: Dict[str, int]


class TfpLevelReport(ReportModel):
    level: int
    florets: int
    variables: int
    multigraded: bool
    grading_independent: bool
    rowspan_equal: bool
    ok: bool
    detail: Optional[str] = None


class TfpReport(ReportModel):
    overall: bool
    levels: List[TfpLevelReport] = []
    quads: Optional[List[BinomialModel]] = None
    lifts: Optional[List[BinomialModel]] = None


class RoundtripReport(ReportModel):
    grip: bool
    staged: bool
    stratified: bool
    balanced: bool
    regrip: bool
    isomorphic: bool
    consistent: bool
    detail: Optional[str] = None
