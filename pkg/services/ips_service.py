"""
IPS (반복 비례 조정) 서비스
블록별 정보 사영 단계, 주기 반복, 수렴 판정, Birch 잔차, KL 발산을 계산합니다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.partition import MultipartitionMatrix
from models.schemas import IpsConfig, IpsHistoryEntry, IpsResult
from services.exceptions import DimensionMismatch, MaxCyclesExceeded, ZeroMarginal
from services.matrix_service import check_data_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IpsState:
    """IPS 진행 상태 (exact: Fraction 튜플, float: numpy 배열)"""

    p: Any
    step_count: int = 0
    mode: str = "exact"
    history: Tuple[IpsHistoryEntry, ...] = field(default_factory=tuple)

    def as_list(self) -> List[Any]:
        if self.mode == "float":
            return [float(x) for x in self.p]
        return list(self.p)


# ==================== 공통 계산 ====================

def block_marginals(mat: MultipartitionMatrix, block: int, v: Sequence[Any]) -> List[Any]:
    """A^ℓ v"""
    part = mat.blocks[block]
    zero = Fraction(0) if not isinstance(v, np.ndarray) else 0.0
    out = [zero] * part.n_rows
    for j, i in enumerate(part.selector):
        out[i] += v[j]
    return out


def birch_residual(mat: MultipartitionMatrix, p: Sequence[Any], d: Sequence[Any]) -> Any:
    """max_row |α·p − α·d| (Fraction 입력이면 정확한 값)"""
    if len(p) != len(d) or len(p) != mat.m:
        raise DimensionMismatch(f"벡터 길이가 열 수 {mat.m}와 맞지 않습니다.")
    if isinstance(p, np.ndarray) or any(isinstance(x, float) for x in list(p) + list(d)):
        diff = np.asarray(p, dtype=float) - np.asarray(d, dtype=float)
        return float(max(np.max(np.abs(np.bincount(np.asarray(block.selector), weights=diff)))
                         for block in mat.blocks))
    diff = [Fraction(a) - Fraction(b) for a, b in zip(p, d)]
    return max(
        abs(x) for b in range(mat.k) for x in block_marginals(mat, b, diff)
    )


def kl_divergence(q: Sequence[Any], p: Sequence[Any]) -> float:
    """Σ q_j log(q_j / p_j)"""
    q_arr = np.asarray([float(x) for x in q])
    p_arr = np.asarray([float(x) for x in p])
    if q_arr.shape != p_arr.shape:
        raise DimensionMismatch(f"벡터 길이가 다릅니다: {q_arr.size} != {p_arr.size}")
    return float(np.sum(q_arr * np.log(q_arr / p_arr)))


def block_operators(mat: MultipartitionMatrix) -> List[Tuple[np.ndarray, np.ndarray]]:
    """블록별 (원-핫 행렬 n_ℓ×m, 행 선택자)"""
    operators = []
    for block in mat.blocks:
        selector = np.asarray(block.selector, dtype=np.intp)
        onehot = np.zeros((block.n_rows, mat.m))
        onehot[selector, np.arange(mat.m)] = 1.0
        operators.append((onehot, selector))
    return operators


def scale_batch(
    P: np.ndarray, target: np.ndarray, onehot: np.ndarray, selector: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    여러 시행을 한 번에 한 블록 조정합니다.

    Args:
        P: (T, m) 현재 분포
        target: (T, n_ℓ) 데이터 주변합 A^ℓ d
        onehot: (n_ℓ, m) 블록 행렬
        selector: 열별 행 번호

    Returns:
        (새 분포, 시행별 최대 변화량)
    """
    current = P @ onehot.T
    if np.any(current <= 0):
        raise ZeroMarginal("주변합이 0인 행이 있습니다.")
    updated = P * (target / current)[:, selector]
    delta = np.max(np.abs(updated - P), axis=1)
    return updated, delta


def log_likelihood(d: Sequence[Any], p: Sequence[Any]) -> float:
    """Σ d_j log p_j (d_j = 0 인 항은 0)"""
    d_arr = np.asarray([float(x) for x in d])
    p_arr = np.asarray([float(x) for x in p])
    mask = d_arr > 0
    return float(np.sum(d_arr[mask] * np.log(p_arr[mask])))


def initial_state(mat: MultipartitionMatrix, mode: str = "exact") -> IpsState:
    if mode == "float":
        return IpsState(p=np.full(mat.m, 1.0 / mat.m), mode="float")
    return IpsState(p=tuple([Fraction(1, mat.m)] * mat.m), mode="exact")


def _exact_step(mat: MultipartitionMatrix, p: Sequence[Fraction], target: Sequence[Fraction], block: int) -> Tuple[Fraction, ...]:
    current = block_marginals(mat, block, p)
    selector = mat.blocks[block].selector
    for i, value in enumerate(current):
        if value == 0:
            raise ZeroMarginal(f"블록 {block} 행 {i}의 주변합이 0입니다.")
    ratios = [t / c for t, c in zip(target, current)]
    return tuple(p[j] * ratios[selector[j]] for j in range(mat.m))


class IpsService:
    """IPS 실행 서비스 클래스"""

    def __init__(self, config: Optional[IpsConfig] = None):
        self.config = config or IpsConfig()
        # 행렬별 블록 연산자 (원-핫 행렬, 행 선택자)
        self._operators: Dict[MultipartitionMatrix, List[Tuple[np.ndarray, np.ndarray]]] = {}

    def operators(self, mat: MultipartitionMatrix) -> List[Tuple[np.ndarray, np.ndarray]]:
        cached = self._operators.get(mat)
        if cached is None:
            cached = block_operators(mat)
            self._operators[mat] = cached
        return cached

    # ==================== 단계 ====================

    def step(self, state: IpsState, mat: MultipartitionMatrix, d: Sequence[Any], block: int) -> IpsState:
        """
        블록 block의 선형족 {p : A^ℓ p = A^ℓ d} 로 사영합니다.

        Args:
            state: 현재 상태
            mat: 다중 분할 행렬
            d: 정규화된 양수 데이터
            block: 블록 인덱스 (0-based)

        Returns:
            새 상태 (step_count + 1)
        """
        if not 0 <= block < mat.k:
            raise IndexError(f"블록 인덱스 {block}가 범위를 벗어났습니다 (0..{mat.k - 1}).")
        data = check_data_vector(d, mat.m, mode=state.mode)
        if state.mode == "float":
            onehot, selector = self.operators(mat)[block]
            d_arr = np.asarray([float(x) for x in data])
            updated, _ = scale_batch(state.p[None, :], (onehot @ d_arr)[None, :], onehot, selector)
            return IpsState(p=updated[0], step_count=state.step_count + 1, mode="float", history=state.history)

        target = block_marginals(mat, block, data)
        p_new = _exact_step(mat, state.p, target, block)
        assert block_marginals(mat, block, p_new) == target
        return IpsState(p=p_new, step_count=state.step_count + 1, mode="exact", history=state.history)

    # ==================== 실행 ====================

    def run(self, mat: MultipartitionMatrix, d: Sequence[Any], config: Optional[IpsConfig] = None) -> IpsResult:
        """
        블록 1..k 를 반복합니다. 연속 k 단계의 변화가 없으면 (float: tol 미만) 수렴으로 보고
        그 직전까지의 단계 수를 steps_taken 으로 기록합니다.
        """
        config = config or self.config
        cap = config.cycle_cap() * mat.k
        data = check_data_vector(d, mat.m, mode=config.mode)

        if config.mode == "float":
            result = self._run_float(mat, data, config, cap)
        else:
            result = self._run_exact(mat, data, config, cap)

        if not result.converged:
            logger.warning("⚠️ IPS가 %d 단계 안에 수렴하지 않았습니다.", cap)
            if config.raise_on_max_cycles:
                raise MaxCyclesExceeded(f"최대 {config.cycle_cap()} 사이클에 도달했습니다.", state=result)
        return result

    def _run_exact(self, mat: MultipartitionMatrix, data: List[Fraction], config: IpsConfig, cap: int) -> IpsResult:
        k = mat.k
        targets = [block_marginals(mat, b, data) for b in range(k)]
        p: Tuple[Fraction, ...] = initial_state(mat).p
        history: List[IpsHistoryEntry] = []
        one_cycle: Optional[bool] = None
        quiet = 0
        step = 0
        converged = False
        while step < cap:
            block = step % k
            p_new = _exact_step(mat, p, targets[block], block)
            step += 1
            delta = max(abs(a - b) for a, b in zip(p_new, p))
            quiet = quiet + 1 if delta == 0 else 0
            p = p_new
            if config.record_history:
                history.append(IpsHistoryEntry(
                    step=step, block=block, delta=float(delta),
                    kl=kl_divergence(data, p), log_likelihood=log_likelihood(data, p),
                ))
            if step == k:
                one_cycle = birch_residual(mat, p, data) == 0
            if quiet >= k:
                converged = True
                break

        steps_taken = step - k if converged else step
        return IpsResult(
            mode="exact",
            final=list(p),
            steps_taken=steps_taken,
            cycles_taken=Fraction(steps_taken, k),
            converged=converged,
            birch_residual=birch_residual(mat, p, data),
            one_cycle_exact=one_cycle,
            history=history,
        )

    def _run_float(self, mat: MultipartitionMatrix, data: List[Fraction], config: IpsConfig, cap: int) -> IpsResult:
        k = mat.k
        d_arr = np.asarray([float(x) for x in data])
        operators = self.operators(mat)
        targets = [(onehot @ d_arr)[None, :] for onehot, _ in operators]
        P = np.full((1, mat.m), 1.0 / mat.m)
        history: List[IpsHistoryEntry] = []
        quiet = 0
        step = 0
        converged = False
        while step < cap:
            block = step % k
            onehot, selector = operators[block]
            P, delta = scale_batch(P, targets[block], onehot, selector)
            step += 1
            quiet = quiet + 1 if delta[0] < config.float_tolerance else 0
            if config.record_history:
                history.append(IpsHistoryEntry(
                    step=step, block=block, delta=float(delta[0]),
                    kl=kl_divergence(d_arr, P[0]), log_likelihood=log_likelihood(d_arr, P[0]),
                ))
            if quiet >= k:
                converged = True
                break

        steps_taken = step - k if converged else step
        return IpsResult(
            mode="float",
            final=[float(x) for x in P[0]],
            steps_taken=steps_taken,
            cycles_taken=Fraction(steps_taken, k),
            converged=converged,
            birch_residual=birch_residual(mat, P[0], d_arr),
            history=history,
        )

    def run_batch(
        self, mat: MultipartitionMatrix, D: np.ndarray, tolerance: float, max_steps: int
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        여러 데이터 벡터에 대해 float IPS를 동시에 실행합니다. 수렴한 시행은 배열에서 제외합니다.

        Args:
            mat: 다중 분할 행렬
            D: (T, m) 정규화된 양수 데이터
            tolerance: 조용한 단계의 변화량 기준
            max_steps: 최대 단계 수

        Returns:
            (최종 분포 (T, m), 단계 수 (T,), 수렴 여부 (T,))
        """
        k = mat.k
        T = D.shape[0]
        operators = self.operators(mat)
        final = np.full((T, mat.m), 1.0 / mat.m)
        steps = np.zeros(T, dtype=np.int64)
        converged = np.zeros(T, dtype=bool)

        active = np.arange(T)
        P = final.copy()
        targets = [D @ onehot.T for onehot, _ in operators]
        quiet = np.zeros(T, dtype=np.int64)
        step = 0
        while active.size and step < max_steps:
            block = step % k
            onehot, selector = operators[block]
            P, delta = scale_batch(P, targets[block], onehot, selector)
            step += 1
            quiet = np.where(delta < tolerance, quiet + 1, 0)
            finished = quiet >= k
            if finished.any():
                idx = active[finished]
                final[idx] = P[finished]
                steps[idx] = step - k
                converged[idx] = True
                keep = ~finished
                active = active[keep]
                P = P[keep]
                quiet = quiet[keep]
                targets = [t[keep] for t in targets]

        if active.size:
            final[active] = P
            steps[active] = step
            logger.warning("⚠️ %d개 시행이 %d 단계 안에 수렴하지 않았습니다.", active.size, max_steps)
        return final, steps, converged


# 전역 서비스 인스턴스
ips_service = IpsService()


def ips_step(state: IpsState, mat: MultipartitionMatrix, d: Sequence[Any], block: int) -> IpsState:
    return ips_service.step(state, mat, d, block)


def ips_run(mat: MultipartitionMatrix, d: Sequence[Any], config: Optional[IpsConfig] = None) -> IpsResult:
    return ips_service.run(mat, d, config)


def run_float_batch(
    mat: MultipartitionMatrix, D: np.ndarray, tolerance: float, max_steps: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return ips_service.run_batch(mat, D, tolerance, max_steps)
