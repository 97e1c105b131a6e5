"""
IPS 반복 실험 서비스
무작위 데이터 벡터에 대해 float IPS 단계 수를 측정하고 통계를 요약합니다.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, TextIO, Union

import numpy as np
import pandas as pd

from models.partition import MultipartitionMatrix
from models.schemas import ExperimentConfig, ExperimentSummary
from services.ips_service import IpsService, ips_service

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["trial", "steps", "final_birch_residual"]
FRAME_COLUMNS = ["trial", "steps", "converged", "final_birch_residual"]

Sampler = Callable[[int, int, int], np.ndarray]


def sample_dirichlet(m: int, seed: int, trial: int) -> np.ndarray:
    """열린 단체 위 균등분포 (정규화한 표준 지수분포), 시행별 시드 (seed, trial)"""
    rng = np.random.default_rng([seed, trial])
    draw = rng.standard_exponential(m)
    return draw / draw.sum()


class ExperimentService:
    """IPS 단계 수 실험 서비스 클래스"""

    def __init__(self, ips: Optional[IpsService] = None, sampler: Sampler = sample_dirichlet):
        self.ips = ips or ips_service
        self.sampler = sampler

    def _run_chunk(self, mat: MultipartitionMatrix, config: ExperimentConfig, trials: np.ndarray) -> pd.DataFrame:
        D = np.vstack([self.sampler(mat.m, config.seed, int(t)) for t in trials])
        final, steps, converged = self.ips.run_batch(mat, D, config.tolerance, config.max_cycles * mat.k)
        diff = final - D
        residual = np.max(
            np.column_stack([np.max(np.abs(diff @ onehot.T), axis=1) for onehot, _ in self.ips.operators(mat)]),
            axis=1,
        )
        return pd.DataFrame({
            "trial": trials,
            "steps": steps,
            "converged": converged,
            "final_birch_residual": residual,
        })

    def run(self, mat: MultipartitionMatrix, config: Optional[ExperimentConfig] = None) -> pd.DataFrame:
        """
        trials 개의 무작위 데이터에 대해 IPS 단계 수를 측정합니다.

        Args:
            mat: 다중 분할 행렬
            config: 실험 설정

        Returns:
            trial, steps, converged, final_birch_residual 열을 가진 DataFrame (trial 순)
        """
        config = config or ExperimentConfig()
        trial_ids = np.arange(config.trials)
        chunks = [trial_ids[i:i + config.chunk_size] for i in range(0, config.trials, config.chunk_size)]
        logger.info("실험 시작: trials=%d, chunks=%d, workers=%d", config.trials, len(chunks), config.workers)

        if config.workers == 1:
            frames = [self._run_chunk(mat, config, chunk) for chunk in chunks]
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                frames = list(pool.map(lambda chunk: self._run_chunk(mat, config, chunk), chunks))

        df = pd.concat(frames, ignore_index=True).sort_values("trial", ignore_index=True)
        return df[FRAME_COLUMNS]

    @staticmethod
    def summarize(df: pd.DataFrame) -> ExperimentSummary:
        steps = df["steps"]
        histogram = steps.value_counts().sort_index()
        return ExperimentSummary(
            trials=int(steps.size),
            mean=float(steps.mean()),
            min=int(steps.min()),
            max=int(steps.max()),
            converged=int(df["converged"].sum()),
            histogram={int(k): int(v) for k, v in histogram.items()},
        )

    @staticmethod
    def write_csv(df: pd.DataFrame, target: Union[Path, str, TextIO]) -> None:
        df.to_csv(target, index=False, columns=CSV_COLUMNS, float_format="%.6e", lineterminator="\n")


# 전역 서비스 인스턴스
experiment_service = ExperimentService()


def iteration_experiment(mat: MultipartitionMatrix, config: Optional[ExperimentConfig] = None) -> pd.DataFrame:
    return experiment_service.run(mat, config)


def summarize(df: pd.DataFrame) -> ExperimentSummary:
    return experiment_service.summarize(df)


def write_csv(df: pd.DataFrame, target: Union[Path, str, TextIO]) -> None:
    experiment_service.write_csv(df, target)


def step_counts(df: pd.DataFrame) -> List[int]:
    return [int(x) for x in df["steps"]]
