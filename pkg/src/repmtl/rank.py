"""Intrinsic-dimension selection by singular-value thresholding.

Single-task fits are projected onto an l2 ball of radius R, stacked into a
p x T matrix B, and the estimated dimension is the largest r' such that
the r'-th singular value of B/sqrt(T) clears

    T1 * rate + T2 * R * r_bar^(-3/4),

where rate = sqrt((p + log T)/n) for multi-task use and
max(sqrt((p + log T)/n), sqrt(p/n0)) when the estimate feeds a transfer to
a target with n0 samples. Natural logarithm throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .losses import ModelFamily, TaskData, single_task_fit


class NoRankDetectedError(RuntimeError):
    """No singular value clears the threshold: pure-noise input or
    misconfigured thresholds."""

    def __init__(self, singular_values: np.ndarray, threshold: float):
        super().__init__(
            f"no rank detected: largest singular value "
            f"{singular_values[0]:.6g} is below threshold {threshold:.6g}"
        )
        self.singular_values = singular_values
        self.threshold = threshold


@dataclass
class RankConfig:
    threshold_t1: float = 1.0
    threshold_t2: float = 0.05
    radius: float = 5.0
    r_bar: Optional[float] = None  # None: sqrt(T) for mtl, sqrt(T n / n0) for tl
    mode: Literal["mtl", "tl"] = "mtl"
    n0: Optional[int] = None

    def __post_init__(self):
        if self.threshold_t1 <= 0 or self.threshold_t2 <= 0 or self.radius <= 0:
            raise ValueError("threshold parameters and radius must be positive")
        if self.r_bar is not None and self.r_bar <= 0:
            raise ValueError("r_bar must be positive")
        if self.mode not in ("mtl", "tl"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "tl" and self.n0 is None:
            raise ValueError("tl mode requires n0")


def project_ball(beta: np.ndarray, radius: float) -> np.ndarray:
    """Project onto the l2 ball of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    norm = np.linalg.norm(beta)
    if norm <= radius:
        return beta
    return beta * (radius / norm)


def threshold_value(config: RankConfig, p: int, T: int, n: int) -> float:
    rate = math.sqrt((p + math.log(T)) / n)
    if config.mode == "tl":
        rate = max(rate, math.sqrt(p / config.n0))
    r_bar = config.r_bar
    if r_bar is None:
        r_bar = math.sqrt(T) if config.mode == "mtl" else math.sqrt(T * n / config.n0)
    return config.threshold_t1 * rate + config.threshold_t2 * config.radius * r_bar ** (-0.75)


def stack_projected_fits(
    data: list[TaskData], family: ModelFamily, radius: float
) -> np.ndarray:
    """p x T matrix of ball-projected single-task fits."""
    return np.column_stack(
        [project_ball(single_task_fit(family, task), radius) for task in data]
    )


def detect_rank(B: np.ndarray, threshold: float) -> tuple[int, np.ndarray]:
    """Largest r' with sigma_r'(B/sqrt(T)) >= threshold, plus the profile."""
    T = B.shape[1]
    svals = np.linalg.svd(B / math.sqrt(T), compute_uv=False)
    r_hat = int(np.sum(svals >= threshold))
    if r_hat == 0:
        raise NoRankDetectedError(svals, threshold)
    return r_hat, svals


def estimate_r(
    data: list[TaskData], family: ModelFamily, config: RankConfig, n: int
) -> int:
    """Estimated intrinsic dimension from the tasks' single-task fits."""
    if not data:
        raise ValueError("need at least one task")
    B = stack_projected_fits(data, family, config.radius)
    thr = threshold_value(config, data[0].p, len(data), n)
    r_hat, _ = detect_rank(B, thr)
    return r_hat
