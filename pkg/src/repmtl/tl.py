"""Transfer of a learned center representation to a new target task.

The target's coefficients are first fit inside the center's column space
(an r-dimensional problem, solvable even with n0 < p samples), then
corrected by the same anchored proximal step used for source tasks, with
the penalty scaled by the target sample size n0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import ModelFamily, TaskData, restricted_fit
from .mtl import fit_step2


@dataclass
class TlFit:
    theta0: np.ndarray
    step1_beta0: np.ndarray
    beta0: np.ndarray


def rl_tl(target: TaskData, family: ModelFamily, center: np.ndarray, gamma: float) -> TlFit:
    if center.shape[0] != target.p:
        raise ValueError(
            f"center has {center.shape[0]} rows but target has p={target.p}"
        )
    theta0 = restricted_fit(family, target, center)
    anchor = center @ theta0
    beta0 = fit_step2(target, family, gamma, anchor)
    return TlFit(theta0=theta0, step1_beta0=anchor, beta0=beta0)
