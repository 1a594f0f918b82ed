"""Two-step robust multi-task estimation with per-task representations.

Step 1 jointly fits per-task orthonormal bases A_t, low-dimensional
parameters theta_t, and a center basis by minimizing

    (1/T) sum_t [ f_t(A_t theta_t) + (lambda/sqrt(n_t)) ||A_t A_t^T - C C^T||_2 ]

over Stiefel bases, where C is the center. The unsquared spectral penalty
makes exact snapping of tasks onto the center a genuine local optimum at
large lambda. Step 2 re-fits each task's full coefficient vector with an
unsquared l2 pull toward its Step-1 anchor; the pull's bias is at most
gamma/sqrt(n), which caps how much a bad anchor can hurt any single task.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .losses import (
    FitError,
    Linear,
    ModelFamily,
    TaskData,
    empirical_covariance,
    loss_grad,
    loss_value,
    restricted_fit,
    single_task_fit,
)
from .stiefel import (
    orthonormalize,
    principal_subspace,
    projector_distance_spectral,
    extrinsic_mean,
)


@dataclass
class MtlConfig:
    lam: float
    gamma: float
    r: int
    max_outer_iters: int = 200
    tol: float = 1e-7
    riemannian_step: float = 0.1
    riemannian_substeps: int = 5

    def __post_init__(self):
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("penalty scales must be non-negative")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.max_outer_iters < 1 or self.riemannian_substeps < 0:
            raise ValueError("iteration caps must be positive")
        if self.tol <= 0 or self.riemannian_step <= 0:
            raise ValueError("tol and riemannian_step must be positive")


@dataclass
class MtlFit:
    per_task_basis: list[np.ndarray]
    per_task_theta: list[np.ndarray]
    center: np.ndarray
    step1_beta: list[np.ndarray]
    beta: list[np.ndarray]
    objective_trace: list[float]
    converged: bool


def step1_objective(
    data: list[TaskData],
    family: ModelFamily,
    bases: list[np.ndarray],
    thetas: list[np.ndarray],
    center: np.ndarray,
    lam: float,
) -> float:
    if not (len(data) == len(bases) == len(thetas)) or len(data) < 1:
        raise ValueError("data, bases, thetas must have equal positive length")
    total = 0.0
    for task, A, theta in zip(data, bases, thetas):
        if A.shape != center.shape or A.shape[1] != theta.shape[0]:
            raise ValueError("shape mismatch between basis, theta, and center")
        total += loss_value(family, task, A @ theta)
        total += lam / np.sqrt(task.n) * projector_distance_spectral(A, center)
    val = total / len(data)
    if not np.isfinite(val):
        raise FloatingPointError("non-finite objective")
    return val


def _init_center(data: list[TaskData], family: ModelFamily, r: int) -> np.ndarray:
    # extrinsic mean of the normalized single-task coefficient directions,
    # i.e. the r-truncated SVD of the stacked normalized estimates
    p = data[0].p
    P = np.zeros((p, p))
    for task in data:
        b = single_task_fit(family, task)
        norm = np.linalg.norm(b)
        if norm > 0:
            u = b / norm
            P += np.outer(u, u)
    P /= len(data)
    return principal_subspace(P, r)


def _task_term(task: TaskData, family, A, theta, center, lam) -> float:
    return loss_value(family, task, A @ theta) + lam / np.sqrt(task.n) * (
        projector_distance_spectral(A, center)
    )


def _spectral_subgradient(D: np.ndarray) -> np.ndarray:
    # u1 v1^T for the leading singular pair; LAPACK's deterministic SVD
    # fixes the choice on ties (including D = 0)
    U, _, Vt = np.linalg.svd(D)
    return np.outer(U[:, 0], Vt[0])


def _riemannian_candidate(
    task: TaskData,
    family: ModelFamily,
    A0: np.ndarray,
    theta0: np.ndarray,
    J0: float,
    center: np.ndarray,
    lam: float,
    step0: float,
    substeps: int,
) -> tuple[np.ndarray, np.ndarray, float]:
    """A few guarded projected subgradient steps from (A0, theta0).

    Each substep halves the step size until the task's penalized term
    decreases; QR retraction restores orthonormality, then theta is
    re-solved on the new subspace.
    """
    A, theta, J = A0, theta0, J0
    scale = lam / np.sqrt(task.n)
    for _ in range(substeps):
        grad_beta = loss_grad(family, task, A @ theta)
        G = np.outer(grad_beta, theta)
        sub = _spectral_subgradient(A @ A.T - center @ center.T)
        G = G + scale * (sub + sub.T) @ A
        AtG = A.T @ G
        xi = G - A @ (AtG + AtG.T) / 2.0  # tangent projection
        moved = False
        step = step0
        for _ in range(6):
            try:
                A_try = orthonormalize(A - step * xi)
                theta_try = restricted_fit(family, task, A_try)
            except (ValueError, np.linalg.LinAlgError, FitError):
                step *= 0.5
                continue
            J_try = _task_term(task, family, A_try, theta_try, center, lam)
            if J_try < J:
                A, theta, J = A_try, theta_try, J_try
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return A, theta, J


def fit_step1(
    data: list[TaskData],
    family: ModelFamily,
    config: MtlConfig,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray, list[float]]:
    """Monotone block-coordinate descent on the Step-1 objective.

    Per round each task picks the better of a snap-to-center candidate and
    a Riemannian descent candidate, accepted only if its penalized term
    does not increase; the center then moves to the extrinsic mean of the
    task bases, accepted only if the full objective does not increase. The
    returned trace is therefore non-increasing by construction.
    """
    T = len(data)
    p = data[0].p
    r = config.r
    if r > p:
        raise ValueError(f"r={r} exceeds p={p}")
    for task in data[1:]:
        if task.p != p:
            raise ValueError("tasks disagree on feature dimension")
    lam = config.lam

    center = _init_center(data, family, r)
    bases = [center.copy() for _ in range(T)]
    thetas = [restricted_fit(family, task, center) for task in data]

    trace = [step1_objective(data, family, bases, thetas, center, lam)]
    for _ in range(config.max_outer_iters):
        for t, task in enumerate(data):
            current = _task_term(task, family, bases[t], thetas[t], center, lam)
            best_A, best_theta, best_J = bases[t], thetas[t], current

            theta_snap = restricted_fit(family, task, center)
            J_snap = loss_value(family, task, center @ theta_snap)
            if J_snap < best_J:
                best_A, best_theta, best_J = center, theta_snap, J_snap

            A_r, theta_r, J_r = _riemannian_candidate(
                task, family, bases[t], thetas[t], current, center, lam,
                config.riemannian_step, config.riemannian_substeps,
            )
            if J_r < best_J:
                best_A, best_theta, best_J = A_r, theta_r, J_r

            if best_J <= current:
                bases[t] = best_A
                thetas[t] = best_theta

        candidate = extrinsic_mean(bases)
        obj_old = step1_objective(data, family, bases, thetas, center, lam)
        obj_new = step1_objective(data, family, bases, thetas, candidate, lam)
        if obj_new <= obj_old:
            center = candidate
            obj = obj_new
        else:
            obj = obj_old
        trace.append(obj)
        if abs(trace[-2] - trace[-1]) <= config.tol * max(1.0, abs(trace[-2])):
            break
    return bases, thetas, center, trace


def prox_l2(v: np.ndarray, tau: float) -> np.ndarray:
    """Proximal operator of tau*||.||_2: shrink v toward 0, to 0 if short."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    norm = np.linalg.norm(v)
    if norm <= tau:
        return np.zeros_like(v)
    return (1.0 - tau / norm) * v


def fit_step2(
    data: TaskData,
    family: ModelFamily,
    gamma: float,
    anchor: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 5000,
) -> np.ndarray:
    """Minimize f(beta) + (gamma/sqrt(n)) ||beta - anchor||_2.

    Accelerated proximal gradient in the shifted variable w = beta - anchor
    with fixed step 1/L, L = lambda_max(empirical covariance) times the
    family's curvature bound. Raises FitError (carrying the last iterate)
    if the iterate change has not fallen below tol within max_iter steps.
    """
    if anchor.shape[0] != data.p:
        raise ValueError("anchor dimension does not match data")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    sigma = empirical_covariance(data)
    L = family.curvature_bound * _kernels.power_method_sym(sigma)
    if L <= 0:
        # zero design: the loss is flat, the penalty alone pins beta = anchor
        return anchor.copy()
    tau = gamma / np.sqrt(data.n)

    if isinstance(family, Linear):
        G = 2.0 * sigma
        g0 = G @ anchor - 2.0 / data.n * (data.X.T @ data.Y)
        w, _, ok = _kernels.apg_l2_linear(G, g0, tau, L, tol, max_iter)
        if not ok:
            raise FitError("proximal gradient did not converge", anchor + w, np.nan)
        return anchor + w

    p = data.p
    w = np.zeros(p)
    z = w.copy()
    t_k = 1.0
    for _ in range(max_iter):
        grad = loss_grad(family, data, anchor + z)
        w_new = prox_l2(z - grad / L, tau / L)
        dw = w_new - w
        if (z - w_new) @ dw > 0.0:
            t_k = 1.0
            z = w_new.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            z = w_new + ((t_k - 1.0) / t_next) * dw
            t_k = t_next
        delta = float(np.linalg.norm(dw))
        w = w_new
        if delta <= tol:
            return anchor + w
    raise FitError("proximal gradient did not converge", anchor + w, np.nan)


def rl_mtl(data: list[TaskData], family: ModelFamily, config: MtlConfig) -> MtlFit:
    """Step 1 then Step 2 per task, anchored at the Step-1 coefficients."""
    bases, thetas, center, trace = fit_step1(data, family, config)
    step1_beta = [A @ theta for A, theta in zip(bases, thetas)]
    beta = [
        fit_step2(task, family, config.gamma, anchor)
        for task, anchor in zip(data, step1_beta)
    ]
    converged = bool(abs(trace[-2] - trace[-1]) <= config.tol * max(1.0, abs(trace[-2])))
    return MtlFit(
        per_task_basis=bases,
        per_task_theta=thetas,
        center=center,
        step1_beta=step1_beta,
        beta=beta,
        objective_trace=trace,
        converged=converged,
    )
