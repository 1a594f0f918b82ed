"""Model families, empirical losses, gradients, and per-task minimizers.

Three families are supported, all parameterized by the linear predictor
u = x^T beta:

* linear regression, f(beta) = (1/n) sum (y_i - u_i)^2;
* canonical GLMs, f(beta) = (1/n) sum [-y_i u_i + psi(u_i)] with convex psi;
* nonlinear link regression, f(beta) = (1/n) sum (y_i - g(u_i))^2.

Solvers touch the data only through loss values and gradients; no noise
distribution is assumed anywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np


@dataclass(frozen=True)
class TaskData:
    """One task's design matrix (n x p) and response vector (length n)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.shape[0]:
            raise ValueError(f"inconsistent shapes X {X.shape}, Y {Y.shape}")
        if X.shape[0] < 1:
            raise ValueError("need at least one sample")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("non-finite entries in data")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Linear:
    # second derivative of (y-u)^2 in u
    curvature_bound: float = 2.0


@dataclass(frozen=True)
class Glm:
    psi: Callable[[np.ndarray], np.ndarray]
    psi_prime: Callable[[np.ndarray], np.ndarray]
    psi_double: Callable[[np.ndarray], np.ndarray]
    # upper bound on psi'' over the reals
    curvature_bound: float = 1.0


@dataclass(frozen=True)
class Nonlinear:
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]
    # upper bound on the second derivative of (y - g(u))^2 in u
    curvature_bound: float = 2.0


ModelFamily = Union[Linear, Glm, Nonlinear]


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _logistic_psi(u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def _logistic_psi_double(u: np.ndarray) -> np.ndarray:
    s = _sigmoid(u)
    # clip keeps Newton systems nonsingular in the saturated tails
    return np.maximum(s * (1.0 - s), 1e-12)


def logistic() -> Glm:
    """Canonical logistic family: psi(u) = log(1 + e^u), stable evaluation."""
    return Glm(
        psi=_logistic_psi,
        psi_prime=_sigmoid,
        psi_double=_logistic_psi_double,
        curvature_bound=0.25,
    )


class FitError(RuntimeError):
    """Solver failure; carries the last iterate and its gradient norm."""

    def __init__(self, message: str, beta: np.ndarray, grad_norm: float):
        super().__init__(f"{message} (gradient norm {grad_norm:.3e})")
        self.beta = beta
        self.grad_norm = grad_norm


def loss_value(family: ModelFamily, data: TaskData, beta: np.ndarray) -> float:
    u = data.X @ beta
    if isinstance(family, Linear):
        res = data.Y - u
        val = res @ res / data.n
    elif isinstance(family, Glm):
        val = float(np.sum(-data.Y * u + family.psi(u))) / data.n
    elif isinstance(family, Nonlinear):
        res = data.Y - family.g(u)
        val = res @ res / data.n
    else:
        raise TypeError(f"unknown family {family!r}")
    if not np.isfinite(val):
        raise FloatingPointError("loss overflow")
    return float(val)


def loss_grad(family: ModelFamily, data: TaskData, beta: np.ndarray) -> np.ndarray:
    u = data.X @ beta
    if isinstance(family, Linear):
        g = 2.0 / data.n * (data.X.T @ (u - data.Y))
    elif isinstance(family, Glm):
        g = data.X.T @ (family.psi_prime(u) - data.Y) / data.n
    elif isinstance(family, Nonlinear):
        g = -2.0 / data.n * (data.X.T @ ((data.Y - family.g(u)) * family.g_prime(u)))
    else:
        raise TypeError(f"unknown family {family!r}")
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("loss overflow")
    return g


def empirical_covariance(data: TaskData) -> np.ndarray:
    return data.X.T @ data.X / data.n


def _newton_glm(family: Glm, X: np.ndarray, Y: np.ndarray, beta0: np.ndarray,
                tol: float, max_iter: int) -> np.ndarray:
    n = X.shape[0]
    data = TaskData(X, Y)
    beta = beta0.copy()
    val = loss_value(family, data, beta)
    for _ in range(max_iter):
        grad = loss_grad(family, data, beta)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return beta
        w = family.psi_double(X @ beta)
        H = (X.T * w) @ X / n
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = grad
        # damping: halve until the convex loss decreases
        t = 1.0
        for _ in range(50):
            cand = beta - t * step
            cand_val = loss_value(family, data, cand)
            if cand_val < val:
                beta, val = cand, cand_val
                break
            t *= 0.5
        else:
            break
    grad = loss_grad(family, data, beta)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= tol:
        return beta
    raise FitError("Newton did not converge", beta, gnorm)


def _gauss_newton(family: Nonlinear, X: np.ndarray, Y: np.ndarray, beta0: np.ndarray,
                  tol: float, max_iter: int) -> np.ndarray:
    n = X.shape[0]
    data = TaskData(X, Y)
    beta = beta0.copy()
    val = loss_value(family, data, beta)
    for _ in range(max_iter):
        grad = loss_grad(family, data, beta)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return beta
        u = X @ beta
        gp = family.g_prime(u)
        H = 2.0 / n * ((X.T * gp**2) @ X)
        H[np.diag_indices_from(H)] += 1e-10
        step = np.linalg.solve(H, grad)
        t = 1.0
        for _ in range(60):
            cand = beta - t * step
            cand_val = loss_value(family, data, cand)
            if cand_val < val:
                beta, val = cand, cand_val
                break
            t *= 0.5
        else:
            break
    grad = loss_grad(family, data, beta)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= tol:
        return beta
    raise FitError("Gauss-Newton did not converge", beta, gnorm)


def _lstsq_full_rank(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    beta, _, rank, _ = np.linalg.lstsq(X, Y, rcond=None)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError(
            f"design has numerical rank {rank} < {X.shape[1]}"
        )
    return beta


def single_task_fit(family: ModelFamily, data: TaskData) -> np.ndarray:
    """Unrestricted minimizer of the task's empirical loss.

    Linear: least squares via QR. Glm: damped Newton to gradient norm 1e-8
    (at most 200 iterations). Nonlinear: Gauss-Newton with backtracking to
    gradient norm 1e-6 (at most 500 iterations), started at the linear fit.
    """
    if isinstance(family, Linear):
        return _lstsq_full_rank(data.X, data.Y)
    if isinstance(family, Glm):
        return _newton_glm(family, data.X, data.Y, np.zeros(data.p), 1e-8, 200)
    if isinstance(family, Nonlinear):
        beta0 = _lstsq_full_rank(data.X, data.Y)
        return _gauss_newton(family, data.X, data.Y, beta0, 1e-6, 500)
    raise TypeError(f"unknown family {family!r}")


def restricted_fit(family: ModelFamily, data: TaskData, A: np.ndarray) -> np.ndarray:
    """theta minimizing f(A theta): the task's fit inside span(A).

    Works on the reduced n x r design XA, so it stays solvable even when
    n < p (the basis for few-shot transfer). Stationarity at the output:
    ||A^T grad f(A theta)|| <= 1e-8.
    """
    XA = data.X @ A
    if isinstance(family, Linear):
        return _lstsq_full_rank(XA, data.Y)
    if isinstance(family, Glm):
        return _newton_glm(family, XA, data.Y, np.zeros(A.shape[1]), 1e-8, 200)
    if isinstance(family, Nonlinear):
        theta0 = _lstsq_full_rank(XA, data.Y)
        return _gauss_newton(family, XA, data.Y, theta0, 1e-8, 500)
    raise TypeError(f"unknown family {family!r}")
