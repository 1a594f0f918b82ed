"""Synthetic data generation, baselines, metrics, and the replication runner.

Data follow the shared-representation construction: a random center basis,
per-task representations displaced from it by h times a Rademacher sign in
the leading r coordinates, Gaussian designs, and additive Gaussian noise.
Designated outlier tasks ignore the shared structure entirely and draw
coefficients uniformly at random, which is the contamination the robust
estimator is meant to withstand.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .losses import (
    FitError,
    Linear,
    ModelFamily,
    TaskData,
    loss_value,
    restricted_fit,
    single_task_fit,
)
from .mtl import MtlConfig, rl_mtl
from .rank import NoRankDetectedError, RankConfig, estimate_r
from .stiefel import orthonormalize, projector_distance_spectral, random_orthobasis

METHODS = ("rl_mtl_oracle", "rl_mtl_adaptive", "rl_mtl_naive", "single_task")


@dataclass(frozen=True)
class UniformCoef:
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.low >= self.high:
            raise ValueError("need low < high")


@dataclass(frozen=True)
class SimSpec:
    T: int
    n: int
    p: int
    r: int
    h: float
    theta_stars: tuple
    outlier_tasks: dict = field(default_factory=dict)  # 0-based index -> UniformCoef
    noise_sd: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if min(self.T, self.n, self.p, self.r) < 1 or self.r > self.p:
            raise ValueError("need T, n, p, r >= 1 and r <= p")
        if self.h < 0:
            raise ValueError("h must be non-negative")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        thetas = tuple(np.asarray(th, dtype=float) for th in self.theta_stars)
        if len(thetas) != self.T:
            raise ValueError(f"need {self.T} theta vectors, got {len(thetas)}")
        for th in thetas:
            if th.shape != (self.r,):
                raise ValueError(f"theta vectors must have length r={self.r}")
        object.__setattr__(self, "theta_stars", thetas)
        for idx in self.outlier_tasks:
            if not 0 <= idx < self.T:
                raise ValueError(f"outlier task index {idx} out of range")


@dataclass
class SimTruth:
    center_star: np.ndarray
    task_reps: list  # p x r, not orthonormal for h > 0 (construction kept verbatim)
    beta_stars: list
    inlier_set: tuple
    # diagnostic: subspace distance of each inlier representation to the center
    effective_distances: list = field(default_factory=list)


def demo_theta_stars() -> tuple:
    """Stock six-task low-dimensional parameter table (r = 3)."""
    return (
        np.array([1.0, 0.5, 0.0]),
        np.array([1.0, -1.0, 1.0]),
        np.array([1.5, 1.5, 0.0]),
        np.array([1.0, 1.0, 0.0]),
        np.array([1.0, 0.0, 1.0]),
        np.array([-1.0, -1.0, -1.0]),
    )


def generate(spec: SimSpec) -> tuple[list[TaskData], SimTruth]:
    """Deterministic draw of all tasks' data and the generating truth.

    Shared quantities (center basis, Rademacher signs) come from a
    generator seeded with master_seed; task t (1-based) draws its own
    data from a generator seeded with master_seed + t, so single tasks
    can be regenerated independently.
    """
    shared_rng = np.random.default_rng(spec.master_seed)
    center = random_orthobasis(shared_rng, spec.p, spec.r)
    signs = shared_rng.choice([-1.0, 1.0], size=spec.T)
    E = np.zeros((spec.p, spec.r))
    E[: spec.r, : spec.r] = np.eye(spec.r)

    data: list[TaskData] = []
    task_reps, beta_stars, distances = [], [], []
    inliers = []
    for t in range(spec.T):
        rng_t = np.random.default_rng(spec.master_seed + t + 1)
        if t in spec.outlier_tasks:
            gen = spec.outlier_tasks[t]
            rep = np.full((spec.p, spec.r), np.nan)
            beta = rng_t.uniform(gen.low, gen.high, size=spec.p)
            dist = math.nan
        else:
            rep = center + spec.h * signs[t] * E
            beta = rep @ spec.theta_stars[t]
            dist = projector_distance_spectral(orthonormalize(rep), center)
            inliers.append(t)
        X = rng_t.standard_normal((spec.n, spec.p))
        noise = rng_t.standard_normal(spec.n)
        Y = X @ beta + spec.noise_sd * noise
        data.append(TaskData(X, Y))
        task_reps.append(rep)
        beta_stars.append(beta)
        distances.append(dist)
    truth = SimTruth(
        center_star=center,
        task_reps=task_reps,
        beta_stars=beta_stars,
        inlier_set=tuple(inliers),
        effective_distances=distances,
    )
    return data, truth


def baseline_single_task(data: list[TaskData], family: ModelFamily) -> list[np.ndarray]:
    return [single_task_fit(family, task) for task in data]


def baseline_naive_shared(
    data: list[TaskData], family: ModelFamily, r: int
) -> list[np.ndarray]:
    """Shared-representation empirical risk minimization, no robustness.

    Alternating scheme: given the basis, thetas are subspace-restricted
    fits; the basis candidate is the orthonormalized top-r left singular
    block of the stacked unpenalized single-task targets, accepted only if
    the pooled loss does not increase. Stops at relative change 1e-7 or
    200 rounds.
    """
    T = len(data)
    targets = np.column_stack([single_task_fit(family, task) for task in data])
    U, _, _ = np.linalg.svd(targets, full_matrices=False)
    k = min(r, U.shape[1])
    candidate = orthonormalize(U[:, :k])

    def pooled(A, thetas):
        val = sum(loss_value(family, task, A @ th) for task, th in zip(data, thetas))
        if not np.isfinite(val):
            raise FloatingPointError("non-finite objective")
        return val / T

    A = candidate
    thetas = [restricted_fit(family, task, A) for task in data]
    obj = pooled(A, thetas)
    for _ in range(200):
        thetas_new = [restricted_fit(family, task, candidate) for task in data]
        obj_new = pooled(candidate, thetas_new)
        if obj_new <= obj:
            A, thetas = candidate, thetas_new
        else:
            obj_new = obj
        if abs(obj - obj_new) <= 1e-7 * max(1.0, abs(obj)):
            break
        obj = obj_new
    return [A @ th for th in thetas]


def max_error(fits: list[np.ndarray], truth: SimTruth, subset: str) -> float:
    """Largest l2 estimation error over the selected task subset."""
    T = len(truth.beta_stars)
    if subset == "inliers":
        idx = list(truth.inlier_set)
    elif subset == "outliers":
        idx = [t for t in range(T) if t not in truth.inlier_set]
    elif subset == "all":
        idx = list(range(T))
    else:
        raise ValueError(f"unknown subset {subset!r}")
    if not idx:
        raise ValueError(f"subset {subset!r} is empty")
    return max(float(np.linalg.norm(fits[t] - truth.beta_stars[t])) for t in idx)


@dataclass(frozen=True)
class ResultRow:
    method: str
    h: float
    rep: int
    subset: str
    error: float


@dataclass(frozen=True)
class SummaryRow:
    method: str
    h: float
    subset: str
    mean: float
    sd: float


@dataclass(frozen=True)
class FailureRow:
    method: str
    h: float
    rep: int
    message: str


@dataclass
class ResultTable:
    results: list
    summary: list
    failures: list


def default_mtl_config(spec: SimSpec, r: int, overrides: Optional[dict] = None) -> MtlConfig:
    """Theory-scaled penalty defaults for the given intrinsic dimension."""
    fields = {
        "lam": math.sqrt(r * (spec.p + math.log(spec.T))),
        "gamma": 0.5 * math.sqrt(spec.p + math.log(spec.T)),
        "r": r,
    }
    if overrides:
        fields.update(overrides)
        fields["r"] = r
    return MtlConfig(**fields)


def _subsets(truth: SimTruth) -> list[str]:
    out = ["inliers"]
    if len(truth.inlier_set) < len(truth.beta_stars):
        out.append("outliers")
    out.append("all")
    return out


def _fit_method(
    method: str,
    data: list[TaskData],
    family: ModelFamily,
    spec: SimSpec,
    mtl_overrides: Optional[dict],
    rank_config: RankConfig,
) -> list[np.ndarray]:
    if method == "single_task":
        return baseline_single_task(data, family)
    if method == "rl_mtl_naive":
        return baseline_naive_shared(data, family, spec.r)
    if method == "rl_mtl_oracle":
        cfg = default_mtl_config(spec, spec.r, mtl_overrides)
        return rl_mtl(data, family, cfg).beta
    if method == "rl_mtl_adaptive":
        r_hat = estimate_r(data, family, rank_config, spec.n)
        cfg = default_mtl_config(spec, r_hat, mtl_overrides)
        return rl_mtl(data, family, cfg).beta
    raise ValueError(f"unknown method {method!r}")


def _run_cell(args) -> tuple[float, int, dict, dict]:
    spec, h, rep, methods, family, mtl_overrides, rank_config = args
    cell_spec = replace(spec, h=h, master_seed=spec.master_seed + 10000 * rep)
    data, truth = generate(cell_spec)
    errors: dict = {}
    failures: dict = {}
    for method in methods:
        try:
            fits = _fit_method(method, data, family, cell_spec, mtl_overrides, rank_config)
            errors[method] = {s: max_error(fits, truth, s) for s in _subsets(truth)}
        except (FitError, NoRankDetectedError, FloatingPointError,
                np.linalg.LinAlgError, ValueError) as exc:
            errors[method] = {s: math.nan for s in _subsets(truth)}
            failures[method] = f"{type(exc).__name__}: {exc}"
    return h, rep, errors, failures


def run_replications(
    spec: SimSpec,
    methods: list[str],
    reps: int,
    h_grid: Optional[list[float]] = None,
    family: Optional[ModelFamily] = None,
    mtl_overrides: Optional[dict] = None,
    rank_config: Optional[RankConfig] = None,
    n_workers: int = 0,
) -> ResultTable:
    """Run each method on shared per-replication data over an h grid.

    Replication rep (1-based) uses master_seed + 10000*rep; all methods in
    a cell see identical data. A method failure is recorded as NaN in the
    results plus a failure row, and never aborts the grid. The reduction
    over finished cells happens in a fixed order, so the output table is a
    deterministic function of the inputs.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; known: {METHODS}")
    family = family if family is not None else Linear()
    rank_config = rank_config if rank_config is not None else RankConfig()
    grid = list(h_grid) if h_grid is not None else [spec.h]

    cells = [
        (spec, h, rep, tuple(methods), family, mtl_overrides, rank_config)
        for h in grid
        for rep in range(1, reps + 1)
    ]
    if n_workers == 1 or len(cells) == 1:
        outcomes = [_run_cell(c) for c in cells]
    else:
        workers = n_workers if n_workers > 0 else (os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, cells, chunksize=1))

    results: list[ResultRow] = []
    failures: list[FailureRow] = []
    by_key: dict = {}
    for h, rep, errors, fail in outcomes:
        for method in methods:
            for subset, err in errors[method].items():
                results.append(ResultRow(method, h, rep, subset, err))
                by_key.setdefault((method, h, subset), []).append(err)
            if method in fail:
                failures.append(FailureRow(method, h, rep, fail[method]))

    summary: list[SummaryRow] = []
    for method in methods:
        for h in grid:
            seen = {k[2] for k in by_key if k[0] == method and k[1] == h}
            for subset in ("inliers", "outliers", "all"):
                if subset not in seen:
                    continue
                errs = np.asarray(by_key[(method, h, subset)])
                finite = errs[np.isfinite(errs)]
                if finite.size:
                    mean = float(np.mean(finite))
                    sd = float(np.std(finite, ddof=0))
                else:
                    mean = math.nan
                    sd = math.nan
                summary.append(SummaryRow(method, h, subset, mean, sd))
    return ResultTable(results=results, summary=summary, failures=failures)
