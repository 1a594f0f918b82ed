"""Two-step estimator: proximal map, Step-2 solver vs derivative-free
oracle, Step-1 descent properties, and the snap-to-center regime."""
import numpy as np
import pytest
from scipy.optimize import minimize

from repmtl import (
    Linear,
    MtlConfig,
    TaskData,
    fit_step1,
    fit_step2,
    logistic,
    loss_grad,
    loss_value,
    projector_distance_spectral,
    prox_l2,
    rl_mtl,
    single_task_fit,
    step1_objective,
)

from conftest import linear_task, random_basis


# ---------------------------------------------------------------------------
# oracles

def step2_objective(data, family, gamma, anchor, beta):
    penalty = gamma / np.sqrt(data.n) * np.linalg.norm(beta - anchor)
    return loss_value(family, data, beta) + penalty


def nelder_mead_step2(data, family, gamma, anchor, seed=0, restarts=10):
    """Derivative-free reference minimizer with random restarts."""
    rng = np.random.default_rng(seed)
    p = data.p
    starts = [anchor.copy(), np.zeros(p)]
    starts += [anchor + rng.standard_normal(p) for _ in range(restarts - 2)]
    best_val, best_beta = np.inf, None
    for s in starts:
        res = minimize(
            lambda b: step2_objective(data, family, gamma, anchor, b),
            s,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 50000, "maxfev": 50000},
        )
        if res.fun < best_val:
            best_val, best_beta = res.fun, res.x
    return best_beta, best_val


def small_config(r, lam=1.0, gamma=0.5, **kw):
    return MtlConfig(lam=lam, gamma=gamma, r=r, **kw)


def make_tasks(rng, T, n, p, r, h=0.0, noise_sd=0.1):
    center = random_basis(rng, p, r)
    tasks, betas = [], []
    for _ in range(T):
        A = center if h == 0.0 else random_basis(rng, p, r)
        theta = rng.standard_normal(r)
        beta = A @ theta
        tasks.append(linear_task(rng, n, p, beta, noise_sd=noise_sd))
        betas.append(beta)
    return tasks, betas, center


# ---------------------------------------------------------------------------
# prox

def test_prox_l2_closed_form_examples():
    v = np.array([3.0, 4.0])  # norm 5
    np.testing.assert_allclose(prox_l2(v, 1.0), 0.8 * v, atol=1e-15)
    np.testing.assert_allclose(prox_l2(v, 5.0), np.zeros(2), atol=1e-15)
    np.testing.assert_allclose(prox_l2(v, 0.0), v, atol=1e-15)
    np.testing.assert_array_equal(prox_l2(np.zeros(3), 2.0), np.zeros(3))


def test_prox_l2_properties(rng):
    for _ in range(50):
        p = int(rng.integers(1, 9))
        v = rng.standard_normal(p) * rng.uniform(0.1, 10)
        t = float(rng.uniform(0, 5))
        out = prox_l2(v, t)
        # shrinks the norm by exactly t, floored at zero, keeping direction
        assert abs(np.linalg.norm(out) - max(np.linalg.norm(v) - t, 0.0)) < 1e-12
        if np.linalg.norm(out) > 0:
            cos = out @ v / (np.linalg.norm(out) * np.linalg.norm(v))
            assert cos > 1.0 - 1e-12


def test_prox_l2_negative_threshold_raises():
    with pytest.raises(ValueError):
        prox_l2(np.ones(2), -0.1)


# ---------------------------------------------------------------------------
# fit_step2

def test_step2_matches_nelder_mead_linear(rng):
    for trial in range(5):
        p = int(rng.integers(1, 6))
        n = int(rng.integers(10, 30))
        beta_star = rng.standard_normal(p)
        task = linear_task(rng, n, p, beta_star, noise_sd=0.3)
        anchor = beta_star + 0.3 * rng.standard_normal(p)
        gamma = float(rng.uniform(0.1, 2.0))
        beta = fit_step2(task, Linear(), gamma, anchor)
        ours = step2_objective(task, Linear(), gamma, anchor, beta)
        _, ref = nelder_mead_step2(task, Linear(), gamma, anchor, seed=trial)
        assert ours <= ref + 1e-7
        assert abs(ours - ref) <= 1e-5


def test_step2_matches_nelder_mead_logistic(rng):
    p, n = 3, 60
    beta_star = np.array([0.8, -0.5, 0.2])
    X = rng.standard_normal((n, p))
    prob = 1.0 / (1.0 + np.exp(-(X @ beta_star)))
    Y = (rng.uniform(size=n) < prob).astype(float)
    task = TaskData(X, Y)
    anchor = beta_star + 0.2
    beta = fit_step2(task, logistic(), 0.7, anchor)
    ours = step2_objective(task, logistic(), 0.7, anchor, beta)
    _, ref = nelder_mead_step2(task, logistic(), 0.7, anchor)
    assert ours <= ref + 1e-7
    assert abs(ours - ref) <= 1e-5


def test_step2_gamma_zero_is_unpenalized_fit(rng):
    task = linear_task(rng, 40, 4, rng.standard_normal(4))
    anchor = rng.standard_normal(4)
    beta = fit_step2(task, Linear(), 0.0, anchor)
    np.testing.assert_allclose(beta, single_task_fit(Linear(), task), atol=1e-6)


def test_step2_gamma_huge_returns_anchor(rng):
    task = linear_task(rng, 40, 4, rng.standard_normal(4))
    anchor = rng.standard_normal(4)
    beta = fit_step2(task, Linear(), 1e9, anchor)
    np.testing.assert_array_equal(beta, anchor)


def test_step2_zero_design_returns_anchor():
    task = TaskData(np.zeros((5, 3)), np.zeros(5))
    anchor = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(fit_step2(task, Linear(), 1.0, anchor), anchor)


def test_step2_validates_inputs(rng):
    task = linear_task(rng, 10, 3, np.zeros(3))
    with pytest.raises(ValueError):
        fit_step2(task, Linear(), 1.0, np.zeros(4))
    with pytest.raises(ValueError):
        fit_step2(task, Linear(), -1.0, np.zeros(3))


def test_step2_never_much_worse_than_anchor_or_unpenalized(rng):
    # the safe-net heart: the solution beats both endpoints' objectives
    for trial in range(10):
        p = int(rng.integers(2, 6))
        task = linear_task(rng, 25, p, rng.standard_normal(p), noise_sd=0.5)
        anchor = rng.standard_normal(p)
        gamma = float(rng.uniform(0.05, 3.0))
        beta = fit_step2(task, Linear(), gamma, anchor)
        ours = step2_objective(task, Linear(), gamma, anchor, beta)
        assert ours <= step2_objective(task, Linear(), gamma, anchor, anchor) + 1e-9
        unpen = single_task_fit(Linear(), task)
        assert ours <= step2_objective(task, Linear(), gamma, anchor, unpen) + 1e-9


# ---------------------------------------------------------------------------
# step1_objective and fit_step1

def test_step1_objective_matches_manual_sum(rng):
    tasks, _, center = make_tasks(rng, 3, 20, 5, 2)
    bases = [center] * 3
    thetas = [rng.standard_normal(2) for _ in range(3)]
    cfg = small_config(r=2, lam=1.5)
    val = step1_objective(tasks, Linear(), bases, thetas, center, cfg.lam)
    manual = 0.0
    for task, A, th in zip(tasks, bases, thetas):
        manual += loss_value(Linear(), task, A @ th)
        manual += cfg.lam / np.sqrt(task.n) * projector_distance_spectral(A, center)
    manual /= 3
    assert abs(val - manual) < 1e-12


def test_fit_step1_trace_monotone(rng):
    for trial in range(5):
        T = int(rng.integers(2, 5))
        p = int(rng.integers(3, 8))
        r = int(rng.integers(1, 3))
        tasks, _, _ = make_tasks(rng, T, 30, p, r, h=0.3, noise_sd=0.3)
        cfg = small_config(r=r, lam=2.0)
        _, _, _, trace = fit_step1(tasks, Linear(), cfg)
        diffs = np.diff(np.asarray(trace))
        assert np.all(diffs <= 1e-12)
        assert len(trace) >= 2


def test_fit_step1_orthonormal_outputs(rng):
    tasks, _, _ = make_tasks(rng, 4, 30, 6, 2, h=0.2, noise_sd=0.2)
    cfg = small_config(r=2, lam=1.0)
    bases, thetas, center, _ = fit_step1(tasks, Linear(), cfg)
    for A in bases + [center]:
        assert np.max(np.abs(A.T @ A - np.eye(2))) <= 1e-10
    assert len(bases) == len(thetas) == 4


def test_fit_step1_snap_at_large_lambda(rng):
    tasks, _, _ = make_tasks(rng, 4, 25, 6, 2, h=0.4, noise_sd=0.3)
    cfg = small_config(r=2, lam=1e6)
    bases, _, center, _ = fit_step1(tasks, Linear(), cfg)
    for A in bases:
        assert projector_distance_spectral(A, center) <= 1e-8


def test_rl_mtl_noiseless_recovery(rng):
    # identical subspaces, no noise: estimates should hit the truth
    tasks, betas, _ = make_tasks(rng, 2, 50, 6, 1, h=0.0, noise_sd=0.0)
    cfg = small_config(r=1, lam=2.0, gamma=0.5)
    fit = rl_mtl(tasks, Linear(), cfg)
    for beta_hat, beta_star in zip(fit.beta, betas):
        assert np.linalg.norm(beta_hat - beta_star) <= 1e-4


def test_rl_mtl_fit_shape_contract(rng):
    tasks, _, _ = make_tasks(rng, 3, 30, 5, 2, h=0.1, noise_sd=0.2)
    cfg = small_config(r=2)
    fit = rl_mtl(tasks, Linear(), cfg)
    assert len(fit.beta) == len(fit.step1_beta) == 3
    assert fit.center.shape == (5, 2)
    for A, th, b in zip(fit.per_task_basis, fit.per_task_theta, fit.step1_beta):
        np.testing.assert_allclose(A @ th, b, atol=1e-12)
    assert isinstance(fit.converged, bool)
    assert len(fit.objective_trace) >= 2


def test_rl_mtl_permutation_invariance(rng):
    tasks, _, _ = make_tasks(rng, 4, 30, 6, 2, h=0.2, noise_sd=0.2)
    cfg = small_config(r=2)
    fit_a = rl_mtl(tasks, Linear(), cfg)
    fit_b = rl_mtl(tasks[::-1], Linear(), cfg)
    assert projector_distance_spectral(fit_a.center, fit_b.center) <= 1e-9
    for t in range(4):
        assert np.linalg.norm(fit_a.beta[t] - fit_b.beta[3 - t]) <= 1e-8


def test_config_validation():
    with pytest.raises(ValueError):
        MtlConfig(lam=-1.0, gamma=0.5, r=2)
    with pytest.raises(ValueError):
        MtlConfig(lam=1.0, gamma=-0.5, r=2)
    with pytest.raises(ValueError):
        MtlConfig(lam=1.0, gamma=0.5, r=0)
    with pytest.raises(ValueError):
        MtlConfig(lam=1.0, gamma=0.5, r=2, tol=0.0)
    with pytest.raises(ValueError):
        MtlConfig(lam=1.0, gamma=0.5, r=2, max_outer_iters=0)
    cfg = MtlConfig(lam=1.0, gamma=0.5, r=2)
    assert cfg.max_outer_iters == 200 and cfg.tol == 1e-7
    assert cfg.riemannian_step == 0.1 and cfg.riemannian_substeps == 5


def test_step1_objective_rejects_bad_shapes(rng):
    tasks, _, center = make_tasks(rng, 2, 15, 4, 2)
    thetas = [np.zeros(2), np.zeros(2)]
    with pytest.raises(ValueError):
        step1_objective(tasks, Linear(), [center], thetas, center, 1.0)
    with pytest.raises(ValueError):
        step1_objective(tasks, Linear(), [center, center], [np.zeros(3), np.zeros(2)], center, 1.0)


def test_rl_mtl_lambda_zero_still_descends(rng):
    tasks, _, _ = make_tasks(rng, 3, 25, 5, 2, h=0.5, noise_sd=0.3)
    cfg = small_config(r=2, lam=0.0)
    _, _, _, trace = fit_step1(tasks, Linear(), cfg)
    assert trace[-1] <= trace[0] + 1e-12
