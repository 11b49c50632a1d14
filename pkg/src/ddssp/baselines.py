"""Data-independent private baselines and non-private references.

AdaSSP perturbs ``X^T X`` and ``X^T y`` directly and adds a ridge chosen from
a privately estimated smallest eigenvalue. Objective perturbation adds a
random linear term and a quadratic regulariser to the logistic loss. Both
calibrate noise to the feature-norm bound, so they benefit from the tighter
one-hot bound in :func:`ddssp.encoding.feature_bound`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .privacy import PrivacyBudget
from .ssp import FittedModel, design, ridge_solve

GRAD_TOL = 1e-8


class BoundViolation(ValueError):
    """A row exceeds the declared norm bound, which would void the privacy guarantee."""


def sensitivity_xtx(x_bound: float) -> float:
    return x_bound**2


def sensitivity_xty(x_bound: float, y_bound: float) -> float:
    return x_bound * y_bound


@dataclass(frozen=True)
class AdaSSPParams:
    budget: PrivacyBudget
    x_bound: float
    y_bound: float
    rho_fail: float = 0.05

    def __post_init__(self):
        if not 0 < self.rho_fail < 1:
            raise ValueError("rho_fail must lie in (0, 1)")
        if self.x_bound <= 0 or self.y_bound <= 0:
            raise ValueError("bounds must be positive")


def _with_intercept(X, x_bound, intercept):
    if not intercept:
        return np.asarray(X, dtype=float), x_bound
    return design(X, True), math.sqrt(x_bound**2 + 1.0)


def _check_rows(X, x_bound, y=None, y_bound=None):
    slack = 1.0 + 1e-9
    norms = np.linalg.norm(X, axis=1)
    if norms.size and norms.max() > x_bound * slack:
        raise BoundViolation(f"row norm {norms.max():.6g} exceeds feature bound {x_bound:.6g}")
    if y is not None and y.size and np.abs(y).max() > y_bound * slack:
        raise BoundViolation(f"|y| = {np.abs(y).max():.6g} exceeds target bound {y_bound:.6g}")


def adassp(X, y, params: AdaSSPParams, rng: np.random.Generator, intercept: bool = False) -> FittedModel:
    """AdaSSP with the epsilon/3 and log(6/delta) constants of its published pseudocode."""
    X, B = _with_intercept(X, params.x_bound, intercept)
    y = np.asarray(y, dtype=float)
    By = params.y_bound
    _check_rows(X, B, y, By)
    n, d = X.shape
    eps3 = params.budget.epsilon / 3.0
    L = math.log(6.0 / params.budget.delta)

    xtx = X.T @ X
    xty = X.T @ y
    lam_min = float(np.linalg.eigvalsh(xtx)[0])
    lam_min_priv = max(lam_min + math.sqrt(L) / eps3 * B**2 * rng.standard_normal() - L / eps3 * B**2, 0.0)
    lam = max(0.0, math.sqrt(d * L * math.log(2.0 * d**2 / params.rho_fail)) * B**2 / eps3 - lam_min_priv)

    upper = np.triu(rng.standard_normal((d, d)))
    Zsym = upper + np.triu(upper, 1).T
    xtx_hat = xtx + math.sqrt(L) * B**2 / eps3 * Zsym
    xty_hat = xty + math.sqrt(L) * B * By / eps3 * rng.standard_normal(d)
    try:
        theta = np.linalg.solve(xtx_hat + lam * np.eye(d), xty_hat)
        solver = "solve"
    except np.linalg.LinAlgError:
        theta = np.linalg.lstsq(xtx_hat + lam * np.eye(d), xty_hat, rcond=None)[0]
        solver = "lstsq"
    diag = {"ridge": lam, "lambda_min_private": lam_min_priv, "solver": solver, "solver_iterations": 0}
    return FittedModel(theta, "linear", "adassp", intercept, diag)


def _logistic_parts(theta, X, y):
    margins = y * (X @ theta)
    loss = np.logaddexp(0.0, -margins).sum()
    p = 0.5 * (1.0 - np.tanh(0.5 * margins))  # sigmoid(-margin), overflow-free
    grad = -(X.T @ (y * p))
    hess = (X * (p * (1.0 - p))[:, None]).T @ X
    return loss, grad, hess


def minimize_logistic(X, y, quad: float = 0.0, linear=None, tol: float = GRAD_TOL, max_iter: int = 200):
    """Minimise ``(1/n) [sum log(1+exp(-y x.theta)) + quad/2 |theta|^2 + linear.theta]``.

    Damped Newton with Armijo backtracking. Stops once the gradient norm of the
    scaled objective is at most ``tol``. Returns ``(theta, info)`` where
    ``info`` holds the iteration count, final gradient norm and the objective
    value after every iteration.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    lin = np.zeros(d) if linear is None else np.asarray(linear, dtype=float)

    def parts(th):
        loss, g, H = _logistic_parts(th, X, y)
        f = (loss + 0.5 * quad * th @ th + lin @ th) / n
        return f, (g + quad * th + lin) / n, (H + quad * np.eye(d)) / n

    theta = np.zeros(d)
    f, g, H = parts(theta)
    history = [f]
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g) <= tol:
            it -= 1
            break
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, g, rcond=None)[0]
        if g @ step >= 0:  # not a descent direction; fall back to steepest descent
            step = -g
        t = 1.0
        while True:
            f_new, g_new, H_new = parts(theta + t * step)
            if f_new <= f + 1e-4 * t * (g @ step) or t < 1e-12:
                break
            t *= 0.5
        theta = theta + t * step
        f, g, H = f_new, g_new, H_new
        history.append(f)
    gnorm = float(np.linalg.norm(g))
    return theta, {"solver_iterations": it, "grad_norm": gnorm, "objective_history": history}


def objpert_logistic(
    X,
    y,
    budget: PrivacyBudget,
    x_bound: float,
    rng: np.random.Generator,
    l2: float = 0.0,
    intercept: bool = False,
) -> FittedModel:
    """Generalised objective perturbation for logistic regression ((eps, delta) variant).

    The regulariser is ``r(theta) = l2/2 |theta|^2``. Delta is set to its lower
    limit ``B^2 / (2 eps)``.
    """
    X, B = _with_intercept(X, x_bound, intercept)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be in {-1, +1}")
    _check_rows(X, B)
    eps, delta = budget.epsilon, budget.delta
    Delta = B**2 / (2.0 * eps)
    scale = math.sqrt(B**2 * (8.0 * math.log(2.0 / delta) + 4.0 * eps) / eps**2)
    b = rng.normal(0.0, scale, size=X.shape[1])
    theta, info = minimize_logistic(X, y, quad=Delta + l2, linear=b)
    if info["grad_norm"] > GRAD_TOL:
        raise RuntimeError(f"objective perturbation did not converge (gradient norm {info['grad_norm']:.3g})")
    info.pop("objective_history")
    info.update(Delta=Delta, noise_scale=scale)
    return FittedModel(theta, "logistic", "objpert", intercept, info)


def nonprivate_ols(X, y, intercept: bool = False) -> FittedModel:
    X = design(X, intercept)
    theta, diag = ridge_solve(X.T @ X, X.T @ np.asarray(y, dtype=float))
    diag["solver_iterations"] = 0
    return FittedModel(theta, "linear", "nonprivate", intercept, diag)


def nonprivate_logistic(X, y, intercept: bool = False, tol: float = GRAD_TOL) -> FittedModel:
    X = design(X, intercept)
    theta, info = minimize_logistic(X, y, tol=tol)
    return FittedModel(theta, "logistic", "nonprivate", intercept, info)
