"""Sufficient statistics from pairwise marginals, and regressions fitted from them.

For encodings ``z_[j] = A_j onehot(x_j)`` the (j, k) block of ``Z^T Z`` is
``A_j <mu_jk> A_k^T`` where ``<mu_jk>`` is the pair table shaped as a matrix,
and the (j, j) block is ``A_j diag(mu_j) A_j^T``. All pairwise tables therefore
determine ``X^T X`` and ``X^T y`` exactly.

An intercept is a constant column with no marginal of its own; its cross
moments with ``z_[j]`` are the first moments ``A_j mu_j`` and its square is
the record count, so it is added here rather than in the encoding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoding import EncodingSpec
from .marginals import as_matrix, derive_one_way
from .mechanism import MechanismOutput

COND_LIMIT = 1e10
DEFAULT_RIDGE_FLOOR = 1e-8
DEFAULT_CHEB_RANGE = 6.0


@dataclass
class SuffStats:
    ztz: np.ndarray = field(repr=False)
    n_hat: float
    intercept: bool

    @property
    def xtx(self) -> np.ndarray:
        return self.ztz[:-1, :-1]

    @property
    def xty(self) -> np.ndarray:
        return self.ztz[:-1, -1]

    @property
    def yty(self) -> float:
        return float(self.ztz[-1, -1])

    def to_json(self) -> dict:
        return {"ztz": self.ztz.tolist(), "n_hat": self.n_hat, "intercept": self.intercept}


@dataclass
class FittedModel:
    theta: np.ndarray
    task: str
    provenance: str
    intercept: bool = True
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if not np.all(np.isfinite(self.theta)):
            raise FloatingPointError(f"{self.provenance}: non-finite coefficients")

    def to_json(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "task": self.task,
            "provenance": self.provenance,
            "intercept": self.intercept,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json(cls, obj: dict) -> FittedModel:
        return cls(np.array(obj["theta"]), obj["task"], obj["provenance"], obj.get("intercept", True), obj.get("diagnostics", {}))

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def load(cls, path: str | Path) -> FittedModel:
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def averaged_one_way(output: MechanismOutput, j: int) -> np.ndarray:
    """Mean of the one-way marginals of ``j`` implied by every pair containing it."""
    rows = [derive_one_way(t, j).values for key, t in output.tables.items() if j in key]
    return np.mean(rows, axis=0)


def reconstruct_ztz(output: MechanismOutput, spec: EncodingSpec, intercept: bool = True) -> SuffStats:
    """Assemble ``Z^T Z`` (target last, optional leading intercept) from pair tables."""
    domain = spec.domain
    if output.domain.names != domain.names or list(output.domain.sizes) != list(domain.sizes):
        raise ValueError("marginals were released over a different domain than the encoding spec")
    A = spec.transforms
    d = len(A)
    offsets = np.concatenate([[0], np.cumsum(spec.widths)])
    blocks = [slice(offsets[j], offsets[j + 1]) for j in range(d)]
    G = np.zeros((offsets[-1], offsets[-1]))
    first = np.zeros(offsets[-1])

    for j in range(d):
        for k in range(j + 1, d):
            try:
                tab = output.tables[(j, k)]
            except KeyError:
                raise ValueError(f"no marginal for attribute pair {(j, k)}") from None
            M = as_matrix(tab)
            if M.shape != (A[j].shape[1], A[k].shape[1]):
                raise ValueError(f"pair {(j, k)}: table shape {M.shape} does not match encodings")
            B = A[j] @ M @ A[k].T
            G[blocks[j], blocks[k]] = B
            G[blocks[k], blocks[j]] = B.T
        mu = averaged_one_way(output, j)
        G[blocks[j], blocks[j]] = (A[j] * mu) @ A[j].T
        first[blocks[j]] = A[j] @ mu

    order = spec.column_order
    ztz = G[np.ix_(order, order)]
    if intercept:
        aug = np.empty((len(order) + 1, len(order) + 1))
        aug[0, 0] = output.n_hat
        aug[0, 1:] = aug[1:, 0] = first[order]
        aug[1:, 1:] = ztz
        ztz = aug
    return SuffStats(ztz, float(output.n_hat), intercept)


def ridge_solve(xtx: np.ndarray, xty: np.ndarray, ridge_floor: float = DEFAULT_RIDGE_FLOOR):
    """Solve ``(xtx + lam I) theta = xty`` with the smallest adequate ``lam``.

    ``lam`` is 0 when ``xtx`` has condition number below ``COND_LIMIT``;
    otherwise it is the first of ``ridge_floor * 2**k`` that brings the
    shifted matrix under the limit. Returns ``(theta, diagnostics)``.
    """
    xtx = np.asarray(xtx, dtype=float)
    xty = np.asarray(xty, dtype=float)
    if xtx.ndim != 2 or xtx.shape[0] != xtx.shape[1] or xty.shape != (xtx.shape[0],):
        raise ValueError(f"incompatible shapes {xtx.shape} and {xty.shape}")
    if not (np.all(np.isfinite(xtx)) and np.all(np.isfinite(xty))):
        raise FloatingPointError("sufficient statistics contain non-finite values")
    sym = 0.5 * (xtx + xtx.T)
    ev = np.linalg.eigvalsh(sym)

    def cond(lam):
        a = np.abs(ev + lam)
        return math.inf if a.min() == 0 else float(a.max() / a.min())

    lam, steps = 0.0, 0
    c0 = cond(0.0)
    if c0 >= COND_LIMIT:
        if ridge_floor <= 0:
            theta = np.linalg.lstsq(xtx, xty, rcond=None)[0]
            return theta, {"condition_number": c0, "ridge": 0.0, "ridge_steps": 0, "solver": "lstsq"}
        lam = ridge_floor
        while cond(lam) >= COND_LIMIT and steps < 2000:
            lam *= 2.0
            steps += 1
    theta = np.linalg.solve(xtx + lam * np.eye(len(xty)), xty)
    return theta, {"condition_number": c0, "ridge": lam, "ridge_steps": steps, "solver": "solve"}


def solve_linear(stats: SuffStats, ridge_floor: float = DEFAULT_RIDGE_FLOOR, provenance: str = "dd-ssp") -> FittedModel:
    theta, diag = ridge_solve(stats.xtx, stats.xty, ridge_floor)
    diag["solver_iterations"] = 0
    return FittedModel(theta, "linear", provenance, stats.intercept, diag)


def log_sigmoid(s):
    """phi(s) = -log(1 + exp(-s)), computed stably."""
    return -np.logaddexp(0.0, -np.asarray(s, dtype=float))


@dataclass(frozen=True)
class ChebCoeffs:
    b0: float
    b1: float
    b2: float
    R: float
    max_abs_error: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.b0 + self.b1 * s + self.b2 * s * s


def chebyshev_coeffs(R: float = DEFAULT_CHEB_RANGE, degree: int = 2, nodes: int = 128) -> ChebCoeffs:
    """Degree-2 Chebyshev projection of ``log_sigmoid`` on [-R, R], in monomial form.

    The Chebyshev coefficients ``c_k`` are computed with Chebyshev-Gauss
    quadrature at ``nodes`` points; with ``t = s / R`` the expansion
    ``c0 + c1 T1(t) + c2 T2(t)`` becomes ``b0 + b1 s + b2 s^2``. The reported
    error is the max over a symmetric odd grid of 10001 points, which contains
    s = 0 where the error of this fit peaks.
    """
    if degree != 2:
        raise ValueError("only the degree-2 approximation is supported")
    if R <= 0:
        raise ValueError("R must be positive")
    if nodes < 64:
        raise ValueError("use at least 64 quadrature nodes")
    angles = np.pi * (np.arange(nodes) + 0.5) / nodes
    f = log_sigmoid(R * np.cos(angles))
    c = [2.0 / nodes * np.dot(f, np.cos(k * angles)) for k in range(3)]
    c[0] *= 0.5
    b0 = c[0] - c[2]
    b1 = c[1] / R
    b2 = 2.0 * c[2] / R**2
    grid = np.linspace(-R, R, 10_001)
    err = float(np.max(np.abs(b0 + b1 * grid + b2 * grid**2 - log_sigmoid(grid))))
    return ChebCoeffs(float(b0), float(b1), float(b2), float(R), err)


def approx_loglik(theta, stats: SuffStats, coeffs: ChebCoeffs) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(stats.n_hat * coeffs.b0 + coeffs.b1 * stats.xty @ theta + coeffs.b2 * theta @ stats.xtx @ theta)


def solve_logistic_approx(
    stats: SuffStats,
    coeffs: ChebCoeffs | None = None,
    ridge_floor: float = DEFAULT_RIDGE_FLOOR,
    provenance: str = "dd-ssp",
) -> FittedModel:
    """Maximise the quadratic surrogate log-likelihood.

    The maximiser of ``n b0 + b1 xty.theta + b2 theta' xtx theta`` with b2 < 0
    is ``-(b1 / 2 b2) xtx^{-1} xty``. Noisy ``xtx`` may be indefinite, in which
    case this is a stationary point rather than a maximum; the smallest
    eigenvalue is reported so callers can tell.
    """
    coeffs = coeffs or chebyshev_coeffs()
    if coeffs.b2 >= 0:
        raise ValueError("quadratic coefficient must be negative")
    base, diag = ridge_solve(stats.xtx, stats.xty, ridge_floor)
    diag["solver_iterations"] = 0
    diag["min_eigenvalue"] = float(np.linalg.eigvalsh(0.5 * (stats.xtx + stats.xtx.T))[0])
    return FittedModel(-(coeffs.b1 / (2.0 * coeffs.b2)) * base, "logistic", provenance, stats.intercept, diag)


def design(X: np.ndarray, intercept: bool) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.column_stack([np.ones(len(X)), X]) if intercept else X


def predict(model: FittedModel, X) -> np.ndarray:
    """Linear predictions, or P(y = +1) scores for logistic models."""
    D = design(X, model.intercept)
    if D.ndim != 2 or D.shape[1] != len(model.theta):
        raise ValueError(f"X has {D.shape[-1]} columns (with intercept), model expects {len(model.theta)}")
    s = D @ model.theta
    if model.task == "logistic":
        return 1.0 / (1.0 + np.exp(-s))
    return s


def fit_from_marginals(
    output: MechanismOutput,
    spec: EncodingSpec,
    intercept: bool = True,
    ridge_floor: float = DEFAULT_RIDGE_FLOOR,
    cheb_range: float = DEFAULT_CHEB_RANGE,
) -> FittedModel:
    """Fit the spec's task using nothing but the released marginals."""
    stats = reconstruct_ztz(output, spec, intercept)
    if spec.task == "logistic":
        model = solve_logistic_approx(stats, chebyshev_coeffs(cheb_range), ridge_floor)
    else:
        model = solve_linear(stats, ridge_floor)
    model.diagnostics["mechanism"] = output.mechanism
    model.diagnostics["rho_spent"] = output.ledger.rho_spent
    return model
