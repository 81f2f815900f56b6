"""Local objective terms and their proximal-style x-updates.

Each node owns one term of a sum ``F(x) = sum_i f_i(x)`` and must repeatedly
solve ``argmin_x f_i(x) + lam^T x + (rho/2)||x - z||^2``. Least squares gets a
closed form; the logistic loss gets a damped Newton solve. The l1 penalty
never touches the x-update: it is applied through shrinkage in the shared
z-update, with the intercept riding as a final unpenalized coordinate.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure


class LocalObjective(ABC):
    """One node's smooth term f_i."""

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def evaluate(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def solve_x_update(self, z: np.ndarray, lam: np.ndarray,
                       rho: float) -> np.ndarray:
        """argmin_x f(x) + lam^T x + (rho/2) ||x - z||^2."""


class LeastSquaresObjective(LocalObjective):
    """f(x) = 0.5 * ||A x - b||^2 with a closed-form x-update."""

    def __init__(self, mat, rhs):
        self.mat = np.atleast_2d(np.asarray(mat, dtype=float))
        self.rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        self._gram = self.mat.T @ self.mat
        self._atb = self.mat.T @ self.rhs

    @property
    def dim(self) -> int:
        return self.mat.shape[1]

    def evaluate(self, x) -> float:
        r = self.mat @ x - self.rhs
        return 0.5 * float(r @ r)

    def gradient(self, x) -> np.ndarray:
        return self.mat.T @ (self.mat @ x - self.rhs)

    def solve_x_update(self, z, lam, rho) -> np.ndarray:
        return ls_x_update(self.mat, self.rhs, z, lam, rho,
                           gram=self._gram, atb=self._atb)


def ls_x_update(mat, rhs, z, lam, rho, *, gram=None, atb=None) -> np.ndarray:
    """Closed-form solve of (A^T A + rho I) x = A^T b - lam + rho z."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    p = mat.shape[1]
    if gram is None:
        gram = mat.T @ mat
    if atb is None:
        atb = mat.T @ np.atleast_1d(np.asarray(rhs, dtype=float))
    lhs = gram + rho * np.eye(p)
    return np.linalg.solve(lhs, atb - lam + rho * np.asarray(z, dtype=float))


class LogisticObjective(LocalObjective):
    """f(x) = sum_k log(1 + exp(-b_k * (a_k^T w + v))) over this node's rows.

    The decision variable is x = [w, v] with the intercept v appended, so the
    design matrix silently gains a column of ones.
    """

    def __init__(self, features, labels, intercept: bool = True):
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if intercept:
            features = np.hstack([features, np.ones((features.shape[0], 1))])
        self.design = features
        self.labels = np.atleast_1d(np.asarray(labels, dtype=float))
        self.intercept = intercept

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    def evaluate(self, x) -> float:
        margins = self.labels * (self.design @ x)
        return float(np.sum(np.logaddexp(0.0, -margins)))

    def gradient(self, x) -> np.ndarray:
        margins = self.labels * (self.design @ x)
        sig = 1.0 / (1.0 + np.exp(margins))
        return self.design.T @ (-self.labels * sig)

    def hessian(self, x) -> np.ndarray:
        margins = self.labels * (self.design @ x)
        sig = 1.0 / (1.0 + np.exp(margins))
        weights = sig * (1.0 - sig)
        return (self.design * weights[:, None]).T @ self.design

    def solve_x_update(self, z, lam, rho) -> np.ndarray:
        return logistic_x_update(self, z, lam, rho)


def logistic_x_update(objective: LogisticObjective, z, lam, rho, *,
                      tol: float = 1e-6, max_iter: int = 200) -> np.ndarray:
    """Damped Newton solve of the logistic x-update to gradient norm <= tol.

    The default tol sits above the float64 noise floor of the composite
    value (roughly 1e-8 gradient norm at a few hundred samples), where the
    line search can no longer resolve a decrease. If that floor is hit
    anyway while the gradient is within 1e3*tol, the iterate is returned as
    converged-to-precision. Raises :class:`SolverFailure` once the
    iteration budget is exhausted.
    """
    z = np.asarray(z, dtype=float)
    lam = np.asarray(lam, dtype=float)
    x = z.copy()  # the penalty anchors the solution near z

    def composite_grad(xv):
        return objective.gradient(xv) + lam + rho * (xv - z)

    def composite_value(xv):
        d = xv - z
        return objective.evaluate(xv) + float(lam @ xv) + 0.5 * rho * float(d @ d)

    grad = composite_grad(x)
    for _ in range(max_iter):
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            return x
        hess = objective.hessian(x) + rho * np.eye(objective.dim)
        direction = np.linalg.solve(hess, grad)
        slope = float(grad @ direction)
        value = composite_value(x)
        step = 1.0
        for _ in range(60):
            candidate = x - step * direction
            if composite_value(candidate) <= value - 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            if grad_norm <= 1e3 * tol:
                return x  # descent direction, but float64 is flat here
            raise SolverFailure(f"no representable decrease at "
                                f"|grad| = {grad_norm:.3e}")
        x = x - step * direction
        grad = composite_grad(x)
    if float(np.linalg.norm(grad)) <= tol:
        return x
    raise SolverFailure(f"Newton stalled after {max_iter} iterations "
                        f"(|grad| = {float(np.linalg.norm(grad)):.3e})")


def soft_threshold(values, kappa: float) -> np.ndarray:
    """Componentwise shrinkage toward zero by kappa (the l1 proximal map)."""
    values = np.asarray(values, dtype=float)
    return np.sign(values) * np.maximum(np.abs(values) - kappa, 0.0)


def l1_z_update(average_seed, kappa: float, penalized=None) -> np.ndarray:
    """Shared z-update for the l1-penalized problem.

    Applies shrinkage to the penalized coordinates of the seed average and
    passes the rest (the intercept) through unchanged. Every node computes
    this from the same average, so the results are identical across nodes.
    """
    average_seed = np.asarray(average_seed, dtype=float)
    if penalized is None:
        return soft_threshold(average_seed, kappa)
    shrunk = soft_threshold(average_seed, kappa)
    return np.where(np.asarray(penalized, dtype=bool), shrunk, average_seed)


@dataclass(frozen=True)
class L1Regularizer:
    """Weight mu on ||w||_1; the intercept coordinate stays unpenalized."""

    mu: float

    def kappa(self, n: int, rho: float) -> float:
        # the z-update solves argmin mu*||z||_1 + (n*rho/2)*||z - mean||^2
        return self.mu / (n * rho)

    def penalized_mask(self, dim: int, intercept: bool = True) -> np.ndarray:
        mask = np.ones(dim, dtype=bool)
        if intercept:
            mask[-1] = False
        return mask


def compute_mu_max(features, labels) -> float:
    """Smallest l1 weight that zeroes every feature coefficient.

    At the intercept-only optimum v* = log(m+/m-), the feature-block gradient
    is ``sum_k -b_k * sigmoid(-b_k v*) a_k``; its infinity norm is the
    threshold above which shrinkage kills all features.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=float))
    pos = int(np.sum(labels > 0))
    neg = int(np.sum(labels < 0))
    if pos == 0 or neg == 0:
        raise ValueError("both classes must be present to size the penalty")
    v_star = float(np.log(pos / neg))
    sig = 1.0 / (1.0 + np.exp(labels * v_star))
    grad = features.T @ (-labels * sig)
    return float(np.max(np.abs(grad)))


def make_least_squares_instance(n: int, p: int, q: int, seed: int,
                                noise: float = 1.0):
    """Seeded per-node least-squares terms around a shared ground truth."""
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal(p)
    objectives = []
    for _ in range(n):
        mat = rng.standard_normal((q, p))
        rhs = mat @ x_true + noise * rng.standard_normal(q)
        objectives.append(LeastSquaresObjective(mat, rhs))
    return objectives, x_true


def make_logistic_instance(m: int, p: int, seed: int, noise: float = 0.1):
    """Seeded binary-labelled data: standard normal features, noisy margins."""
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((m, p))
    w_true = rng.standard_normal(p)
    v_true = float(rng.standard_normal())
    margins = features @ w_true + v_true + noise * rng.standard_normal(m)
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    return features, labels


def split_rows(features, labels, n: int):
    """Deal rows into n near-equal contiguous shards."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=float))
    bounds = np.linspace(0, features.shape[0], n + 1).astype(int)
    return [(features[a:b], labels[a:b]) for a, b in zip(bounds, bounds[1:])]


def save_dataset(path, features, labels) -> None:
    """Write one example per row, label column last, with a header."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=float))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(features.shape[1])]
                        + ["label"])
        for row, label in zip(features, labels):
            writer.writerow([f"{v:.17g}" for v in row] + [f"{label:.17g}"])


def load_dataset(path):
    """Inverse of :func:`save_dataset`; returns (features, labels)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        rows = [[float(cell) for cell in row] for row in reader]
    data = np.asarray(rows, dtype=float)
    return data[:, :-1], data[:, -1]
