"""Exact spectral solution, a network-free descent check, probing and alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .core_math import make_rng, principal_angle_cosines, sym_eig
from .network import Network, forward
from .objectives import graph_energy, kernel_matrix, laplacian, orthogonality_penalty


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch


@dataclass
class SpectralOracle:
    eigenvalues: np.ndarray  # full ascending spectrum of L
    embedding: np.ndarray  # (n, p), (1/n) Phi^T Phi = I
    includes_constant: bool


@dataclass
class ProbeModel:
    weights: np.ndarray  # (p + 1, n_classes); last row is the intercept

    def scores(self, features) -> np.ndarray:
        F = np.asarray(features, dtype=np.float64)
        return F @ self.weights[:-1] + self.weights[-1]

    def predict(self, features) -> np.ndarray:
        # argmax returns the first maximum, i.e. ties go to the smallest class
        return np.argmax(self.scores(features), axis=1)


def build_laplacian(points, sigma: float) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        raise ValueError("need at least two points")
    return laplacian(kernel_matrix(points, sigma))


def spectral_embedding(points, sigma: float, p: int, drop_constant: bool = True) -> SpectralOracle:
    n = len(points)
    if not n > p + 1:
        raise ValueError(f"need n > p + 1, got n={n}, p={p}")
    L = build_laplacian(points, sigma)
    if drop_constant:
        # push the constant vector above the spectrum so it cannot mix with
        # other null vectors when the graph is (nearly) disconnected
        shift = 2.0 * np.abs(L).sum(axis=1).max() + 1.0
        w, V = sym_eig(L + shift / n * np.ones((n, n)))
        w = np.concatenate([[0.0], w[:-1]])
        cols = V[:, :p]
    else:
        w, V = sym_eig(L)
        cols = V[:, :p]
    # fix signs so the output does not depend on LAPACK's choice
    signs = np.sign(cols[np.argmax(np.abs(cols), axis=0), np.arange(p)])
    return SpectralOracle(w, np.sqrt(n) * cols * signs, not drop_constant)


def free_embedding_descent(points, sigma: float, p: int, lam: float = 1.0, steps: int = 20000,
                           seed: int = 0, method: str = "lbfgs", step_size: float | None = None,
                           center: bool = True, history: list | None = None) -> np.ndarray:
    """Minimise ``graph_energy(Phi) + lam * penalty(Phi)`` directly over the entries of Phi.

    ``method="lbfgs"`` runs quasi-Newton descent (``steps`` caps the iterations);
    ``method="gd"`` runs fixed-step gradient descent, with the step defaulting to
    the inverse of a curvature bound near the constraint set. Plain GD is very
    slow when eigenvalues near the p-th are clustered. ``history``, if given,
    receives ``|Phi|_F`` after every GD step.
    """
    X = np.asarray(points, dtype=np.float64)
    n = len(X)
    if n <= p:
        raise ValueError(f"need n > p, got n={n}, p={p}")
    L = laplacian(kernel_matrix(X, sigma))
    Phi = make_rng(seed).standard_normal((n, p))

    def value_and_grad(Phi):
        LPhi = L @ Phi
        value = 2.0 / n**2 * np.sum(Phi * LPhi)
        grad = 4.0 / n**2 * LPhi
        if lam > 0:
            pen, g_pen = orthogonality_penalty(Phi, center=center)
            value += lam * pen
            grad += lam * g_pen
        return value, grad

    if method == "lbfgs":
        res = minimize(lambda v: _flat_pair(value_and_grad(v.reshape(n, p))), Phi.ravel(), jac=True,
                       method="L-BFGS-B", options={"maxiter": steps, "ftol": 1e-16, "gtol": 1e-14, "maxcor": 30})
        Phi = res.x.reshape(n, p)
        if not np.all(np.isfinite(Phi)):
            raise TrainingError("free embedding descent diverged", res.nit)
        return Phi
    if method != "gd":
        raise ValueError(f"unknown method {method!r}")
    if step_size is None:
        graph_curv = 4.0 / n**2 * 2.0 * L.diagonal().max()
        step_size = 0.5 / (graph_curv + 12.0 * lam / n)
    for step in range(steps):
        Phi = Phi - step_size * value_and_grad(Phi)[1]
        if history is not None:
            history.append(float(np.linalg.norm(Phi)))
        if not np.all(np.isfinite(Phi)):
            raise TrainingError("free embedding descent diverged", step)
    return Phi


def _flat_pair(pair):
    value, grad = pair
    return value, grad.ravel()


def probe_fit(features, labels, ridge: float = 1e-6, n_classes: int = 4) -> ProbeModel:
    """One-vs-rest ridge least squares on one-hot targets, intercept appended."""
    F = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    missing = sorted(set(range(n_classes)) - set(np.unique(y).tolist()))
    if missing:
        raise ValueError(f"classes {missing} missing from training labels")
    A = np.column_stack([F, np.ones(len(F))])
    Y = np.eye(n_classes)[y]
    w, V = sym_eig(A.T @ A)
    inv = V / (w + ridge) @ V.T
    return ProbeModel(inv @ (A.T @ Y))


def probe_accuracy(model: ProbeModel, features, labels) -> float:
    return float(np.mean(model.predict(features) == np.asarray(labels)))


def with_constant(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    return np.column_stack([np.ones(len(M)), M])


def align(learned, oracle, append_constant: bool = True) -> np.ndarray:
    """Principal-angle cosines between the column spans, optionally modulo constants."""
    if len(learned) != len(oracle):
        raise ValueError("learned and oracle features must be evaluated on the same points")
    if append_constant:
        learned, oracle = with_constant(learned), with_constant(oracle)
    return principal_angle_cosines(learned, oracle)


def off_manifold_magnitude(net: Network, grid, data, margin: float):
    """Mean feature norm on grid points near the data (distance <= margin) and far from it."""
    if not margin > 0:
        raise ValueError("margin must be > 0")
    grid = np.asarray(grid, dtype=np.float64)
    dist, _ = cKDTree(np.asarray(data, dtype=np.float64)).query(grid)
    near = dist <= margin
    if not near.any():
        raise ValueError("on-manifold partition is empty")
    if near.all():
        raise ValueError("off-manifold partition is empty")
    norms = np.linalg.norm(forward(net, grid), axis=1)
    return float(norms[near].mean()), float(norms[~near].mean())


def covariance_top_eigenvalue(features) -> float:
    F = np.asarray(features, dtype=np.float64)
    F = F - F.mean(axis=0)
    return float(sym_eig(F.T @ F / len(F))[0][-1])


__all__ = [
    "SpectralOracle", "ProbeModel", "TrainingError", "build_laplacian", "spectral_embedding",
    "free_embedding_descent", "probe_fit", "probe_accuracy", "align", "with_constant",
    "off_manifold_magnitude", "covariance_top_eigenvalue", "graph_energy",
]
