"""Variation energies, the orthonormality penalty, and their gradients.

Energies that go through a network return ``(value, grads)`` with ``grads``
ordered like ``Network.params``. Energies on a frozen embedding matrix return
plain floats (plus the embedding gradient for the penalty).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .network import Network, backward, run


class ObjectiveKind(str, enum.Enum):
    SSL = "ssl"
    GRAPH = "graph"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, value) -> ObjectiveKind:
        if isinstance(value, cls):
            return value
        aliases = {"graphlaplacian": "graph", "graph_laplacian": "graph", "energy": "dirichlet"}
        key = str(value).lower()
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class EnergyValue:
    objective: float
    penalty: float
    lam: float

    @property
    def total(self) -> float:
        return self.objective + self.lam * self.penalty


def _positive_sigma(sigma):
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")


def gaussian_kernel(x, x2, sigma: float):
    """``exp(-|x - x2|^2 / sigma^2)``; broadcasts over leading axes."""
    _positive_sigma(sigma)
    d = np.asarray(x, dtype=np.float64) - np.asarray(x2, dtype=np.float64)
    return np.exp(-np.sum(d * d, axis=-1) / sigma**2)


def kernel_matrix(points, sigma: float) -> np.ndarray:
    _positive_sigma(sigma)
    X = np.asarray(points, dtype=np.float64)
    sq = np.sum(X * X, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    return np.exp(-d2 / sigma**2)


def laplacian(W) -> np.ndarray:
    return np.diag(W.sum(axis=1)) - W


def graph_energy(embedding, W) -> float:
    """``(1/n^2) sum_ij W_ij |Phi_i - Phi_j|^2`` computed as ``(2/n^2) tr(Phi^T L Phi)``."""
    Phi = np.asarray(embedding, dtype=np.float64)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (len(Phi), len(Phi)):
        raise ValueError(f"kernel shape {W.shape} does not match {len(Phi)} rows")
    if not np.allclose(W, W.T, rtol=0, atol=1e-12):
        raise ValueError("kernel matrix is not symmetric")
    n = len(Phi)
    # the trace form can round to a tiny negative number on constant features
    return max(float(2.0 / n**2 * np.sum(Phi * (laplacian(W) @ Phi))), 0.0)


def graph_energy_direct(embedding, W) -> float:
    """Double-sum form of :func:`graph_energy`, O(n^2 p) memory."""
    Phi = np.asarray(embedding, dtype=np.float64)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    diff = Phi[:, None, :] - Phi[None, :, :]
    return float(np.sum(W * np.sum(diff * diff, axis=-1)) / len(Phi) ** 2)


def orthogonality_penalty(embedding, center: bool = False):
    """``|C - I|_F^2`` with ``C = Phi^T Phi / n``, and its gradient ``(4/n) Phi (C - I)``.

    With ``center=True`` the column means are removed first, so ``C`` is the
    feature covariance and constant features are not rewarded.
    """
    Phi = np.asarray(embedding, dtype=np.float64)
    n, p = Phi.shape
    if n < p:
        raise ValueError(f"need n >= p for an orthonormal embedding, got n={n}, p={p}")
    if center:
        Phi = Phi - Phi.mean(axis=0)
    R = Phi.T @ Phi / n - np.eye(p)
    # centring is an orthogonal projection applied to Phi; its adjoint keeps the
    # gradient in the same (already centred) form
    return float(np.sum(R * R)), 4.0 / n * Phi @ R


def smoothed_energy(embedding, points, sigma: float) -> float:
    """Plug-in estimate of ``E |d(X) phi(X) - (k * phi)(X)|^2`` with ``d = k * 1``."""
    Phi = np.asarray(embedding, dtype=np.float64)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    n = len(Phi)
    if n < 2:
        raise ValueError("need at least two points")
    W = kernel_matrix(points, sigma)
    d = W.sum(axis=1) / n
    R = d[:, None] * Phi - W @ Phi / n
    return float(np.mean(np.sum(R * R, axis=1)))


def _nonempty(batch) -> np.ndarray:
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("empty batch")
    return X


def ssl_terms(net: Network, batch, sigma: float, xi):
    """Value, feature-gradient pieces, and caches for the SSL energy at fixed noise ``xi``."""
    X = _nonempty(batch)
    _positive_sigma(sigma)
    m = len(X)
    clean = run(net, X)
    noisy = run(net, X + sigma * xi)
    diff = clean.out - noisy.out
    value = float(np.sum(diff * diff) / m)
    return value, clean, noisy, 2.0 / m * diff


def ssl_energy(net: Network, batch, sigma: float, rng=None, xi=None):
    """``(1/m) sum_i |phi(X_i) - phi(X_i + sigma xi_i)|^2`` with fresh Gaussian ``xi``.

    Pass ``xi`` explicitly to freeze the augmentation (gradient checks).
    """
    X = _nonempty(batch)
    if xi is None:
        xi = rng.standard_normal(X.shape)
    value, clean, noisy, g = ssl_terms(net, X, sigma, xi)
    g1 = backward(net, clean, g_out=g)
    g2 = backward(net, noisy, g_out=-g)
    return value, [a + b for a, b in zip(g1, g2)]


def graph_energy_grad(net: Network, batch, sigma: float):
    X = _nonempty(batch)
    if len(X) < 2:
        raise ValueError("graph energy needs a batch of at least 2 points")
    cache = run(net, X)
    value, g = _graph_value_and_feature_grad(cache.out, kernel_matrix(X, sigma))
    return value, backward(net, cache, g_out=g)


def _graph_value_and_feature_grad(Phi, W):
    n = len(Phi)
    LPhi = laplacian(W) @ Phi
    return max(float(2.0 / n**2 * np.sum(Phi * LPhi)), 0.0), 4.0 / n**2 * LPhi


def dirichlet_energy(net: Network, batch):
    """``(1/m) sum_i |D phi(X_i)|_F^2`` and its (second-order) parameter gradient."""
    X = _nonempty(batch)
    cache = run(net, X, tangents=True)
    m = len(X)
    value = float(np.sum(cache.jac**2) / m)
    return value, backward(net, cache, g_jac=2.0 / m * cache.jac)


def objective_and_penalty(net: Network, kind: ObjectiveKind | None, batch, sigma: float, rng,
                          center: bool = True, objective_scale: float = 1.0, penalty_scale: float = 1.0):
    """Objective and penalty on one batch, with the gradient of
    ``objective_scale * E + penalty_scale * Omega`` from a single reverse pass.

    The penalty always uses the whole batch at once; its gradient is not an
    average of per-sample terms.
    """
    X = _nonempty(batch)
    m = len(X)
    g_jac = None
    extra = None
    if kind is None:
        cache = run(net, X)
        value, g_out = 0.0, np.zeros_like(cache.out)
    elif kind is ObjectiveKind.SSL:
        xi = rng.standard_normal(X.shape)
        value, cache, noisy, g_out = ssl_terms(net, X, sigma, xi)
        extra = backward(net, noisy, g_out=-objective_scale * g_out)
        g_out = objective_scale * g_out
    elif kind is ObjectiveKind.GRAPH:
        cache = run(net, X)
        value, g_out = _graph_value_and_feature_grad(cache.out, kernel_matrix(X, sigma))
        g_out = objective_scale * g_out
    elif kind is ObjectiveKind.DIRICHLET:
        cache = run(net, X, tangents=True)
        value = float(np.sum(cache.jac**2) / m)
        g_out = np.zeros_like(cache.out)
        g_jac = objective_scale * 2.0 / m * cache.jac
    else:
        raise ValueError(f"unknown objective {kind!r}")
    penalty, g_pen = orthogonality_penalty(cache.out, center=center)
    grads = backward(net, cache, g_out=g_out + penalty_scale * g_pen, g_jac=g_jac)
    if extra is not None:
        grads = [a + b for a, b in zip(grads, extra)]
    return value, penalty, grads


def embedding_energy(kind: ObjectiveKind, net: Network, points, sigma: float, rng=None, xi=None) -> float:
    """Objective value only, on a full point set (no gradient)."""
    X = np.asarray(points, dtype=np.float64)
    if kind is ObjectiveKind.SSL:
        if xi is None:
            xi = rng.standard_normal(X.shape)
        return ssl_terms(net, X, sigma, xi)[0]
    if kind is ObjectiveKind.GRAPH:
        return graph_energy(run(net, X).out, kernel_matrix(X, sigma))
    if kind is ObjectiveKind.DIRICHLET:
        return float(np.sum(run(net, X, tangents=True).jac ** 2) / len(X))
    raise ValueError(f"unknown objective {kind!r}")
