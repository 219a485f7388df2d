"""Linear-algebra helpers shared by the rest of the package."""

from __future__ import annotations

import numpy as np


class ConvergenceError(RuntimeError):
    pass


class RankError(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 stream; one per consumer, never shared."""
    return np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))


def normal_sample(rng: np.random.Generator, size=None):
    """Standard normal draw(s) from ``rng``."""
    if size is None:
        return float(rng.standard_normal())
    return rng.standard_normal(size)


def _check_symmetric(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-10 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    return A


def sym_eig(A):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending.

    Uses LAPACK (``numpy.linalg.eigh``). :func:`jacobi_eig` computes the same
    thing independently and is what the tests compare against.
    """
    A = _check_symmetric(A)
    try:
        w, V = np.linalg.eigh(0.5 * (A + A.T))
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(str(e)) from e
    return w, V


def jacobi_eig(A, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi rotations. O(n^3) per sweep, intended for small matrices."""
    A = _check_symmetric(A).copy()
    n = A.shape[0]
    V = np.eye(n)
    norm = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * max(norm, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and q
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def orthonormal_basis(A, name: str = "input", rtol: float = 1e-10) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    n, k = A.shape
    if k < 1 or n < k:
        raise RankError(f"{name}: need n >= k >= 1, got shape {A.shape}")
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.min() <= rtol * max(diag.max(), 1e-300):
        raise RankError(f"{name} is rank deficient")
    return Q


def principal_angle_cosines(A, B) -> np.ndarray:
    """Cosines of the principal angles between ``span(A)`` and ``span(B)``, descending.

    Spans of different dimension give ``min(k_A, k_B)`` cosines.
    """
    QA = orthonormal_basis(A, "A")
    QB = orthonormal_basis(B, "B")
    if QA.shape[0] != QB.shape[0]:
        raise ValueError(f"row mismatch: {QA.shape[0]} vs {QB.shape[0]}")
    s = np.linalg.svd(QA.T @ QB, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def random_orthogonal(k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix."""
    Q, R = np.linalg.qr(rng.standard_normal((k, k)))
    return Q * np.sign(np.diag(R))
