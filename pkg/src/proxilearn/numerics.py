"""Linear-algebra substrate: regularized PSD solves, column-wise
Khatri-Rao products, Nystrom factorization and the low-rank regularized
inverse built on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

EIGENVALUE_FLOOR = 1e-12


def psd_factor(m: np.ndarray, ridge: float):
    """Cholesky factor of (m + ridge*I) with one jitter retry.

    Raises ``numpy.linalg.LinAlgError`` if the matrix is still not positive
    definite after the retry, which signals an indefinite input.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    eye = np.eye(m.shape[0])
    try:
        return scipy.linalg.cho_factor(m + ridge * eye, lower=True)
    except np.linalg.LinAlgError:
        jittered = ridge * (1.0 + 1e-8) + 1e-10
        return scipy.linalg.cho_factor(m + jittered * eye, lower=True)


def solve_psd(m: np.ndarray, ridge: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (m + ridge*I) r = rhs for symmetric PSD ``m`` via Cholesky."""
    return scipy.linalg.cho_solve(psd_factor(m, ridge), np.asarray(rhs, float))


def khatri_rao_cols(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker (Khatri-Rao) product.

    Column j of the result is kron(a[:, j], b[:, j]); rows are ordered with
    the a-index outer and the b-index inner, i.e. entry (i*q + k, j) equals
    a[i, j] * b[k, j] for b with q rows.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("inputs must be 2-D")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column count mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    return scipy.linalg.khatri_rao(a, b)


@dataclass(frozen=True)
class NystromFactors:
    """Low-rank factors with k/n^2 ~= u @ diag(v) @ u.T.

    ``v`` holds the retained landmark-block eigenvalues (all above the
    eigenvalue floor), ``landmarks`` the sampled row indices.
    """

    u: np.ndarray
    v: np.ndarray
    landmarks: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.v) @ self.u.T


def nystrom(k: np.ndarray, rank: int, landmark_seed: int = 0) -> NystromFactors:
    """Nystrom factorization of k/n^2 from uniformly sampled landmarks.

    Landmarks are drawn uniformly without replacement. The landmark block
    is eigendecomposed and eigenvalues at or below ``EIGENVALUE_FLOOR`` are
    dropped; with ``rank == n`` and a well-conditioned input the
    factorization is exact.
    """
    k = np.asarray(k, dtype=float)
    n = k.shape[0]
    if k.ndim != 2 or k.shape[1] != n:
        raise ValueError("kernel matrix must be square")
    if not 1 <= rank <= n:
        raise ValueError(f"rank must be in [1, {n}], got {rank}")
    rng = np.random.default_rng(landmark_seed)
    landmarks = np.sort(rng.choice(n, size=rank, replace=False))
    scaled = k / float(n) ** 2
    block = scaled[np.ix_(landmarks, landmarks)]
    eigvals, eigvecs = np.linalg.eigh(block)
    keep = eigvals > EIGENVALUE_FLOOR
    if not keep.any():
        raise np.linalg.LinAlgError(
            "all landmark eigenvalues below the floor"
        )
    eigvals = eigvals[keep]
    eigvecs = eigvecs[:, keep]
    u = scaled[:, landmarks] @ (eigvecs / eigvals)
    return NystromFactors(u=u, v=eigvals, landmarks=landmarks)


def woodbury_regularized_inverse_apply(
    l: np.ndarray,
    factors: NystromFactors,
    lam: float,
    rhs: np.ndarray,
) -> np.ndarray:
    """Apply the Woodbury form of (u diag(v) u.T l + lam I)^{-1} u diag(v) u.T.

    Returns
    lam^{-1} [I - u (lam^{-1} u.T l u + diag(v)^{-1})^{-1} u.T lam^{-1} l] t
    with t = u diag(v) u.T rhs. When the factors reconstruct k/n^2 exactly
    this solves the corresponding regularized normal equations exactly.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    l = np.asarray(l, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    u, v = factors.u, factors.v
    t = u @ (v * (u.T @ rhs))
    inner = (u.T @ l @ u) / lam + np.diag(1.0 / v)
    correction = u @ np.linalg.solve(inner, u.T @ (l @ t)) / lam
    return (t - correction) / lam
