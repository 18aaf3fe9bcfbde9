"""Kernel PCA with a cosine kernel.

The cosine kernel is a linear kernel on row-normalised data, so the centred
kernel equals ``Z @ Z.T`` with ``Z`` the column-centred unit rows. When there
are more rows than features the eigenproblem is solved on the small
``Z.T @ Z`` instead; the projections ``Z @ u`` are identical to
``sqrt(lambda) * v`` from the full kernel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import jacobi_eigh

EIGEN_TOL = 1e-10
RELATIVE_DROP = 1e-9


@dataclass(frozen=True, eq=False)
class Embedding:
    coords: np.ndarray
    explained_eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def _values(C) -> np.ndarray:
    return np.asarray(getattr(C, "values", C), dtype=np.float64)


def unit_rows(C) -> np.ndarray:
    X = _values(C)
    norms = np.linalg.norm(X, axis=1)
    out = np.zeros_like(X)
    nz = norms > 0
    out[nz] = X[nz] / norms[nz, None]
    return out


def cosine_kernel(C) -> np.ndarray:
    """Pairwise cosine similarity; rows that are all zero get similarity 0."""
    U = unit_rows(C)
    return U @ U.T


def center_kernel(K) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    row = K.mean(axis=0)
    return K - row[None, :] - row[:, None] + K.mean()


def fix_signs(coords: np.ndarray) -> np.ndarray:
    """Flip each column so that its largest-magnitude entry is positive."""
    coords = coords.copy()
    for m in range(coords.shape[1]):
        i = int(np.argmax(np.abs(coords[:, m])))
        if coords[i, m] < 0:
            coords[:, m] = -coords[:, m]
    return coords


def kernel_pca(C, d: int = 2) -> Embedding:
    X = _values(C)
    n, p = X.shape
    if n < 2:
        raise ValueError(f"kernel PCA needs at least 2 rows, got {n}")
    if d < 1:
        raise ValueError("d must be >= 1")
    Z = unit_rows(X)
    Z = Z - Z.mean(axis=0)
    if n <= p:
        lam, vecs = jacobi_eigh(Z @ Z.T, tol=EIGEN_TOL)
        lam, vecs = lam[:d], vecs[:, :d]
        keep = _kept(lam)
        coords = vecs[:, keep] * np.sqrt(lam[keep])
    else:
        lam, vecs = jacobi_eigh(Z.T @ Z, tol=EIGEN_TOL)
        lam, vecs = lam[:d], vecs[:, :d]
        keep = _kept(lam)
        coords = Z @ vecs[:, keep]
    return Embedding(fix_signs(coords), lam[keep].copy())


def _kept(lam: np.ndarray) -> np.ndarray:
    top = lam.max() if lam.size else 0.0
    if top <= 0.0:
        return np.zeros(lam.shape, dtype=bool)
    return lam > max(RELATIVE_DROP * top, EIGEN_TOL)
