"""The oblique manifold S(m, k) of m x k matrices with unit-norm columns.

Points and tangent vectors are plain ``ndarray`` objects; the helpers here
check membership, project ambient matrices onto tangent spaces and retract
tangent steps back onto the manifold by column normalization.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, ZeroColumnError

MANIFOLD_TOL = 1e-10


def ddiag(Z) -> np.ndarray:
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError(f"ddiag needs a square matrix, got shape {Z.shape}")
    return np.diag(np.diag(Z))


def column_dots(X, Y) -> np.ndarray:
    """diag(X^T Y) without forming the k x k product."""
    return np.einsum("ij,ij->j", X, Y)


def inner(X, Y) -> float:
    """Trace inner product tr(X^T Y)."""
    return float(np.vdot(X, Y))


def normalize_columns(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ZeroColumnError(f"zero column(s) {np.flatnonzero(norms == 0).tolist()}")
    return X / norms


def check_oblique(D, tol=MANIFOLD_TOL, allow_overcomplete=False) -> np.ndarray:
    """Validate that D lies on S(m, k); returns D as a float array."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise DataError(f"dictionary must be a matrix, got shape {D.shape}")
    m, k = D.shape
    if k > m and not allow_overcomplete:
        raise DataError(
            f"overcomplete dictionary (k={k} > m={m}); only non-redundant dictionaries are supported"
        )
    dev = np.abs(np.linalg.norm(D, axis=0) - 1.0)
    if dev.size and dev.max() > tol:
        raise DataError(f"dictionary column norms deviate from 1 by up to {dev.max():.3e}")
    return D


def is_tangent(D, H, tol=MANIFOLD_TOL) -> bool:
    return bool(np.all(np.abs(column_dots(H, D)) <= tol))


def project_tangent(D, H) -> np.ndarray:
    """Orthogonal projection H - D ddiag(D^T H) onto the tangent space at D."""
    D = np.asarray(D, dtype=float)
    H = np.asarray(H, dtype=float)
    if D.shape != H.shape:
        raise ValueError(f"shape mismatch: D {D.shape}, H {H.shape}")
    return H - D * column_dots(D, H)


def retract(D, H, t: float) -> np.ndarray:
    """Point t along the curve (D + tH) ddiag((D + tH)^T (D + tH))^{-1/2}."""
    D = np.asarray(D, dtype=float)
    if t == 0:
        return D.copy()
    return normalize_columns(D + t * np.asarray(H, dtype=float))


def random_oblique(m, k, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return normalize_columns(rng.standard_normal((m, k)))


def random_tangent(D, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return project_tangent(D, rng.standard_normal(np.shape(D)))
