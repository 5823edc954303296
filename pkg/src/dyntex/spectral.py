"""Spectral radius of transition matrices."""

import numpy as np
import scipy.sparse.linalg as spla

DENSE_LIMIT = 512


def spectral_radius(A, tol=1e-9) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Dense eigendecomposition up to 512 x 512, Arnoldi iteration beyond.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    if A.shape[0] <= DENSE_LIMIT:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    vals = spla.eigs(A, k=1, which="LM", tol=tol, return_eigenvectors=False, v0=np.ones(A.shape[0]))
    return float(np.abs(vals[0]))
