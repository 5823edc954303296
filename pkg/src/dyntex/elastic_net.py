"""Elastic-net sparse coding against a fixed dictionary.

Solves, per signal ``y``::

    min_x  1/2 ||y - D x||^2 + lambda1 ||x||_1 + lambda2/2 ||x||^2

by cyclic coordinate descent with covariance updates. The solver is written so
that every operation on a column is elementwise: coding a batch of signals
gives bit-identical results to coding each signal on its own.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError

SUPPORT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class ElasticNetParams:
    lambda1: float
    lambda2: float
    tol: float = 1e-8
    max_sweeps: int = 10_000

    def __post_init__(self):
        if not self.lambda1 > 0 or not self.lambda2 > 0:
            raise ConfigError(
                f"lambda1 and lambda2 must be positive, got {self.lambda1}, {self.lambda2}"
            )
        if not self.tol > 0 or self.max_sweeps < 1:
            raise ConfigError("tol must be positive and max_sweeps >= 1")
        if self.lambda2 >= self.lambda1 / 10:
            warnings.warn(
                f"lambda2={self.lambda2} is not below lambda1/10; solutions will be less sparse",
                stacklevel=3,
            )

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "tol": self.tol,
            "max_sweeps": self.max_sweeps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElasticNetParams":
        return cls(
            float(d["lambda1"]),
            float(d["lambda2"]),
            float(d.get("tol", 1e-8)),
            int(d.get("max_sweeps", 10_000)),
        )


@dataclass(frozen=True)
class SparseCode:
    """A code vector with its support (sorted indices) and the signs on it."""

    values: np.ndarray
    support: np.ndarray = field(init=False)
    signs: np.ndarray = field(init=False)
    kkt_violation: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v[np.abs(v) <= SUPPORT_THRESHOLD] = 0.0
        support = np.flatnonzero(v)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "signs", np.sign(v[support]))

    @property
    def nnz(self) -> int:
        return int(self.support.size)


def soft_threshold(z, tau):
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def kkt_violation(X, R, lambda1, lambda2):
    """Per-column max KKT violation given codes X and correlations R = D^T(y - DX)."""
    active = X != 0
    on = np.abs(R - lambda2 * X - lambda1 * np.sign(X))
    off = np.maximum(np.abs(R) - lambda1, 0.0)
    return np.where(active, on, off).max(axis=0, initial=0.0)


def _coordinate_descent(G, C, p: ElasticNetParams):
    k, n = C.shape
    X = np.zeros((k, n))
    R = C.copy()
    denom = np.diag(G) + p.lambda2
    viol = np.full(n, np.inf)
    running = np.arange(n)
    for _ in range(p.max_sweeps):
        if running.size == 0:
            break
        Xa = X[:, running]
        Ra = R[:, running]
        for j in range(k):
            old = Xa[j].copy()
            new = soft_threshold(Ra[j] + G[j, j] * old, p.lambda1) / denom[j]
            delta = new - old
            if np.any(delta):
                Ra -= G[:, j : j + 1] * delta
                Xa[j] = new
        X[:, running] = Xa
        R[:, running] = Ra
        v = kkt_violation(Xa, Ra, p.lambda1, p.lambda2)
        viol[running] = v
        running = running[v > p.tol]
    return X, viol


def _check_inputs(D, Y):
    D = np.asarray(D, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if D.ndim != 2 or Y.shape[0] != D.shape[0]:
        raise DataError(f"dictionary {D.shape} and signals {Y.shape} do not match")
    if not np.all(np.isfinite(Y)):
        raise DataError("signal contains non-finite values")
    norms = np.linalg.norm(D, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise DataError("dictionary columns must have unit norm")
    return D, Y


def _correlations(D, Y):
    # per-column products keep batch and single solves bit-identical
    return np.stack([D.T @ Y[:, i] for i in range(Y.shape[1])], axis=1)


def _polish(G, C, X, viol, p):
    """Replace each code by the exact solve on its support when that is admissible.

    Coordinate descent stops at a KKT tolerance; on an ill-conditioned support
    the iterate can still sit noticeably off the fixed-support solution. The
    exact solve is kept only if its signs match and its KKT violation is no worse.
    """
    for i in range(X.shape[1]):
        support = np.flatnonzero(X[:, i])
        if support.size == 0:
            continue
        signs = np.sign(X[support, i])
        K = G[np.ix_(support, support)] + p.lambda2 * np.eye(support.size)
        xs = np.linalg.solve(K, C[support, i] - p.lambda1 * signs)
        if not np.array_equal(np.sign(xs), signs):
            continue
        x = np.zeros(X.shape[0])
        x[support] = xs
        r = C[:, i] - G @ x
        v = kkt_violation(x[:, None], r[:, None], p.lambda1, p.lambda2)[0]
        if v <= viol[i]:
            X[:, i], viol[i] = x, v
    return X, viol


def _solve_matrix(D, Y, p):
    G = D.T @ D
    C = _correlations(D, Y)
    X, viol = _polish(G, C, *_coordinate_descent(G, C, p), p)
    bad = np.flatnonzero(viol > p.tol)
    if bad.size:
        i = int(bad[0])
        raise ConvergenceError(
            f"elastic net did not converge in {p.max_sweeps} sweeps "
            f"(column {i}, KKT violation {viol[i]:.3e})",
            gap=float(viol[i]),
            column=i,
        )
    return X, viol


def solve(D, y, p: ElasticNetParams) -> SparseCode:
    D, y = _check_inputs(D, np.asarray(y, dtype=float).reshape(-1, 1))
    X, viol = _solve_matrix(D, y, p)
    return SparseCode(X[:, 0], kkt_violation=float(viol[0]))


def batch_solve(D, Y, p: ElasticNetParams) -> list:
    """Code every column of ``Y``; output order matches column order."""
    D, Y = _check_inputs(D, Y)
    X, viol = _solve_matrix(D, Y, p)
    return [SparseCode(X[:, i], kkt_violation=float(viol[i])) for i in range(Y.shape[1])]


def closed_form_on_support(D, y, support, signs, p: ElasticNetParams) -> np.ndarray:
    """(D_S^T D_S + lambda2 I)^{-1} (D_S^T y - lambda1 s) for support S, signs s.

    The ridge term enters with a plus sign, as the stationarity condition of the
    elastic-net objective requires.
    """
    support = np.asarray(support, dtype=int)
    Ds = np.asarray(D, dtype=float)[:, support]
    K = Ds.T @ Ds + p.lambda2 * np.eye(support.size)
    return np.linalg.solve(K, Ds.T @ np.asarray(y, dtype=float) - p.lambda1 * np.asarray(signs))


def codes_to_matrix(codes, k=None) -> np.ndarray:
    if k is None:
        k = codes[0].values.size
    X = np.zeros((k, len(codes)))
    for i, c in enumerate(codes):
        X[:, i] = c.values
    return X
