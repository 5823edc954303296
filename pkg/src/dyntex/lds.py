"""PCA-based linear dynamical system baseline and the Martin distance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError

PINV_RCOND = 1e-10
COS2_FLOOR = 1e-12
DEFAULT_HORIZON = 10


@dataclass
class LdsModel:
    pcs: np.ndarray
    transition: np.ndarray
    states: np.ndarray
    singular_values: np.ndarray
    height: Optional[int] = None
    width: Optional[int] = None

    kind = "lds"

    @property
    def m(self) -> int:
        return self.pcs.shape[0]

    @property
    def k(self) -> int:
        return self.pcs.shape[1]

    @property
    def dictionary(self) -> np.ndarray:
        return self.pcs

    @property
    def compression_rate(self) -> float:
        return self.k / self.m


def numerical_rank(s, shape) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > max(shape) * np.finfo(float).eps * s[0]))


def fit_lds(Y, k: int) -> LdsModel:
    """Top-k left singular vectors as observation matrix, least-squares transition.

    No mean frame is subtracted.
    """
    height = getattr(Y, "height", None)
    width = getattr(Y, "width", None)
    Y = np.asarray(getattr(Y, "data", Y), dtype=float)
    m, n_frames = Y.shape
    if n_frames < 2:
        raise DataError("need at least 2 frames to fit a transition")
    if not 1 <= k <= min(m, n_frames):
        raise ConfigError(f"need 1 <= k <= min(m, n+1) = {min(m, n_frames)}, got k={k}")
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    rank = numerical_rank(s, Y.shape)
    if k > rank:
        raise DataError(f"k={k} exceeds the numerical rank {rank} of the data")
    pcs = U[:, :k].copy()
    X = pcs.T @ Y
    A = X[:, 1:] @ np.linalg.pinv(X[:, :-1], rcond=PINV_RCOND)
    return LdsModel(pcs, A, X, s[:k].copy(), height, width)


def observability(C, A, horizon: int) -> np.ndarray:
    """Stack [C; CA; ...; CA^{horizon-1}]."""
    blocks = [C]
    for _ in range(horizon - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def _orth(M):
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, : numerical_rank(s, M.shape)]


def subspace_cosines(M1, M2) -> np.ndarray:
    """Cosines of the principal angles between col(M1) and col(M2).

    When the subspaces differ in dimension the missing angles count as right
    angles (cosine 0).
    """
    Q1, Q2 = _orth(M1), _orth(M2)
    r = max(Q1.shape[1], Q2.shape[1])
    cos = np.zeros(r)
    if Q1.shape[1] and Q2.shape[1]:
        sv = np.linalg.svd(Q1.T @ Q2, compute_uv=False)
        cos[: sv.size] = np.minimum(sv, 1.0)
    return cos


def martin_distance(M1, M2, horizon: int = DEFAULT_HORIZON) -> float:
    """-log prod cos^2 of principal angles between extended observability subspaces."""
    if horizon < 1:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    if M1.m != M2.m:
        raise DataError(f"models observe different dimensions ({M1.m} vs {M2.m})")
    O1 = observability(M1.dictionary, M1.transition, horizon)
    O2 = observability(M2.dictionary, M2.transition, horizon)
    if not np.any(O1) or not np.any(O2):
        return float("inf")
    cos2 = np.maximum(subspace_cosines(O1, O2) ** 2, COS2_FLOOR)
    return max(0.0, float(-np.sum(np.log(cos2))))
