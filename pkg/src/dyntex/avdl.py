"""Adaptive video dictionary learning.

The states of a linear dynamical system are taken to be elastic-net codes of
the frames over a dictionary ``D`` on the oblique manifold. For a transition
matrix ``A`` the training cost is::

    f(A, D) = 1/2 ||X1(D) - A X0(D)||_F^2 + gamma/2 ||A||_F^2

where ``X0``/``X1`` hold the codes of frames ``0..n-1`` and ``1..n``. On a
fixed support the code is a smooth function of ``D`` (closed form on the
support), which gives the gradient with respect to ``D`` by the chain rule.
Training alternates sparse coding with one Armijo-backtracked Riemannian
gradient step on ``(A, D)``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import manifold
from .elastic_net import (
    ElasticNetParams,
    SparseCode,
    batch_solve,
    closed_form_on_support,
    codes_to_matrix,
)
from .errors import ConfigError, DataError, ZeroColumnError
from .spectral import spectral_radius

logger = logging.getLogger(__name__)

MAX_SHRINKS = 50
INIT_JITTER = 1e-3
INIT_TRANSITION_SCALE = 0.9
INIT_MAX_COHERENCE = 0.99


@dataclass(frozen=True)
class AvdlParams:
    elastic: ElasticNetParams
    gamma: float = 0.5
    max_loops: int = 100
    armijo_c: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    tol_rel_obj: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.max_loops < 0:
            raise ConfigError(f"max_loops must be >= 0, got {self.max_loops}")
        if not 0 < self.armijo_c < 1:
            raise ConfigError(f"armijo_c must be in (0, 1), got {self.armijo_c}")
        if not 0 < self.shrink < 1:
            raise ConfigError(f"shrink must be in (0, 1), got {self.shrink}")
        if not self.initial_step > 0:
            raise ConfigError(f"initial_step must be positive, got {self.initial_step}")
        if not self.tol_rel_obj >= 0:
            raise ConfigError(f"tol_rel_obj must be >= 0, got {self.tol_rel_obj}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["elastic"] = self.elastic.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AvdlParams":
        d = dict(d)
        elastic = ElasticNetParams.from_dict(d.pop("elastic"))
        return cls(elastic=elastic, **d)


@dataclass
class LoopRecord:
    """State after one training loop.

    ``start_objective`` and ``accepted_objective`` are evaluated with the
    supports frozen at the top of the loop; ``objective`` is recomputed after
    re-coding at the updated dictionary.
    """

    loop: int
    start_objective: float
    accepted_objective: float
    objective: float
    step: float
    sigma: float
    nnz_fraction: float
    status: str = "ok"


@dataclass
class AvdlModel:
    dictionary: np.ndarray
    transition: np.ndarray
    params: AvdlParams
    history: list = field(default_factory=list)
    height: Optional[int] = None
    width: Optional[int] = None
    initial_objective: Optional[float] = None

    kind = "avdl"

    @property
    def m(self) -> int:
        return self.dictionary.shape[0]

    @property
    def k(self) -> int:
        return self.dictionary.shape[1]

    @property
    def sigma(self) -> float:
        return spectral_radius(self.transition)

    def code(self, Y) -> list:
        return batch_solve(self.dictionary, _matrix(Y), self.params.elastic)


def _matrix(Y) -> np.ndarray:
    return np.asarray(getattr(Y, "data", Y), dtype=float)


def transition_pairs(n_frames: int, segments: Optional[Sequence[int]] = None):
    """Index arrays (prev, next) of the frame transitions.

    ``segments`` lists the lengths of independent clips stacked column-wise;
    no transition is formed across a clip boundary.
    """
    if segments is None:
        segments = [n_frames]
    segments = [int(s) for s in segments]
    if sum(segments) != n_frames or min(segments) < 1:
        raise DataError(f"segment lengths {segments} do not partition {n_frames} frames")
    prev = []
    start = 0
    for length in segments:
        prev.extend(range(start, start + length - 1))
        start += length
    if not prev:
        raise DataError("no frame transitions: every segment has a single frame")
    prev = np.asarray(prev, dtype=int)
    return prev, prev + 1


def transition_cost(A, X, gamma, pairs) -> float:
    prev, nxt = pairs
    resid = X[:, nxt] - A @ X[:, prev]
    return 0.5 * float(np.sum(resid * resid)) + 0.5 * gamma * float(np.sum(A * A))


def objective(A, D, Y, params: AvdlParams, segments=None):
    """Stabilized cost at (A, D) with freshly solved codes; returns (value, codes)."""
    Y = _matrix(Y)
    codes = batch_solve(D, Y, params.elastic)
    X = codes_to_matrix(codes, D.shape[1])
    value = transition_cost(A, X, params.gamma, transition_pairs(Y.shape[1], segments))
    return value, codes


def support_matrix(D, Y, codes, p: ElasticNetParams) -> np.ndarray:
    """Codes recomputed in closed form on their (frozen) supports and signs."""
    Y = _matrix(Y)
    X = np.zeros((D.shape[1], Y.shape[1]))
    for i, c in enumerate(codes):
        if c.nnz:
            X[c.support, i] = closed_form_on_support(D, Y[:, i], c.support, c.signs, p)
    return X


def fixed_support_objective(A, D, Y, codes, params: AvdlParams, segments=None) -> float:
    """The cost with codes moved along D on the supports of ``codes``."""
    Y = _matrix(Y)
    X = support_matrix(D, Y, codes, params.elastic)
    return transition_cost(A, X, params.gamma, transition_pairs(Y.shape[1], segments))


def grad_A(A, X0, X1, gamma) -> np.ndarray:
    return (A @ X0 - X1) @ X0.T + gamma * A


def code_derivative(D, y, code: SparseCode, H, p: ElasticNetParams) -> np.ndarray:
    """Directional derivative of the elastic-net code of ``y`` along H at D."""
    out = np.zeros(D.shape[1])
    lam = code.support
    if lam.size == 0:
        return out
    Dl, Hl = D[:, lam], H[:, lam]
    K = Dl.T @ Dl + p.lambda2 * np.eye(lam.size)
    z = np.linalg.solve(K, Dl.T @ y - p.lambda1 * code.signs)
    out[lam] = np.linalg.solve(K, Hl.T @ y - (Dl.T @ Hl + Hl.T @ Dl) @ z)
    return out


def _state_gradients(A, X, pairs) -> np.ndarray:
    """Partial derivatives of the transition residual term w.r.t. each state."""
    prev, nxt = pairs
    delta = X[:, nxt] - A @ X[:, prev]
    g = np.zeros_like(X)
    g[:, nxt] += delta
    g[:, prev] -= A.T @ delta
    return g


def euclidean_grad_D(A, D, Y, codes, p: ElasticNetParams, segments=None, X=None) -> np.ndarray:
    Y = _matrix(Y)
    if X is None:
        X = support_matrix(D, Y, codes, p)
    g = _state_gradients(A, X, transition_pairs(Y.shape[1], segments))
    G = np.zeros_like(D)
    for i, c in enumerate(codes):
        lam = c.support
        if lam.size == 0:
            continue
        Dl = D[:, lam]
        u = np.linalg.solve(Dl.T @ Dl + p.lambda2 * np.eye(lam.size), g[lam, i])
        xl = X[lam, i]
        G[:, lam] += np.outer(Y[:, i] - Dl @ xl, u) - np.outer(Dl @ u, xl)
    return G


def grad_D(A, D, Y, codes, p: ElasticNetParams, segments=None, X=None) -> np.ndarray:
    """Riemannian gradient of the cost w.r.t. D at fixed supports."""
    return manifold.project_tangent(D, euclidean_grad_D(A, D, Y, codes, p, segments, X))


def initial_point(Y, k, seed=0):
    """Dictionary from k random, mutually non-duplicate frames plus jitter; A = 0.9 I.

    Frames are visited in random order and skipped when nearly parallel
    (|cos| > INIT_MAX_COHERENCE) to an already chosen atom; if too few remain
    the skipped frames fill the gap in visiting order.
    """
    Y = _matrix(Y)
    m, n = Y.shape
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    norms = np.linalg.norm(Y, axis=0)
    chosen, skipped = [], []
    for i in order:
        if len(chosen) == k:
            break
        if norms[i] > 0 and all(
            abs(Y[:, i] @ Y[:, j]) <= INIT_MAX_COHERENCE * norms[i] * norms[j] for j in chosen
        ):
            chosen.append(i)
        else:
            skipped.append(i)
    rest = skipped + [i for i in order if i not in chosen and i not in skipped]
    idx = (chosen + rest)[:k]
    if len(idx) < k:
        idx += list(rng.choice(n, size=k - len(idx)))
    D0 = Y[:, idx] + INIT_JITTER * rng.standard_normal((m, k))
    return INIT_TRANSITION_SCALE * np.eye(k), manifold.normalize_columns(D0)


def ridge_transition(X, gamma, pairs) -> np.ndarray:
    """Minimizer over A of the cost at fixed states X (requires gamma > 0 or full-rank X0)."""
    X0, X1 = X[:, pairs[0]], X[:, pairs[1]]
    G = X0 @ X0.T + gamma * np.eye(X.shape[0])
    return np.linalg.lstsq(G, X0 @ X1.T, rcond=None)[0].T


def _nnz_fraction(codes, k) -> float:
    return sum(c.nnz for c in codes) / (k * len(codes))


def train(
    Y, k: int, params: AvdlParams, init=None, segments=None, callback=None, init_transition="scaled_identity"
) -> AvdlModel:
    """Run the alternating coding / Riemannian gradient descent loop.

    ``init`` is an optional ``(A0, D0)`` pair. Without it the dictionary starts
    from data frames and the transition from ``init_transition``: either
    ``"scaled_identity"`` (0.9 I) or ``"ridge"`` (the exact minimizer over A
    at the initial codes). ``callback(record, model)`` runs after every loop
    with the model holding the current iterate.
    """
    if init_transition not in ("scaled_identity", "ridge"):
        raise ConfigError(f"unknown init_transition {init_transition!r}")
    height = getattr(Y, "height", None)
    width = getattr(Y, "width", None)
    Y = _matrix(Y)
    m, n_frames = Y.shape
    if not 1 <= k <= m:
        raise ConfigError(f"need 1 <= k <= m={m}, got k={k}")
    pairs = transition_pairs(n_frames, segments)
    if init is None:
        A, D = initial_point(Y, k, params.seed)
    else:
        A = np.array(init[0], dtype=float)
        D = manifold.check_oblique(np.array(init[1], dtype=float))
        if A.shape != (k, k) or D.shape != (m, k):
            raise ConfigError(f"initialization shapes {A.shape}, {D.shape} do not match k={k}, m={m}")
    gamma = params.gamma
    elastic = params.elastic
    codes = None
    if init is None and init_transition == "ridge":
        codes = batch_solve(D, Y, elastic)
        A = ridge_transition(codes_to_matrix(codes, k), gamma, pairs)
    model = AvdlModel(D.copy(), A.copy(), params, [], height, width)
    if params.max_loops == 0:
        return model

    if codes is None:
        codes = batch_solve(D, Y, elastic)
    model.initial_objective = transition_cost(A, codes_to_matrix(codes, k), gamma, pairs)
    prev_objective = model.initial_objective

    for loop in range(1, params.max_loops + 1):
        X = support_matrix(D, Y, codes, elastic)
        f0 = transition_cost(A, X, gamma, pairs)
        gA = grad_A(A, X[:, pairs[0]], X[:, pairs[1]], gamma)
        gD = grad_D(A, D, Y, codes, elastic, segments, X)
        slope = float(np.sum(gA * gA) + np.sum(gD * gD))

        step, accepted = 0.0, f0
        status = "stationary" if slope == 0 else "line_search_failed"
        if slope > 0:
            rho = params.initial_step
            for _ in range(MAX_SHRINKS + 1):
                try:
                    D_try = manifold.retract(D, -gD, rho)
                except ZeroColumnError:
                    rho *= params.shrink
                    continue
                A_try = A - rho * gA
                f_try = transition_cost(A_try, support_matrix(D_try, Y, codes, elastic), gamma, pairs)
                if f_try < f0 and f_try <= f0 - params.armijo_c * rho * slope:
                    A, D = A_try, D_try
                    step, accepted, status = rho, f_try, "ok"
                    break
                rho *= params.shrink

        if status == "ok":
            codes = batch_solve(D, Y, elastic)
        value = transition_cost(A, codes_to_matrix(codes, k), gamma, pairs)
        record = LoopRecord(
            loop=loop,
            start_objective=f0,
            accepted_objective=accepted,
            objective=value,
            step=step,
            sigma=spectral_radius(A),
            nnz_fraction=_nnz_fraction(codes, k),
            status=status,
        )
        model.history.append(record)
        model.dictionary, model.transition = D, A
        if callback is not None:
            callback(record, model)
        logger.debug("loop %d objective %.6g step %.3g sigma %.4f", loop, value, step, record.sigma)
        if status != "ok":
            logger.info("stopping at loop %d: %s", loop, status)
            break
        if abs(prev_objective - value) < params.tol_rel_obj * abs(prev_objective):
            break
        prev_objective = value

    model.dictionary = D
    model.transition = A
    return model
