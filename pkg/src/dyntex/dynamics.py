"""Synthesis, reconstruction and the error metrics of a trained model."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .elastic_net import codes_to_matrix, soft_threshold
from .errors import ConfigError, DataError, NumericalError
from .spectral import spectral_radius
from .video_io import FrameSequence

logger = logging.getLogger(__name__)

OCCLUSION_THRESHOLD = 0.95
METRICS_CSV_COLUMNS = ("model_kind", "loops_or_k", "compression_rate", "sigma", "e_y", "e_x")


@dataclass(frozen=True)
class SynthesisSpec:
    length: int
    x0: np.ndarray
    mode: str = "plain"
    lasso_lambda: float = 0.0

    def __post_init__(self):
        if self.length < 1:
            raise ConfigError(f"synthesis length must be positive, got {self.length}")
        if self.mode not in ("plain", "lasso"):
            raise ConfigError(f"unknown synthesis mode {self.mode!r}")
        if self.mode == "lasso" and not self.lasso_lambda >= 0:
            raise ConfigError("lasso_lambda must be >= 0")
        if self.mode == "plain" and self.lasso_lambda != 0:
            raise ConfigError("lasso_lambda is only meaningful in lasso mode")


@dataclass
class MetricsReport:
    e_y: float
    e_x: float
    sigma: float
    compression_rate: float
    occlusion_hit_rate: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def synthesize_states(A, spec: SynthesisSpec) -> np.ndarray:
    """States x_0..x_{length-1} as columns.

    Plain mode propagates x_{i+1} = A x_i. Lasso mode takes the minimizer of
    1/2 ||x - A x_i||^2 + lambda ||x||_1, i.e. a soft threshold of A x_i.
    """
    A = np.asarray(A, dtype=float)
    x = np.asarray(spec.x0, dtype=float)
    if x.shape != (A.shape[0],):
        raise DataError(f"x0 has shape {x.shape}, expected ({A.shape[0]},)")
    if spec.mode == "plain" and not np.any(x):
        logger.warning("zero initial state: the synthesized sequence is constant zero")
    states = np.empty((x.size, spec.length))
    states[:, 0] = x
    for i in range(1, spec.length):
        with np.errstate(over="ignore", invalid="ignore"):
            x = A @ x
        if spec.mode == "lasso":
            x = soft_threshold(x, spec.lasso_lambda)
        states[:, i] = x
    return states


def synthesize_frames(A, D, spec: SynthesisSpec) -> np.ndarray:
    """Decoded frames D x_i as columns, clamped to [0, 1]."""
    Yhat = np.asarray(D) @ synthesize_states(A, spec)
    if not np.all(np.isfinite(Yhat)):
        raise NumericalError("synthesized frames are not finite; the transition is unstable")
    return np.clip(Yhat, 0.0, 1.0)


def synthesize(A, D, spec: SynthesisSpec, height: int, width: int) -> FrameSequence:
    if D.shape[0] != height * width:
        raise DataError(f"dictionary has {D.shape[0]} rows, frames are {height}x{width}")
    return FrameSequence(synthesize_frames(A, D, spec), height, width)


def reconstruct(model, Y) -> FrameSequence:
    """Denoise frames by coding them with the model and decoding.

    AVDL models use elastic-net codes over the dictionary, LDS models project
    onto the principal components.
    """
    Ymat = np.asarray(getattr(Y, "data", Y), dtype=float)
    if Ymat.shape[0] != model.m:
        raise DataError(f"frames have {Ymat.shape[0]} pixels, model expects {model.m}")
    if model.kind == "avdl":
        X = codes_to_matrix(model.code(Ymat), model.k)
        Yhat = model.dictionary @ X
    else:
        Yhat = model.pcs @ (model.pcs.T @ Ymat)
    height = getattr(Y, "height", model.height)
    width = getattr(Y, "width", model.width)
    if height is None or width is None:
        height, width = model.m, 1
    return FrameSequence.from_matrix(Yhat, height, width, clamp=True)


def _as_state_matrix(codes, k):
    if isinstance(codes, np.ndarray):
        return codes
    return codes_to_matrix(list(codes), k)


def evaluate(A, D, Y, codes, kind: str = "avdl", occlusion_hit_rate=None) -> MetricsReport:
    """Reconstruction error e_y, transition error e_x, spectral radius, compression.

    ``codes`` is a list of ``SparseCode`` or a (k, n+1) state matrix. The
    compression rate is nonzeros / (m (n+1)) for AVDL and k/m for LDS.
    """
    Y = np.asarray(getattr(Y, "data", Y), dtype=float)
    D = np.asarray(D, dtype=float)
    A = np.asarray(A, dtype=float)
    X = _as_state_matrix(codes, D.shape[1])
    if X.shape[1] != Y.shape[1]:
        raise DataError(f"{X.shape[1]} codes for {Y.shape[1]} frames")
    m, n_frames = Y.shape
    e_y = float(np.sum(np.linalg.norm(Y - D @ X, axis=0)))
    e_x = float(np.sum(np.linalg.norm(X[:, 1:] - A @ X[:, :-1], axis=0)))
    if kind == "avdl":
        rate = np.count_nonzero(X) / (m * n_frames)
    elif kind == "lds":
        rate = D.shape[1] / m
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    return MetricsReport(e_y, e_x, spectral_radius(A), float(rate), occlusion_hit_rate)


def evaluate_model(model, Y) -> MetricsReport:
    """Metrics of ``model`` on frames ``Y`` with codes computed by the model."""
    Ymat = np.asarray(getattr(Y, "data", Y), dtype=float)
    if model.kind == "avdl":
        X = codes_to_matrix(model.code(Ymat), model.k)
    else:
        X = model.pcs.T @ Ymat
    return evaluate(model.transition, model.dictionary, Ymat, X, model.kind)


def occlusion_hit_rate(seq: FrameSequence, rect_h: int, rect_w: int, threshold=OCCLUSION_THRESHOLD) -> float:
    """Fraction of frames containing a rect_h x rect_w block with mean above threshold."""
    if rect_h > seq.height or rect_w > seq.width or rect_h < 1 or rect_w < 1:
        raise ConfigError(f"block {rect_h}x{rect_w} does not fit in {seq.height}x{seq.width} frames")
    windows = sliding_window_view(seq.frames(), (rect_h, rect_w), axis=(1, 2))
    means = windows.mean(axis=(-2, -1))
    hits = means.reshape(seq.frame_count, -1).max(axis=1) > threshold
    return float(np.mean(hits))


def write_metrics_json(report: MetricsReport, path, extra=None) -> None:
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def append_metrics_csv(report: MetricsReport, path, model_kind: str, loops_or_k) -> None:
    """Append one metrics row, writing the header for a new file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(METRICS_CSV_COLUMNS)
        w.writerow(
            [model_kind, loops_or_k, repr(report.compression_rate), repr(report.sigma), repr(report.e_y), repr(report.e_x)]
        )
