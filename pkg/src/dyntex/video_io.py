"""Grayscale PGM image sequences as observation matrices.

Frames are vectorized in row-major pixel order and scaled by the PGM maxval,
so a sequence of ``n + 1`` frames of ``height x width`` pixels becomes a
``(height * width, n + 1)`` matrix with entries in ``[0, 1]``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DataError

OCCLUDER_INTENSITY = 1.0


@dataclass(frozen=True)
class FrameSequence:
    """Observation matrix ``data`` (m x frame_count) plus frame geometry."""

    data: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise DataError(f"frame data must be 2-D, got shape {data.shape}")
        if self.height < 1 or self.width < 1:
            raise DataError(f"invalid frame geometry {self.height}x{self.width}")
        if data.shape[0] != self.height * self.width:
            raise DataError(
                f"{data.shape[0]} rows do not match {self.height}x{self.width} frames"
            )
        if data.shape[1] < 2:
            raise DataError("a sequence needs at least 2 frames")
        if not np.all(np.isfinite(data)):
            raise DataError("frame data contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise DataError("frame data must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def frame_count(self) -> int:
        return self.data.shape[1]

    @property
    def m(self) -> int:
        return self.data.shape[0]

    def frames(self) -> np.ndarray:
        """Return the frames as an array of shape (frame_count, height, width)."""
        return self.data.T.reshape(self.frame_count, self.height, self.width)

    def frame(self, i: int) -> np.ndarray:
        return self.data[:, i].reshape(self.height, self.width)

    @classmethod
    def from_frames(cls, frames) -> "FrameSequence":
        frames = np.asarray(frames, dtype=float)
        if frames.ndim != 3:
            raise DataError(f"expected (count, height, width) frames, got {frames.shape}")
        count, h, w = frames.shape
        return cls(frames.reshape(count, h * w).T.copy(), h, w)

    @classmethod
    def from_matrix(cls, data, height, width, clamp=False) -> "FrameSequence":
        data = np.asarray(data, dtype=float)
        if clamp:
            data = np.clip(data, 0.0, 1.0)
        return cls(data, height, width)


# ---------------------------------------------------------------------------
# PGM codec


def _read_tokens(buf: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated header")
        tokens.append(buf[start:pos])
    return tokens, pos


def read_pgm(path: Union[str, os.PathLike]) -> np.ndarray:
    """Read a P5 or P2 PGM file into a float array scaled to [0, 1]."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"missing file: {path}") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    magic = buf[:2]
    if magic not in (b"P5", b"P2"):
        raise DataError(f"unsupported format (not a grayscale PGM): {path}")
    try:
        (w, h, maxval), pos = _read_tokens(buf, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise DataError(f"malformed PGM header: {path}") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise DataError(f"invalid PGM header values: {path}")
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = width * height * dtype.itemsize
        raw = buf[pos : pos + need]
        if len(raw) != need:
            raise DataError(f"truncated pixel data: {path}")
        pixels = np.frombuffer(raw, dtype=dtype).astype(float)
    else:
        try:
            pixels = np.array(buf[pos:].split(), dtype=float)
        except ValueError:
            raise DataError(f"malformed ASCII pixel data: {path}") from None
        if pixels.size != width * height:
            raise DataError(f"expected {width * height} pixels, got {pixels.size}: {path}")
    if pixels.max(initial=0) > maxval:
        raise DataError(f"pixel value exceeds maxval: {path}")
    return pixels.reshape(height, width) / maxval


def write_pgm(path: Union[str, os.PathLike], image: np.ndarray) -> None:
    """Write a [0, 1] image as an 8-bit binary PGM (values clamped, then rounded)."""
    image = np.asarray(image, dtype=float)
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(pixels.tobytes())


def load_sequence(paths: Sequence[Union[str, os.PathLike]]) -> FrameSequence:
    """Load an ordered list of PGM files into a FrameSequence."""
    paths = list(paths)
    if len(paths) < 2:
        raise DataError(f"a sequence needs at least 2 frames, got {len(paths)}")
    frames = []
    for p in paths:
        img = read_pgm(p)
        if frames and img.shape != frames[0].shape:
            raise DataError(
                f"dimension mismatch: {p} is {img.shape[1]}x{img.shape[0]}, "
                f"expected {frames[0].shape[1]}x{frames[0].shape[0]}"
            )
        frames.append(img)
    return FrameSequence.from_frames(np.stack(frames))


def list_frames(source: Union[str, os.PathLike]) -> list:
    """Expand a directory (all ``*.pgm`` sorted by name) or a glob pattern."""
    source = str(source)
    p = Path(source)
    if p.is_dir():
        files = sorted(p.glob("*.pgm"))
    else:
        parent = p.parent if str(p.parent) else Path(".")
        files = sorted(parent.glob(p.name))
    if not files:
        raise DataError(f"no PGM frames found at {source}")
    return files


def save_sequence(seq: FrameSequence, directory: Union[str, os.PathLike], prefix="frame") -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(seq.frame_count - 1)))
    paths = []
    for i in range(seq.frame_count):
        path = directory / f"{prefix}_{i:0{digits}d}.pgm"
        write_pgm(path, seq.frame(i))
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Corruption


@dataclass(frozen=True)
class GaussianNoise:
    stddev: float
    seed: int = 0

    def __post_init__(self):
        if not self.stddev >= 0:
            raise ConfigError(f"noise stddev must be >= 0, got {self.stddev}")


@dataclass(frozen=True)
class Occlusion:
    """A rect_h x rect_w block of intensity 1.0 on a random subset of frames."""

    rect_h: int
    rect_w: int
    frame_fraction: float
    seed: int = 0
    intensity: float = OCCLUDER_INTENSITY

    def __post_init__(self):
        if self.rect_h < 1 or self.rect_w < 1:
            raise ConfigError(f"invalid occluder size {self.rect_h}x{self.rect_w}")
        if not 0.0 <= self.frame_fraction <= 1.0:
            raise ConfigError(f"frame_fraction must be in [0, 1], got {self.frame_fraction}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ConfigError("occluder intensity must be in [0, 1]")


CorruptionSpec = Union[GaussianNoise, Occlusion]


def corruption_from_dict(d: dict) -> CorruptionSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "gaussian":
            return GaussianNoise(float(d["stddev"]), int(d.get("seed", 0)))
        if kind == "occlusion":
            return Occlusion(
                int(d["rect_h"]),
                int(d["rect_w"]),
                float(d["frame_fraction"]),
                int(d.get("seed", 0)),
                float(d.get("intensity", OCCLUDER_INTENSITY)),
            )
    except KeyError as exc:
        raise ConfigError(f"corruption block missing key {exc}") from None
    raise ConfigError(f"unknown corruption kind {kind!r}")


def occluded_frames(n_frames: int, spec: Occlusion) -> np.ndarray:
    """Sorted indices of the frames ``corrupt`` will occlude."""
    count = math.ceil(spec.frame_fraction * n_frames - 1e-9)
    rng = np.random.default_rng(spec.seed)
    return np.sort(rng.choice(n_frames, size=count, replace=False))


def corrupt(seq: FrameSequence, spec: CorruptionSpec) -> FrameSequence:
    if isinstance(spec, GaussianNoise):
        rng = np.random.default_rng(spec.seed)
        noisy = seq.data + spec.stddev * rng.standard_normal(seq.data.shape)
        return FrameSequence(np.clip(noisy, 0.0, 1.0), seq.height, seq.width)
    if isinstance(spec, Occlusion):
        if spec.rect_h > seq.height or spec.rect_w > seq.width:
            raise ConfigError(
                f"occluder {spec.rect_h}x{spec.rect_w} larger than frame {seq.height}x{seq.width}"
            )
        frames = seq.frames().copy()
        idx = occluded_frames(seq.frame_count, spec)
        rng = np.random.default_rng([spec.seed, 1])
        rows = rng.integers(0, seq.height - spec.rect_h + 1, size=idx.size)
        cols = rng.integers(0, seq.width - spec.rect_w + 1, size=idx.size)
        for i, r, c in zip(idx, rows, cols):
            frames[i, r : r + spec.rect_h, c : c + spec.rect_w] = spec.intensity
        return FrameSequence.from_frames(frames)
    raise ConfigError(f"unknown corruption spec {spec!r}")
