"""Planted-model sequence generators with known ground truth.

These stand in for real dynamic-texture footage in tests, benchmarks and
demos. All generators are deterministic given ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .video_io import FrameSequence


@dataclass
class PlantedSequence:
    sequence: FrameSequence
    clean: np.ndarray
    dictionary: np.ndarray
    transition: np.ndarray
    states: np.ndarray


def blob_dictionary(height, width, k, rng, radius=None) -> np.ndarray:
    """k unit-norm nonnegative Gaussian blobs at random centres."""
    if radius is None:
        radius = max(1.0, 0.15 * min(height, width))
    rr, cc = np.mgrid[0:height, 0:width]
    cr = rng.uniform(0, height - 1, size=k)
    ccen = rng.uniform(0, width - 1, size=k)
    atoms = np.exp(-((rr[..., None] - cr) ** 2 + (cc[..., None] - ccen) ** 2) / (2 * radius**2))
    D = atoms.reshape(height * width, k)
    return D / np.linalg.norm(D, axis=0)


def cyclic_transition(k, rng, decay=0.995) -> np.ndarray:
    """decay times a random single-cycle permutation matrix."""
    order = rng.permutation(k)
    A = np.zeros((k, k))
    A[order[(np.arange(k) + 1) % k], order] = decay
    return A


def planted_sparse_lds(
    height=16,
    width=16,
    n_frames=64,
    k=8,
    active=2,
    noise=1e-2,
    decay=0.995,
    peak=0.9,
    seed=0,
    dictionary=None,
    transition=None,
) -> PlantedSequence:
    """Flickering blobs: sparse nonnegative states cycled by a permutation.

    States evolve exactly by ``x_{i+1} = A x_i`` with ``active`` nonzeros;
    frames are ``D x_i`` scaled to the given peak intensity, plus Gaussian
    noise, clamped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    D = blob_dictionary(height, width, k, rng) if dictionary is None else dictionary
    A = cyclic_transition(k, rng, decay) if transition is None else transition
    x = np.zeros(k)
    x[rng.choice(k, size=active, replace=False)] = rng.uniform(0.6, 1.0, size=active)
    X = np.empty((k, n_frames))
    for i in range(n_frames):
        X[:, i] = x
        x = A @ x
    clean = D @ X
    scale = peak / clean.max()
    X *= scale
    clean = D @ X
    noisy = clean + noise * rng.standard_normal(clean.shape)
    seq = FrameSequence(np.clip(noisy, 0.0, 1.0), height, width)
    return PlantedSequence(seq, clean, D, A, X)


def planted_lds(height=12, width=12, n_frames=80, order=8, seed=0) -> PlantedSequence:
    """Noise-free LDS of exact rank ``order`` whose frames stay inside [0, 1].

    One state is a constant offset (eigenvalue 1); the rest are damped
    rotations and a decaying mode.
    """
    rng = np.random.default_rng(seed)
    m = height * width
    blocks = []
    while sum(b.shape[0] for b in blocks) + 1 < order:
        left = order - 1 - sum(b.shape[0] for b in blocks)
        if left >= 2:
            theta = rng.uniform(0.2, 1.2)
            r = rng.uniform(0.96, 0.995)
            blocks.append(r * np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]))
        else:
            blocks.append(np.array([[rng.uniform(0.9, 0.98)]]))
    A = np.zeros((order, order))
    A[0, 0] = 1.0
    i = 1
    for b in blocks:
        s = b.shape[0]
        A[i : i + s, i : i + s] = b
        i += s
    C = np.empty((m, order))
    C[:, 0] = 0.5
    C[:, 1:] = rng.uniform(-1, 1, size=(m, order - 1)) * (0.4 / (order - 1))
    x = np.concatenate([[1.0], rng.uniform(-1, 1, size=order - 1)])
    X = np.empty((order, n_frames))
    for t in range(n_frames):
        X[:, t] = x
        x = A @ x
    Y = C @ X
    return PlantedSequence(FrameSequence(Y, height, width), Y, C, A, X)


def planted_corpus(
    n_classes=3,
    clips_per_class=10,
    length=20,
    height=12,
    width=12,
    k=8,
    active=2,
    noise=1e-2,
    seed=0,
):
    """Labelled clips; each class has its own blob dictionary and cycle."""
    rng = np.random.default_rng(seed)
    corpus = []
    for c in range(n_classes):
        D = blob_dictionary(height, width, k, rng)
        A = cyclic_transition(k, rng)
        for j in range(clips_per_class):
            clip_seed = int(rng.integers(2**31))
            planted = planted_sparse_lds(
                height, width, length, k, active, noise, seed=clip_seed, dictionary=D, transition=A
            )
            corpus.append((f"class{c}", planted.sequence))
    return corpus
