"""Dynamic texture classification and the occlusion-robustness benchmark.

Two classifiers:

* LDS-NN: nearest neighbour over the Martin distance between a test clip's
  LDS and per-clip reference LDS models.
* AVDL-SRC: code the test clip with each class's AVDL model and pick the class
  with the smallest ``e_y + beta * e_x``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .avdl import AvdlParams, train
from .dynamics import evaluate
from .elastic_net import ElasticNetParams, batch_solve
from .errors import ConfigError, ConvergenceError, DataError
from .lds import DEFAULT_HORIZON, fit_lds, martin_distance, numerical_rank
from .video_io import Occlusion, corrupt

logger = logging.getLogger(__name__)

METHODS = ("LDS-NN", "AVDL-SRC")


class LabeledModelSet:
    """Reference models tagged with class labels, all of one kind."""

    def __init__(self, entries):
        self.entries = [(label, model) for label, model in entries]
        if not self.entries:
            raise ConfigError("empty reference set")
        if len(self.labels) < 2:
            raise ConfigError("a reference set needs at least 2 distinct labels")
        kinds = {m.kind for _, m in self.entries}
        if len(kinds) != 1:
            raise ConfigError(f"mixed model kinds in reference set: {sorted(kinds)}")
        self.kind = kinds.pop()

    @property
    def labels(self) -> list:
        return sorted({label for label, _ in self.entries})

    def __len__(self):
        return len(self.entries)


@dataclass
class ClassificationResult:
    predicted: object
    scores: dict
    margin: float


def _decide(scores: dict) -> ClassificationResult:
    ranked = sorted(scores, key=lambda lab: (scores[lab], lab))
    best = ranked[0]
    margin = scores[ranked[1]] - scores[best] if len(ranked) > 1 else math.inf
    if math.isnan(margin):
        margin = 0.0
    return ClassificationResult(best, dict(scores), margin)


def _min_scores(pairs) -> dict:
    scores = {}
    for label, s in pairs:
        scores[label] = min(s, scores.get(label, math.inf))
    return scores


def nn_classify(test, refs: LabeledModelSet, horizon: int = DEFAULT_HORIZON) -> ClassificationResult:
    if refs.kind != "lds":
        raise ConfigError("nn_classify needs LDS reference models")
    return _decide(_min_scores((label, martin_distance(test, ref, horizon)) for label, ref in refs.entries))


def src_score(test, model, beta: float, elastic: ElasticNetParams) -> float:
    Y = np.asarray(getattr(test, "data", test), dtype=float)
    try:
        codes = batch_solve(model.dictionary, Y, elastic)
    except ConvergenceError as exc:
        warnings.warn(f"sparse coding failed: {exc}", stacklevel=2)
        return math.inf
    report = evaluate(model.transition, model.dictionary, Y, codes)
    return report.e_y + beta * report.e_x


def src_classify(
    test, refs: LabeledModelSet, beta: float = 1.0, elastic: Optional[ElasticNetParams] = None
) -> ClassificationResult:
    """Minimum combined reconstruction and transition error over class models."""
    if refs.kind != "avdl":
        raise ConfigError("src_classify needs AVDL reference models")
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    m = np.shape(getattr(test, "data", test))[0]
    pairs = []
    for label, model in refs.entries:
        if model.m != m:
            raise DataError(f"test clip has {m} pixels, model for {label!r} expects {model.m}")
        p = elastic if elastic is not None else model.params.elastic
        pairs.append((label, src_score(test, model, beta, p)))
    return _decide(_min_scores(pairs))


# ---------------------------------------------------------------------------
# Benchmark


@dataclass
class BenchmarkConfig:
    avdl: AvdlParams
    k_avdl: int = 8
    k_lds: int = 4
    beta: float = 1.0
    horizon: int = DEFAULT_HORIZON
    block_fraction: float = 0.2
    train_fraction: float = 0.5
    seed: int = 0
    init_transition: str = "ridge"

    def __post_init__(self):
        if self.k_avdl < 1 or self.k_lds < 1 or self.horizon < 1:
            raise ConfigError("k_avdl, k_lds and horizon must be positive")
        if not 0 < self.block_fraction <= 1:
            raise ConfigError("block_fraction must be in (0, 1]")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")


@dataclass
class BenchmarkResult:
    rows: list = field(default_factory=list)
    predictions: list = field(default_factory=list)

    def accuracy(self, method, rate) -> float:
        for m, r, acc in self.rows:
            if m == method and r == rate:
                return acc
        raise KeyError((method, rate))


def block_size(height, width, fraction):
    s = math.sqrt(fraction)
    return max(1, min(height, round(height * s))), max(1, min(width, round(width * s)))


def split_corpus(corpus, train_fraction, seed):
    """Per-class seeded shuffle into (train, test) lists of (label, clip)."""
    by_label = {}
    for label, clip in corpus:
        by_label.setdefault(label, []).append(clip)
    if len(by_label) < 2:
        raise ConfigError("the corpus needs at least 2 classes")
    rng = np.random.default_rng(seed)
    train_set, test_set = [], []
    for label in sorted(by_label):
        clips = by_label[label]
        if len(clips) < 2:
            raise ConfigError(f"class {label!r} has fewer than 2 clips")
        order = rng.permutation(len(clips))
        n_train = min(len(clips) - 1, max(1, int(train_fraction * len(clips))))
        train_set += [(label, clips[i]) for i in order[:n_train]]
        test_set += [(label, clips[i]) for i in order[n_train:]]
    return train_set, test_set


def _fit_lds_capped(clip, k):
    Y = clip.data
    rank = numerical_rank(np.linalg.svd(Y, compute_uv=False), Y.shape)
    return fit_lds(clip, max(1, min(k, rank, Y.shape[1])))


def train_references(train_set, config: BenchmarkConfig):
    """Per-clip LDS references and one AVDL model per class."""
    lds_refs = LabeledModelSet([(label, _fit_lds_capped(clip, config.k_lds)) for label, clip in train_set])
    avdl_entries = []
    for label in sorted({lab for lab, _ in train_set}):
        clips = [c for lab, c in train_set if lab == label]
        Y = np.hstack([c.data for c in clips])
        model = train(
            Y,
            config.k_avdl,
            config.avdl,
            segments=[c.frame_count for c in clips],
            init_transition=config.init_transition,
        )
        model.height, model.width = clips[0].height, clips[0].width
        avdl_entries.append((label, model))
    return lds_refs, LabeledModelSet(avdl_entries)


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("DYNTEX_THREADS", "1")))
    except ValueError:
        return 1


def run_occlusion_benchmark(corpus, occlusion_rates, config: BenchmarkConfig) -> BenchmarkResult:
    """Train both classifiers, occlude the test clips at each rate, tabulate accuracy."""
    rates = [float(r) for r in occlusion_rates]
    if any(not 0 <= r <= 1 for r in rates):
        raise ConfigError("occlusion rates must lie in [0, 1]")
    train_set, test_set = split_corpus(corpus, config.train_fraction, config.seed)
    lds_refs, avdl_refs = train_references(train_set, config)
    h, w = test_set[0][1].height, test_set[0][1].width
    rect_h, rect_w = block_size(h, w, config.block_fraction)

    def classify_one(job):
        ri, ci = job
        label, clip = test_set[ci]
        occ_seed = int(np.random.SeedSequence([config.seed, ri, ci]).generate_state(1)[0])
        occluded = corrupt(clip, Occlusion(rect_h, rect_w, rates[ri], occ_seed))
        nn = nn_classify(_fit_lds_capped(occluded, config.k_lds), lds_refs, config.horizon)
        src = src_classify(occluded, avdl_refs, config.beta)
        return ri, ci, label, nn.predicted, src.predicted

    jobs = [(ri, ci) for ri in range(len(rates)) for ci in range(len(test_set))]
    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(classify_one, jobs))
    else:
        outcomes = [classify_one(j) for j in jobs]

    result = BenchmarkResult()
    for ri, rate in enumerate(rates):
        rel = [o for o in outcomes if o[0] == ri]
        for mi, method in enumerate(METHODS):
            correct = sum(o[2] == o[3 + mi] for o in rel)
            result.rows.append((method, rate, correct / len(rel)))
    for ri, ci, label, nn_pred, src_pred in outcomes:
        result.predictions.append(
            {"occlusion_rate": rates[ri], "clip": ci, "label": label, "LDS-NN": nn_pred, "AVDL-SRC": src_pred}
        )
    return result


def write_benchmark_csv(result: BenchmarkResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "occlusion_rate", "accuracy"])
        for method, rate, acc in result.rows:
            w.writerow([method, repr(rate), repr(acc)])


def write_predictions_json(result: BenchmarkResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.predictions, fh, indent=2, sort_keys=True)
        fh.write("\n")
