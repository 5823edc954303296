"""Command-line front end: ``dyntex train|synth|reconstruct|eval|classify``.

Parameters come from built-in defaults, then an optional JSON ``--config``
file, then command-line flags (flags win). Every run writes the resolved
configuration to ``<out>/config.json`` before doing any work, so a run can be
repeated from that file alone.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
Failures print one JSON line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import classify as cls
from . import dynamics
from .avdl import AvdlParams, train
from .elastic_net import ElasticNetParams, solve
from .errors import ConfigError, DataError, DyntexError, NumericalError
from .lds import fit_lds
from .modelfile import load_model, save_model
from .video_io import (
    FrameSequence,
    corrupt,
    corruption_from_dict,
    list_frames,
    load_sequence,
    save_sequence,
    write_pgm,
)

logger = logging.getLogger("dyntex")

HISTORY_COLUMNS = ("loop", "objective", "step", "sigma", "nnz_fraction")

TRAIN_DEFAULTS = {
    "kind": "avdl",
    "k": 16,
    "loops": 100,
    "lambda1": 0.1,
    "lambda2": 0.005,
    "gamma": 0.5,
    "armijo_c": 1e-4,
    "shrink": 0.5,
    "initial_step": 1.0,
    "tol_rel_obj": 1e-6,
    "init_transition": "scaled_identity",
}

DEFAULTS = {
    "train": {**TRAIN_DEFAULTS, "frames": None, "corruption": None},
    "synth": {"model": None, "frames": None, "seed_frame": 0, "length": 100, "mode": "plain",
              "lasso_lambda": 0.0, "detect_occlusion": None},
    "reconstruct": {"model": None, "frames": None, "corruption": None},
    "eval": {"model": None, "frames": None, "metrics_csv": None},
    "classify": {**TRAIN_DEFAULTS, "corpus": None, "rates": [0.0, 0.05, 0.15, 0.3], "beta": 1.0,
                 "horizon": 10, "k_lds": 4, "k_avdl": 8, "block_fraction": 0.2, "train_fraction": 0.5,
                 "lambda1": 0.3, "lambda2": 0.015, "loops": 20, "init_transition": "ridge"},
}
for _d in DEFAULTS.values():
    _d.setdefault("seed", 0)
    _d.setdefault("out", None)
del DEFAULTS["classify"]["k"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def _pair(text):
    try:
        h, w = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected H,W, got {text!r}") from None
    return [h, w]


def _occlusion_flag(text):
    try:
        h, w, frac = text.split(",")
        return {"kind": "occlusion", "rect_h": int(h), "rect_w": int(w), "frame_fraction": float(frac)}
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected H,W,FRACTION, got {text!r}") from None


def _rates(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated rates, got {text!r}") from None


def _add_training_flags(p):
    p.add_argument("--k", type=int)
    p.add_argument("--loops", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--armijo-c", type=float)
    p.add_argument("--shrink", type=float)
    p.add_argument("--initial-step", type=float)
    p.add_argument("--tol-rel-obj", type=float)
    p.add_argument("--init-transition", choices=["scaled_identity", "ridge"])


def _add_corruption_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--noise-std", type=float, help="add Gaussian noise with this stddev")
    g.add_argument("--occlude", type=_occlusion_flag, metavar="H,W,FRACTION")
    p.add_argument("--corruption-seed", type=int)


def build_parser():
    parser = _Parser(prog="dyntex", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="run directory")
        p.add_argument("--seed", type=int)
        return p

    p = common("train", "train an AVDL or LDS model on a frame sequence")
    p.add_argument("--frames", help="directory of PGM frames or a glob")
    p.add_argument("--kind", choices=["avdl", "lds"])
    _add_training_flags(p)
    _add_corruption_flags(p)

    p = common("synth", "synthesize a sequence from a trained model")
    p.add_argument("--model")
    p.add_argument("--frames", help="frames providing the seed frame")
    p.add_argument("--seed-frame", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--mode", choices=["plain", "lasso"])
    p.add_argument("--lasso-lambda", type=float)
    p.add_argument("--detect-occlusion", type=_pair, metavar="H,W")

    p = common("reconstruct", "code and decode (denoise) frames with a model")
    p.add_argument("--model")
    p.add_argument("--frames")
    _add_corruption_flags(p)

    p = common("eval", "compute e_y, e_x, sigma and compression rate")
    p.add_argument("--model")
    p.add_argument("--frames")
    p.add_argument("--metrics-csv", help="CSV to append a metrics row to")

    p = common("classify", "run the occlusion-robustness classification benchmark")
    p.add_argument("--corpus", help="directory of <label>/<clip>/*.pgm")
    p.add_argument("--rates", type=_rates)
    p.add_argument("--beta", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--k-lds", type=int)
    p.add_argument("--k-avdl", type=int)
    p.add_argument("--block-fraction", type=float)
    p.add_argument("--train-fraction", type=float)
    _add_training_flags(p)
    return parser


def resolve_config(args) -> dict:
    """Merge defaults, the JSON config file and explicit flags."""
    config = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"missing config file: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from None
        unknown = set(loaded) - set(config)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        config.update(loaded)
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "verbose")}
    noise = flags.pop("noise_std", None)
    occlude = flags.pop("occlude", None)
    cseed = flags.pop("corruption_seed", None)
    if noise is not None:
        config["corruption"] = {"kind": "gaussian", "stddev": noise}
    elif occlude is not None:
        config["corruption"] = occlude
    if cseed is not None:
        if not config.get("corruption"):
            raise ConfigError("--corruption-seed given without a corruption")
        config["corruption"] = {**config["corruption"], "seed": cseed}
    if config.get("corruption") and "seed" not in config["corruption"]:
        config["corruption"] = {**config["corruption"], "seed": config["seed"]}
    config.update(flags)
    return config


def _require(config, *keys):
    missing = [k for k in keys if config.get(k) in (None, "")]
    if missing:
        raise ConfigError(f"missing required setting(s): {', '.join(missing)}")


def _avdl_params(config) -> AvdlParams:
    try:
        return AvdlParams(
            elastic=ElasticNetParams(float(config["lambda1"]), float(config["lambda2"])),
            gamma=float(config["gamma"]),
            max_loops=int(config["loops"]),
            armijo_c=float(config["armijo_c"]),
            shrink=float(config["shrink"]),
            initial_step=float(config["initial_step"]),
            tol_rel_obj=float(config["tol_rel_obj"]),
            seed=int(config["seed"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DyntexError):
            raise
        raise ConfigError(f"invalid training parameter: {exc}") from None


def _load_frames(source) -> FrameSequence:
    return load_sequence(list_frames(source))


def _maybe_corrupt(seq, config):
    if not config.get("corruption"):
        return seq, None
    spec = corruption_from_dict(config["corruption"])
    return corrupt(seq, spec), spec


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_history_csv(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for r in history:
            w.writerow([r.loop, repr(r.objective), repr(r.step), repr(r.sigma), repr(r.nnz_fraction)])


def _avdl_run_metrics(model, Y) -> dict:
    from .avdl import objective

    value, codes = objective(model.transition, model.dictionary, Y, model.params)
    report = dynamics.evaluate(model.transition, model.dictionary, Y, codes)
    k = model.k
    extra = {
        "model_kind": "avdl",
        "objective": value,
        "nnz_fraction": sum(c.nnz for c in codes) / (k * len(codes)),
        "loops": len(model.history),
    }
    return report, extra


def _model_metrics(model, seq):
    if model.kind == "avdl":
        return _avdl_run_metrics(model, seq.data)
    report = dynamics.evaluate_model(model, seq)
    return report, {"model_kind": "lds", "k": model.k}


# ---------------------------------------------------------------------------
# Commands


def cmd_train(config, out: Path):
    _require(config, "frames")
    if config["kind"] not in ("avdl", "lds"):
        raise ConfigError(f"unknown model kind {config['kind']!r}")
    k = int(config["k"])
    params = _avdl_params(config) if config["kind"] == "avdl" else None
    seq, _ = _maybe_corrupt(_load_frames(config["frames"]), config)
    if config["kind"] == "lds":
        model = fit_lds(seq, k)
    else:
        model = train(seq, k, params, init_transition=config["init_transition"])
        write_history_csv(model.history, out / "history.csv")
    save_model(model, out / "model.dtm")
    report, extra = _model_metrics(model, seq)
    dynamics.write_metrics_json(report, out / "metrics.json", extra)
    logger.info("trained %s model: sigma %.4f, compression %.4f", model.kind, report.sigma, report.compression_rate)


def cmd_synth(config, out: Path):
    _require(config, "model", "frames")
    model = load_model(config["model"])
    seq = _load_frames(config["frames"])
    if seq.m != model.m:
        raise DataError(f"frames have {seq.m} pixels, model expects {model.m}")
    i = int(config["seed_frame"])
    if not 0 <= i < seq.frame_count:
        raise ConfigError(f"seed_frame {i} out of range 0..{seq.frame_count - 1}")
    y0 = seq.data[:, i]
    if model.kind == "avdl":
        x0 = solve(model.dictionary, y0, model.params.elastic).values
    else:
        x0 = model.pcs.T @ y0
    mode = config["mode"]
    lam = float(config["lasso_lambda"]) if mode == "lasso" else 0.0
    spec = dynamics.SynthesisSpec(int(config["length"]), x0, mode, lam)
    states = dynamics.synthesize_states(model.transition, spec)
    frames = dynamics.synthesize_frames(model.transition, model.dictionary, spec)
    frame_dir = out / "frames"
    frame_dir.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(spec.length - 1)))
    h, w = seq.height, seq.width
    for t in range(frames.shape[1]):
        write_pgm(frame_dir / f"frame_{t:0{digits}d}.pgm", frames[:, t].reshape(h, w))
    hit = None
    if config.get("detect_occlusion") and frames.shape[1] >= 2:
        rh, rw = config["detect_occlusion"]
        hit = dynamics.occlusion_hit_rate(FrameSequence(frames, h, w), rh, rw)
    report = dynamics.evaluate(model.transition, model.dictionary, frames, states, model.kind, hit)
    dynamics.write_metrics_json(report, out / "metrics.json", {"length": spec.length, "mode": mode})


def cmd_reconstruct(config, out: Path):
    _require(config, "model", "frames")
    model = load_model(config["model"])
    clean = _load_frames(config["frames"])
    seq, spec = _maybe_corrupt(clean, config)
    rec = dynamics.reconstruct(model, seq)
    save_sequence(rec, out / "frames")
    payload = {"e_y_input": float(np.sum(np.linalg.norm(seq.data - rec.data, axis=0)))}
    if spec is not None:
        save_sequence(seq, out / "corrupted")
        payload["e_y_corrupted_vs_clean"] = float(np.sum(np.linalg.norm(seq.data - clean.data, axis=0)))
        payload["e_y_reconstruction_vs_clean"] = float(np.sum(np.linalg.norm(rec.data - clean.data, axis=0)))
    _write_json(out / "metrics.json", payload)


def cmd_eval(config, out: Path):
    _require(config, "model", "frames")
    model = load_model(config["model"])
    seq = _load_frames(config["frames"])
    if seq.m != model.m:
        raise DataError(f"frames have {seq.m} pixels, model expects {model.m}")
    report, extra = _model_metrics(model, seq)
    dynamics.write_metrics_json(report, out / "metrics.json", extra)
    loops_or_k = extra["loops"] if model.kind == "avdl" else model.k
    csv_path = config.get("metrics_csv") or (out / "metrics.csv")
    dynamics.append_metrics_csv(report, csv_path, model.kind, loops_or_k)


def _load_corpus(config):
    corpus = config["corpus"]
    entries = []
    if isinstance(corpus, str):
        root = Path(corpus)
        if not root.is_dir():
            raise DataError(f"corpus directory not found: {root}")
        for label_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            for clip_dir in sorted(p for p in label_dir.iterdir() if p.is_dir()):
                entries.append((label_dir.name, _load_frames(clip_dir)))
    else:
        for item in corpus:
            for clip in item["clips"]:
                entries.append((str(item["label"]), _load_frames(clip)))
    if not entries:
        raise DataError("corpus contains no clips")
    return entries


def cmd_classify(config, out: Path):
    _require(config, "corpus")
    bench = cls.BenchmarkConfig(
        avdl=_avdl_params(config),
        k_avdl=int(config["k_avdl"]),
        k_lds=int(config["k_lds"]),
        beta=float(config["beta"]),
        horizon=int(config["horizon"]),
        block_fraction=float(config["block_fraction"]),
        train_fraction=float(config["train_fraction"]),
        seed=int(config["seed"]),
        init_transition=config["init_transition"],
    )
    corpus = _load_corpus(config)
    result = cls.run_occlusion_benchmark(corpus, config["rates"], bench)
    cls.write_benchmark_csv(result, out / "benchmark.csv")
    cls.write_predictions_json(result, out / "predictions.json")
    for method, rate, acc in result.rows:
        logger.info("%-8s occlusion %.2f accuracy %.4f", method, rate, acc)


COMMANDS = {
    "train": cmd_train,
    "synth": cmd_synth,
    "reconstruct": cmd_reconstruct,
    "eval": cmd_eval,
    "classify": cmd_classify,
}


def _fail(exc, code):
    line = {"error": type(exc).__name__, "exit_code": code, "message": str(exc).replace("\n", " ")}
    print(json.dumps(line, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        return _fail(exc, 1)
    if args.command is None:
        build_parser().print_help(sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    out = None
    try:
        config = resolve_config(args)
        _require(config, "out")
        out = Path(config["out"])
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "config.json", {"command": args.command, **config})
        COMMANDS[args.command](config, out)
    except DyntexError as exc:
        return _fail(exc, exc.exit_code)
    except (OSError, KeyError) as exc:
        return _fail(DataError(str(exc)), 2)
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        return _fail(NumericalError(str(exc)), 3)
    return 0
