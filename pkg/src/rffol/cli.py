"""Command-line entry point.

Subcommands:

    train         fit a model on a LIBSVM file, write it, report the trace
    predict       write one predicted label per input instance
    eval          accuracy/timing report for a saved model on a dataset
    bench         full protocol: split, normalize, grid-search, train, test
    kernel-check  kernel-approximation error diagnostics for a drawn map
    drift         paired fixed-map vs adaptive-map run on a drifting stream
    stats         Wilcoxon signed-ranks z from two accuracy columns

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
divergence.  Reports go to stdout as text or, with --format json-lines,
one JSON object per line; --no-timing drops wall-clock fields so reruns
are byte-comparable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .data import (
    DataFormatError,
    DriftStreamConfig,
    generate_drift_stream,
    parse_libsvm,
    write_libsvm,
)
from .evaluation import (
    ALGORITHMS,
    GridSpec,
    bench_run,
    compare_from_tables,
    default_grid,
    drift_experiment,
    evaluate,
    paper_tables,
    resolve_algorithm,
    wilcoxon,
)
from .features import MapVariant, approximation_report, sample_frequencies
from .learner import (
    TrainingDiverged,
    UpdateMode,
    init_model,
    predict_many,
    train_online,
)
from .model_io import ModelFormatError, load_model, save_model

__all__ = ["RunConfig", "UsageError", "run", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

_ALGO_MODES = {
    "fogd": UpdateMode.W_ONLY,
    "mpu-fogdu": UpdateMode.WU,
    "mpu-fogdub": UpdateMode.WUB,
}


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we own the code
        raise UsageError(message)


@dataclass
class RunConfig:
    """Parsed invocation; ``run`` consumes exactly this."""

    command: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


def _float_list(raw: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {raw!r}")


def _int_list(raw: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rffol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--format", choices=("text", "json-lines"), default="text")
        p.add_argument("--no-timing", action="store_true",
                       help="omit wall-clock fields from reports")
        p.add_argument("--backend", choices=("python", "compiled"), default=None)

    p = sub.add_parser("train", help="fit a model online and save it")
    p.add_argument("--data", required=True)
    p.add_argument("--algo", required=True, choices=sorted(_ALGO_MODES))
    p.add_argument("--D", type=int, required=True, dest="num_features")
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--eta-w", type=float, default=None)
    p.add_argument("--eta-u", type=float, default=None)
    p.add_argument("--eta-b", type=float, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=None,
                   help="feature-space dimension override")
    common(p)

    p = sub.add_parser("predict", help="one predicted label per input line")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="default: stdout")
    p.add_argument("--dim", type=int, default=None)
    common(p)

    p = sub.add_parser("eval", help="accuracy report for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dim", type=int, default=None)
    common(p)

    p = sub.add_parser("bench", help="split/normalize/grid-search/train/test")
    p.add_argument("--data", required=True)
    p.add_argument("--algo", required=True, choices=sorted(_ALGO_MODES))
    p.add_argument("--seed", type=int, required=True,
                   help="mandatory: published rows must be reproducible")
    p.add_argument("--subset", type=int, default=None,
                   help="subsample to this many instances before splitting")
    p.add_argument("--folds", type=int, default=1)
    p.add_argument("--D-list", default=None, dest="num_features_list")
    p.add_argument("--sigma2-list", default=None)
    p.add_argument("--eta-b-list", default=None)
    p.add_argument("--out", default=None, help="save the final model here")
    p.add_argument("--dim", type=int, default=None)
    common(p)

    p = sub.add_parser("kernel-check", help="kernel-approximation diagnostics")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--D", type=int, required=True, dest="num_features")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--variant", choices=[v.value for v in MapVariant],
                   default=MapVariant.MPU_SCALED.value)
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    common(p)

    p = sub.add_parser("drift", help="paired drift-adaptivity experiment")
    p.add_argument("--seeds", type=int, default=10, help="seeds 0..n-1")
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--segments", default="5000,5000",
                   help="comma-separated segment lengths")
    p.add_argument("--rotation", type=float, default=math.pi / 2,
                   help="boundary rotation angle, radians")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--D", type=int, default=200, dest="num_features")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--eta-w", type=float, default=100.0)
    p.add_argument("--eta-u", type=float, default=0.1)
    p.add_argument("--eta-b", type=float, default=0.01)
    p.add_argument("--export", default=None,
                   help="also write the seed-0 stream to this LIBSVM file")
    common(p)

    p = sub.add_parser("stats", help="Wilcoxon signed-ranks z for paired columns")
    p.add_argument("--paper-tables", action="store_true",
                   help="pull columns from the embedded published tables")
    p.add_argument("--a", default=None, help="algorithm name (with --paper-tables)")
    p.add_argument("--b", default=None)
    p.add_argument("--a-file", default=None, help="file of accuracies, one per line")
    p.add_argument("--b-file", default=None)
    common(p)

    return parser


def parse_args(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required (see --help)")
    options = vars(ns).copy()
    command = options.pop("command")
    return RunConfig(command=command, options=options)


# ---------------------------------------------------------------- reports


def _emit(records, fmt: str, no_timing: bool, stream=None) -> None:
    stream = stream or sys.stdout
    timing_keys = ("train_seconds", "test_seconds", "seconds")
    for record in records:
        if no_timing:
            record = {k: v for k, v in record.items() if k not in timing_keys}
        if fmt == "json-lines":
            stream.write(json.dumps(record, sort_keys=True) + "\n")
        else:
            parts = [f"{k}={_fmt_value(v)}" for k, v in record.items() if k != "record"]
            stream.write(record.get("record", "report") + ": " + " ".join(parts) + "\n")


def _fmt_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return "{" + ",".join(f"{k}={_fmt_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


def _atomic_text(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".rffol-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _load_dataset(path: str, dim=None):
    if not os.path.exists(path):
        raise DataFormatError(f"no such data file: {path}")
    return parse_libsvm(path, dim=dim)


# ---------------------------------------------------------------- commands


def _cmd_train(cfg: RunConfig) -> int:
    dataset = _load_dataset(cfg.data, cfg.dim)
    spec = resolve_algorithm(cfg.algo)
    eta_w = spec.eta_w if cfg.eta_w is None else cfg.eta_w
    eta_u = spec.eta_u if cfg.eta_u is None else cfg.eta_u
    eta_b = cfg.eta_b if cfg.eta_b is not None else 0.0
    if cfg.sigma2 <= 0:
        raise UsageError("--sigma2 must be positive")
    fmap = sample_frequencies(
        dataset.dim, cfg.num_features, math.sqrt(cfg.sigma2), cfg.seed,
        variant=spec.variant,
    )
    m = 1 if dataset.binary else dataset.class_count
    model = init_model(fmap, m, eta_w, eta_u, eta_b, spec.mode)
    t0 = time.perf_counter()
    model, trace = train_online(model, dataset, backend=cfg.backend)
    seconds = time.perf_counter() - t0
    save_model(model, cfg.out)
    record = {
        "record": "train",
        "algo": spec.name,
        "steps": trace.steps,
        "mistakes": trace.mistakes,
        "loss_events": trace.loss_events,
        "mistake_rate": trace.mistake_rate,
        "seconds": seconds,
        "model": cfg.out,
    }
    _emit([record], cfg.format, cfg.no_timing)
    return EXIT_OK


def _cmd_predict(cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    dataset = _load_dataset(cfg.data, cfg.dim)
    labels = predict_many(model, dataset)
    text = "".join(f"{int(lab)}\n" for lab in labels)
    if cfg.out:
        _atomic_text(cfg.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_eval(cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    dataset = _load_dataset(cfg.data, cfg.dim)
    report = evaluate(model, dataset)
    record = {
        "record": "eval",
        "instances": report.instance_count,
        "test_accuracy": report.test_accuracy,
        "test_seconds": report.test_seconds,
    }
    _emit([record], cfg.format, cfg.no_timing)
    return EXIT_OK


def _cmd_bench(cfg: RunConfig) -> int:
    dataset = _load_dataset(cfg.data, cfg.dim)
    spec = resolve_algorithm(cfg.algo)
    grid = default_grid(spec, folds=cfg.folds)
    params = dict(grid.params)
    if cfg.num_features_list:
        params["D"] = _int_list(cfg.num_features_list, "--D-list")
    if cfg.sigma2_list:
        params["sigma2"] = _float_list(cfg.sigma2_list, "--sigma2-list")
    if cfg.eta_b_list:
        if not spec.tune_eta_b:
            raise UsageError(f"--eta-b-list does not apply to {spec.name}")
        params["eta_b"] = _float_list(cfg.eta_b_list, "--eta-b-list")
    grid = GridSpec(params=params, folds=cfg.folds)

    result = bench_run(
        dataset, spec, cfg.seed,
        grid=grid, subset=cfg.subset, folds=cfg.folds, backend=cfg.backend,
    )
    if cfg.out:
        save_model(result.model, cfg.out)
    failed = sum(1 for c in result.search.cells if c.failed)
    record = {
        "record": "bench",
        "algo": result.algo,
        "seed": result.seed,
        "sizes": result.sizes,
        "best_params": result.best_params,
        "validation_accuracy": result.search.best_accuracy,
        "cells": len(result.search.cells),
        "cells_failed": failed,
        "mistakes_online": result.report.mistakes_online,
        "test_accuracy": result.report.test_accuracy,
        "test_accuracy_pct": 100.0 * result.report.test_accuracy,
        "train_seconds": result.report.train_seconds,
        "test_seconds": result.report.test_seconds,
    }
    if cfg.out:
        record["model"] = cfg.out
    _emit([record], cfg.format, cfg.no_timing)
    return EXIT_OK


def _cmd_kernel_check(cfg: RunConfig) -> int:
    if cfg.d < 1 or cfg.num_features < 1 or cfg.pairs < 1:
        raise UsageError("--d, --D and --pairs must be positive")
    if cfg.sigma <= 0:
        raise UsageError("--sigma must be positive")
    rng = np.random.default_rng([cfg.seed, 1])
    pairs = [
        (rng.uniform(-1, 1, cfg.d), rng.uniform(-1, 1, cfg.d))
        for _ in range(cfg.pairs)
    ]
    report = approximation_report(
        cfg.d, cfg.num_features, cfg.sigma, MapVariant(cfg.variant), pairs, cfg.seed
    )
    record = {
        "record": "kernel-check",
        "variant": report.variant.value,
        "d": cfg.d,
        "D": cfg.num_features,
        "sigma": cfg.sigma,
        "pairs": report.pair_count,
        "mean_abs_error": report.mean_abs_error,
        "max_abs_error": report.max_abs_error,
    }
    _emit([record], cfg.format, cfg.no_timing)
    return EXIT_OK


def _cmd_drift(cfg: RunConfig) -> int:
    lengths = _int_list(cfg.segments, "--segments")
    if len(lengths) < 2 or any(x < 1 for x in lengths):
        raise UsageError("--segments needs at least two positive lengths")
    if cfg.seeds < 1:
        raise UsageError("--seeds must be positive")
    if cfg.export:
        config = DriftStreamConfig(
            dim=cfg.dim,
            segment_lengths=lengths,
            rotation_angles=tuple([cfg.rotation] * (len(lengths) - 1)),
            noise_std=cfg.noise,
            seed=0,
        )
        write_libsvm(generate_drift_stream(config), cfg.export)
    result = drift_experiment(
        seeds=range(cfg.seeds),
        dim=cfg.dim,
        segment_lengths=lengths,
        rotation_angle=cfg.rotation,
        noise_std=cfg.noise,
        num_features=cfg.num_features,
        sigma2=cfg.sigma2,
        eta_w=cfg.eta_w,
        eta_u=cfg.eta_u,
        eta_b=cfg.eta_b,
        backend=cfg.backend,
    )
    records = [
        {
            "record": "drift-seed",
            "seed": seed,
            "fixed_rate": result.fixed_rates[i],
            "adaptive_rate": result.adaptive_rates[i],
            "adaptive_better": result.adaptive_rates[i] < result.fixed_rates[i],
        }
        for i, seed in enumerate(result.seeds)
    ]
    records.append(
        {
            "record": "drift",
            "seeds": len(result.seeds),
            "adaptive_wins": result.wins,
            "r_plus": result.test.r_plus,
            "r_minus": result.test.r_minus,
            "z": result.test.z,
        }
    )
    _emit(records, cfg.format, cfg.no_timing)
    return EXIT_OK


def _read_column(path: str) -> list[float]:
    if not os.path.exists(path):
        raise DataFormatError(f"no such file: {path}")
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                raise DataFormatError(f"not a number: {line!r}", line_no=i)
    if not out:
        raise DataFormatError(f"no values in {path}")
    return out


def _cmd_stats(cfg: RunConfig) -> int:
    if cfg.paper_tables:
        if not cfg.a or not cfg.b:
            raise UsageError("--paper-tables needs --a and --b algorithm names")
        comparison = compare_from_tables(cfg.a.lower(), cfg.b.lower())
        res = comparison.result
        record = {
            "record": "stats",
            "a": comparison.algo_a,
            "b": comparison.algo_b,
            "datasets": len(comparison.datasets),
            "r_plus": res.r_plus,
            "r_minus": res.r_minus,
            "t": res.t_stat,
            "z": res.z,
            "significant_at_0.05": abs(res.z) > 1.96,
        }
        if comparison.published_z is not None:
            record["published_z"] = comparison.published_z
            record["matches_published"] = bool(comparison.matches_published)
            if not comparison.matches_published:
                record["discrepancy"] = round(res.z - comparison.published_z, 4)
        _emit([record], cfg.format, cfg.no_timing)
        return EXIT_OK
    if not cfg.a_file or not cfg.b_file:
        raise UsageError("stats needs either --paper-tables or --a-file/--b-file")
    col_a = _read_column(cfg.a_file)
    col_b = _read_column(cfg.b_file)
    if len(col_a) != len(col_b):
        raise DataFormatError(
            f"column lengths differ: {len(col_a)} vs {len(col_b)}"
        )
    res = wilcoxon(col_a, col_b)
    record = {
        "record": "stats",
        "n": res.n,
        "r_plus": res.r_plus,
        "r_minus": res.r_minus,
        "t": res.t_stat,
        "z": res.z,
        "significant_at_0.05": abs(res.z) > 1.96,
    }
    _emit([record], cfg.format, cfg.no_timing)
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "kernel-check": _cmd_kernel_check,
    "drift": _cmd_drift,
    "stats": _cmd_stats,
}


def run(config: RunConfig) -> int:
    """Execute one parsed invocation; returns the process exit code."""
    try:
        return _COMMANDS[config.command](config)
    except UsageError:
        raise
    except TrainingDiverged as exc:
        print(f"rffol: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataFormatError, ModelFormatError, FileNotFoundError, ValueError) as exc:
        print(f"rffol: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv=None) -> int:
    try:
        config = parse_args(sys.argv[1:] if argv is None else list(argv))
        return run(config)
    except UsageError as exc:
        print(f"rffol: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
