"""Throughput comparison of the compiled and pure-numpy training loops.

Runs the same online pass over one synthetic stream on every available
backend and reports steps per second plus the compiled/python speedup,
once per update mode.  Backends must agree on the mistake count for the
run to count; disagreement makes the script exit nonzero.

Usage:
    python3 benchmarks/backend_bench.py [--steps N] [--features D]
                                        [--dim d] [--seed S]
"""

import argparse
import math
import sys
import time

import numpy as np

from rffol import _core
from rffol.data import DriftStreamConfig, generate_drift_stream
from rffol.features import MapVariant, sample_frequencies
from rffol.learner import UpdateMode, init_model, train_online

MODES = {
    "w-only": (UpdateMode.W_ONLY, MapVariant.COS_SIN, 0.001),
    "wu": (UpdateMode.WU, MapVariant.MPU_SCALED, 100.0),
    "wub": (UpdateMode.WUB, MapVariant.MPU_SCALED, 100.0),
}


def build_stream(steps, dim, seed):
    config = DriftStreamConfig(
        dim=dim,
        segment_lengths=[steps // 2, steps - steps // 2],
        rotation_angles=[math.pi / 2],
        noise_std=0.0,
        seed=seed,
    )
    return generate_drift_stream(config)


def run_once(stream, backend, mode, variant, eta_w, num_features, seed):
    fmap = sample_frequencies(stream.dim, num_features, 1.0, seed, variant=variant)
    model = init_model(fmap, 1, eta_w, 0.1, 0.01, mode=mode)
    t0 = time.perf_counter()
    _, trace = train_online(model, stream, backend=backend)
    return time.perf_counter() - t0, trace.mistakes


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--features", type=int, default=256)
    parser.add_argument("--dim", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    stream = build_stream(args.steps, args.dim, args.seed)
    backends = _core.available_backends()
    print(
        f"stream: {stream.n} instances, dim {stream.dim}, "
        f"D={args.features}; backends: {', '.join(backends)}"
    )
    print(f"{'mode':<8}{'backend':<10}{'steps/s':>12}{'seconds':>10}  mistakes")

    failures = 0
    for name, (mode, variant, eta_w) in MODES.items():
        rows = {}
        for backend in backends:
            seconds, mistakes = run_once(
                stream, backend, mode, variant, eta_w, args.features, args.seed
            )
            rows[backend] = (seconds, mistakes)
            print(
                f"{name:<8}{backend:<10}{stream.n / seconds:>12.0f}"
                f"{seconds:>10.3f}  {mistakes}"
            )
        counts = {m for _, m in rows.values()}
        if len(counts) != 1:
            print(f"{name}: backends disagree on mistakes: {rows}", file=sys.stderr)
            failures += 1
        if "compiled" in rows and "python" in rows:
            speedup = rows["python"][0] / rows["compiled"][0]
            print(f"{name:<8}compiled speedup x{speedup:.1f}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
