"""Command-line entry point: ``narrowbeam <subcommand> <config> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .array import received_signal, sample_channel
from .beams import read_pattern_csv
from .config import ConfigError, load_config
from .estimator import THREADS_ENV, nmse


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="narrowbeam",
        description="Group-wise narrow beam design and sparse channel estimation experiments.",
        epilog=f"Set {THREADS_ENV} to the number of worker threads (default 1).",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eda-optimize", help="optimize the antenna grouping pattern")
    e.add_argument("config")
    e.add_argument("-o", "--output", required=True, help="pattern CSV")
    e.add_argument("--trace", help="also write the fitness trace CSV here")

    s = sub.add_parser("sweep", help="seeded Monte-Carlo NMSE sweep")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True, help="results CSV")

    b = sub.add_parser("bench", help="runtime benchmark of the estimators")
    b.add_argument("config")
    b.add_argument("-o", "--output", help="bench CSV (printed to stdout otherwise)")

    a = sub.add_parser("af", help="export ambiguity-function curves")
    a.add_argument("--kind", choices=("vertical", "horizontal"), required=True)
    a.add_argument("config")
    a.add_argument("-o", "--output", required=True)
    a.add_argument("--points", type=int, help="samples per axis")
    a.add_argument("--beam", help="beam kind for vertical curves (default: first configured beam)")

    est = sub.add_parser("estimate", help="single estimation run, prints NMSE")
    est.add_argument("config")
    est.add_argument("--seed", type=int, required=True)
    est.add_argument("--snr-db", type=float)
    return p


def _eda(args) -> None:
    config = load_config(args.config, require_files=False)
    result, bounds = harness.optimize_pattern(
        config, lambda i, f: logging.info("iteration %d best %.6g", i, f)
    )
    harness.write_optimized_pattern(config, result, bounds, args.output)
    if args.trace:
        harness.write_trace(result.trace, args.trace)
    print(json.dumps({"fitness": result.best.fitness, "initial": result.trace[0], "iterations": len(result.trace)}))


def _sweep(args) -> None:
    config = load_config(args.config)
    rows = harness.run_sweep(config, args.output,
                             progress=lambda i, n: logging.info("trial %d/%d", i, n))
    failed = sum(r.status != "ok" and r.status != "empty" for r in rows)
    print(json.dumps({"rows": len(rows), "failed": failed, "output": str(args.output)}))


def _bench(args) -> None:
    config = load_config(args.config)
    entries = harness.run_bench(config)
    if args.output:
        harness.write_bench(entries, args.output)
    for e in entries:
        print(f"{e.estimator:10s} median {e.median_ms:10.2f} ms  ratio {e.ratio:.3f}")


def _af(args) -> None:
    config = load_config(args.config, require_files=False)
    pattern = None
    if config.pattern_path is not None and Path(config.pattern_path).is_file():
        pattern = read_pattern_csv(config.pattern_path)[0]
    beam_kind = args.beam
    if args.kind == "vertical" and beam_kind is None:
        beam_kind = config.beams[0]
        if beam_kind == "group-wise-opt" and pattern is None:
            raise ConfigError("vertical AF of group-wise-opt needs an existing pattern file")
    harness.export_curves(f"{args.kind}-af", config, args.output, pattern=pattern, n_points=args.points,
                          beam_kind=beam_kind)


def _estimate(args) -> None:
    config = load_config(args.config)
    snr, k = config.points()[0]
    if args.snr_db is not None:
        snr = args.snr_db
    ch_seed, noise_seed = np.random.SeedSequence(args.seed).spawn(2)
    channel = sample_channel(k, config.geometry, config.prior, gain_profile=config.gain_profile,
                             rng_seed=np.random.default_rng(ch_seed))
    nv = harness.noise_variance([p.gain for p in channel.paths], snr)
    out = []
    for kind in config.beams:
        beam = harness.build_beam(kind, config)
        y = received_signal(beam, channel.h, nv, rng_seed=np.random.default_rng(noise_seed))
        for est in config.estimators:
            if not harness.supports(est, beam):
                continue
            res = harness.run_estimator(est, y, beam, nv, config, k)
            err = nmse(res.h_hat, channel.h)
            out.append({"beam": kind, "estimator": est, "snr_db": snr, "k_paths": k, "nmse": err,
                        "nmse_db": float(10 * np.log10(err)) if err > 0 else float("-inf")})
    for row in out:
        print(json.dumps(row))


COMMANDS = {"eda-optimize": _eda, "sweep": _sweep, "bench": _bench, "af": _af, "estimate": _estimate}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1 if isinstance(exc, (ConfigError, FileNotFoundError, ValueError)) else 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
