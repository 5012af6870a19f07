"""Command-line runner: ``patbeam {metrics,gain,optimize,simulate}``.

Each command reads an optional YAML config; flags given on the command
line override it. Outputs are long-format CSV files (plus JSON pattern
files) written to ``--out``. Exit status: 0 on success, 1 on invalid
input, 2 on a numerical failure such as a degenerate pattern.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from ._validation import DegeneratePatternError
from .estimators import make_pattern, resolve_kind
from .io import (
    METRICS_HEADER,
    load_pattern,
    save_pattern,
    write_csv,
    write_cuts,
    write_gain,
    write_sim,
    write_trace,
)
from .model import ChannelConfig
from .optimizer import OptimizerConfig, optimize_pattern
from .patterns import gain_metrics
from .training import SimConfig, error_probability

log = logging.getLogger("patbeam")

DEFAULTS = {
    "metrics": {
        "n": 256,
        "m": [128, 64],
        "patterns": ["exhaustive", "multiarm", "multiarm_random_phase", "random"],
        "seeds": 1,
        "k": None,
        "optimizer": {},
        "pattern_files": [],
    },
    "gain": {
        "pattern": "zc",
        "n": 16,
        "m": 8,
        "k": None,
        "beams": [0],
        "oversample": 8,
        "pattern_file": None,
        "optimizer": {},
    },
    "optimize": {"n": 256, "m": 128, "optimizer": {}},
    "simulate": {
        "n": 256,
        "snr_grid_db": [-10, -5, 0, 5, 10, 15, 20],
        "trials": 10000,
        "chunk": 500,
        "channel": {},
        "curves": [{"pattern": "exhaustive"}],
        "optimizer": {},
    },
}

OPTIMIZER_KEYS = {f.name for f in fields(OptimizerConfig)}


class ConfigError(ValueError):
    pass


def load_config(path, command):
    cfg = {k: (list(v) if isinstance(v, list) else v) for k, v in DEFAULTS[command].items()}
    if path is None:
        return cfg
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(doc) - set(cfg) - {"seed", "threads", "out"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    cfg.update(doc)
    return cfg


def optimizer_config(section, seed):
    section = dict(section or {})
    unknown = set(section) - OPTIMIZER_KEYS
    if unknown:
        raise ConfigError(f"unknown optimizer keys {sorted(unknown)}")
    if "weights" in section:
        section["weights"] = tuple(section["weights"])
    section["seed"] = seed
    return OptimizerConfig(**section)


def channel_config(section):
    section = dict(section or {})
    if isinstance(section.get("los_gain"), (list, tuple)):
        re, im = section["los_gain"]
        section["los_gain"] = complex(re, im)
    try:
        return ChannelConfig(**section)
    except TypeError as exc:
        raise ConfigError(f"channel: {exc}") from None


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def cmd_metrics(cfg, seed, out, threads):
    """One row per (pattern, M) with metrics averaged over ``seeds`` draws."""
    n = int(cfg["n"])
    seeds = [seed + i for i in range(int(cfg["seeds"]))]
    opt = cfg["optimizer"]
    rows = []
    for kind in (resolve_kind(p) for p in _as_list(cfg["patterns"])):
        ms = [n] if kind == "exhaustive" else [int(m) for m in _as_list(cfg["m"])]
        for m in ms:
            pairs = [
                make_pattern(kind, n, m, seed=s, k=cfg["k"],
                             optimizer=optimizer_config(opt, s))
                for s in (seeds if kind not in ("exhaustive", "zc") else seeds[:1])
            ]
            rows.append(_metrics_row(kind, pairs))
    for path in _as_list(cfg["pattern_files"] or []):
        pair = load_pattern(path)
        rows.append(_metrics_row(pair.kind, [pair]))
    target = write_csv(out / "metrics.csv", METRICS_HEADER, rows)
    for row in rows:
        log.info("%s M=%s f1=%.3g f2=%.3g f3=%.3g", row[0], row[2], row[5], row[6], row[8])
    return [target]


def _metrics_row(kind, pairs):
    ms = [gain_metrics(p) for p in pairs]
    first = pairs[0]
    return (
        kind,
        first.n,
        first.m,
        first.meta.get("K"),
        len(pairs),
        float(np.mean([x.f1 for x in ms])),
        float(np.mean([x.f2 for x in ms])),
        float(np.mean([x.f2_pairs for x in ms])),
        float(np.mean([x.f3 for x in ms])),
        all(p.constant_modulus() for p in pairs),
    )


def cmd_gain(cfg, seed, out, threads):
    if cfg["pattern_file"]:
        pair = load_pattern(cfg["pattern_file"])
    else:
        kind = resolve_kind(cfg["pattern"])
        m = None if kind == "exhaustive" else int(cfg["m"])
        pair = make_pattern(
            kind, int(cfg["n"]), m, seed=seed, k=cfg["k"],
            optimizer=optimizer_config(cfg["optimizer"], seed),
        )
    beams = [int(b) for b in _as_list(cfg["beams"])]
    if any(not 0 <= b < pair.n for b in beams):
        raise ConfigError(f"beams must lie in [0, {pair.n})")
    m = gain_metrics(pair)
    log.info("%s N=%d M=%d f1=%.3g f2=%.3g f3=%.3g", pair.kind, pair.n, pair.m,
             m.f1, m.f2, m.f3)
    return [
        write_gain(out / "gain.csv", pair),
        write_cuts(out / "cuts.csv", pair, beams, int(cfg["oversample"])),
    ]


def cmd_optimize(cfg, seed, out, threads):
    n, m = int(cfg["n"]), int(cfg["m"])
    result = optimize_pattern(n, m, optimizer_config(cfg["optimizer"], seed))
    stem = f"N{n}_M{m}_seed{seed}"
    last = result.trace[-1]
    log.info("status=%s iterations=%d f1=%.3g f2=%.3g f3=%.3g", result.status,
             last.iteration, last.f1, last.f2, last.f3)
    return [
        save_pattern(result.pattern, out / f"pattern_{stem}.json"),
        write_trace(out / f"trace_{stem}.csv", result.trace),
    ]


def _curve_pattern(curve, n, seed, opt_section, cache):
    if curve.get("file"):
        return load_pattern(curve["file"])
    kind = resolve_kind(curve.get("pattern", "exhaustive"))
    m = curve.get("m")
    pseed = int(curve.get("seed", seed))
    section = {**(opt_section or {}), **(curve.get("optimizer") or {})}
    key = (kind, m, pseed, curve.get("k"), repr(sorted(section.items())))
    if key not in cache:
        cache[key] = make_pattern(
            kind, n, None if m is None else int(m), seed=pseed, k=curve.get("k"),
            optimizer=optimizer_config(section, pseed),
        )
    return cache[key]


CURVE_KEYS = {"pattern", "m", "k", "seed", "file", "detector", "omp_iterations",
              "label", "optimizer"}


def cmd_simulate(cfg, seed, out, threads):
    n = int(cfg["n"])
    channel = channel_config(cfg["channel"])
    cache = {}
    results = []
    for curve in _as_list(cfg["curves"]):
        if isinstance(curve, str):
            curve = {"pattern": curve}
        unknown = set(curve) - CURVE_KEYS
        if unknown:
            raise ConfigError(f"unknown curve keys {sorted(unknown)}")
        pair = _curve_pattern(curve, n, seed, cfg["optimizer"], cache)
        if pair.n != n:
            raise ConfigError(f"curve pattern has N={pair.n}, expected {n}")
        sim = SimConfig(
            pattern=pair,
            snr_grid_db=tuple(float(s) for s in _as_list(cfg["snr_grid_db"])),
            trials=int(cfg["trials"]),
            seed=seed,
            channel=channel,
            detector=curve.get("detector", "combine"),
            omp_iterations=curve.get("omp_iterations"),
            label=curve.get("label"),
        )
        res = error_probability(sim, threads=threads, chunk=int(cfg["chunk"]))
        log.info("%s: %s", res.name, " ".join(f"{p:.4g}" for p in res.error_probability))
        results.append(res)
    return [write_sim(out / "sim.csv", results)]


COMMANDS = {
    "metrics": cmd_metrics,
    "gain": cmd_gain,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment file")
    common.add_argument("--seed", type=int, help="base seed (default 0)")
    common.add_argument("--out", type=Path, help="output directory (default .)")
    common.add_argument("--threads", type=int, help="worker threads (default 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="patbeam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", parents=[common], help="design metrics table")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--patterns", nargs="+")
    p.add_argument("--seeds", type=int, help="number of seeds to average")
    p.add_argument("--k", type=int, help="arms per multi-armed beam")

    p = sub.add_parser("gain", parents=[common], help="gain matrix and beam cuts")
    p.add_argument("--pattern")
    p.add_argument("--pattern-file", dest="pattern_file", type=Path)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--beams", type=int, nargs="+")
    p.add_argument("--oversample", type=int)

    p = sub.add_parser("optimize", parents=[common], help="optimize a probe pattern")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--weights", type=float, nargs=3)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--method", choices=("lbfgs", "gd"))

    p = sub.add_parser("simulate", parents=[common], help="error probability vs SNR")
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--snr", dest="snr_grid_db", type=float, nargs="+")
    return parser


OPTIMIZER_FLAGS = ("weights", "max_iters", "method")
COMMON_FLAGS = {"command", "config", "seed", "out", "threads", "verbose"}


def _apply_flags(cfg, args):
    for key, value in vars(args).items():
        if key in COMMON_FLAGS or value is None:
            continue
        if key in OPTIMIZER_FLAGS:
            cfg["optimizer"] = {**(cfg.get("optimizer") or {}), key: value}
        else:
            cfg[key] = value
    return cfg


def run(args):
    cfg = _apply_flags(load_config(args.config, args.command), args)
    file_seed, file_threads, file_out = (cfg.pop(k, None) for k in ("seed", "threads", "out"))
    seed = args.seed if args.seed is not None else int(file_seed or 0)
    threads = args.threads if args.threads is not None else int(file_threads or 1)
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    out = args.out if args.out is not None else Path(file_out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](cfg, seed, out, threads)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        written = run(args)
    except DegeneratePatternError as exc:
        print(f"patbeam: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"patbeam: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, OSError, yaml.YAMLError) as exc:
        print(f"patbeam: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
