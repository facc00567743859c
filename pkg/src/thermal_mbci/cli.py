"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 size-guard violation.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .correlators import compute_gn, normalized_gn
from .errors import ConfigError, SizeLimitError
from .linalg import (
    NAIVE_MAX_N,
    PRESETS,
    RYSER_MAX_N,
    UnitarySpec,
    permanent_naive,
    permanent_ryser,
    random_unitary,
)
from .montecarlo import FrequencyGrid, estimate_gn
from .validation import SUITES, run_equivalence, run_identities, run_mc

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_SIZE = 3

MAX_DIM = 64


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def cmd_gen_unitary(args) -> int:
    if not 1 <= args.dim <= MAX_DIM:
        raise ConfigError("--dim", f"must be in [1, {MAX_DIM}], got {args.dim}")
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise ConfigError("--preset", f"unknown preset {args.preset!r}; expected one of {PRESETS}")
        try:
            spec = UnitarySpec(args.dim, construction="named-preset", preset=args.preset)
        except ValueError as exc:
            raise ConfigError("--preset", str(exc)) from None
        u = random_unitary(spec)
        doc = cfgmod.unitary_document(u, construction="named-preset", preset=args.preset)
    else:
        u = random_unitary(UnitarySpec(args.dim, seed=args.seed))
        doc = cfgmod.unitary_document(u, seed=args.seed)
    _emit(cfgmod.dumps(doc) + "\n", args.output)
    return EXIT_OK


def _formulation(args, cfg) -> str:
    name = args.formulation or cfg.formulation
    return cfgmod.FORMULATION_ALIASES[name]


def cmd_gn(args) -> int:
    cfg = cfgmod.load_config(args.config)
    inst = cfg.to_instance()
    formulation = _formulation(args, cfg)
    start = time.perf_counter()
    res = compute_gn(inst, formulation)
    wall_ms = (time.perf_counter() - start) * 1e3
    record = {
        "value": res.value,
        "formulation": res.formulation,
        "residual_imag": res.residual_imag,
        "n_terms": res.n_terms,
        "wall_time_ms": wall_ms,
        "g_normalized": normalized_gn(inst, res.value),
    }
    if args.mc or cfg.mc is not None:
        mc = cfg.mc or cfgmod.McSettings()
        est = estimate_gn(
            inst,
            FrequencyGrid(mc.n_bins, mc.span_sigmas),
            args.samples or mc.n_samples,
            mc.seed,
            threads=args.threads,
        )
        record["mc"] = {"mean": est.mean, "std_error": est.std_error,
                        "n_samples": est.n_samples, "seed": est.seed}
    if cfg.output == "csv":
        _emit(cfgmod.write_csv(list(record)[:6], [[record[k] for k in list(record)[:6]]]), args.output)
    else:
        _emit(cfgmod.dumps(record) + "\n", args.output)
    return EXIT_OK


def cmd_scan(args) -> int:
    what, port = args.vary
    if what != "time-of-port":
        raise ConfigError("--vary", f"only 'time-of-port <d>' is supported, got {what!r}")
    try:
        port = int(port)
    except ValueError:
        raise ConfigError("--vary", f"port must be an integer, got {port!r}") from None
    if args.steps < 1:
        raise ConfigError("--steps", "must be >= 1")
    cfg = cfgmod.load_config(args.config)
    inst = cfg.to_instance()
    if port not in inst.event.ports:
        raise ConfigError("--vary", f"port {port} is not in the detection sample {inst.event.ports}")
    formulation = _formulation(args, cfg)
    to_abs = 1.0 / cfg.delta_omega if cfg.time_unit == "inverse_bandwidth" else 1.0
    rows = []
    for tau in np.linspace(args.start, args.stop, args.steps + 1):
        tau = float(tau)
        scanned = inst.with_event(inst.event.with_time(port, tau * to_abs))
        value = compute_gn(scanned, formulation).value
        rows.append([tau, value, normalized_gn(scanned, value)])
    _emit(cfgmod.write_csv(["tau", "g_n", "g_n_normalized"], rows), args.output)
    return EXIT_OK


def _table(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    cells = [[k for k in keys]] + [
        [f"{r[k]:.6g}" if isinstance(r[k], float) else str(r[k]) for k in keys] for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(keys))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"


def cmd_validate(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    reports = []
    for suite in suites:
        if suite == "equivalence":
            rep = run_equivalence(args.trials or 100, args.seed)
        elif suite == "identities":
            rep = run_identities(args.trials or 20, args.seed)
        else:
            rep = run_mc(args.trials or 10, args.seed, n_samples=args.samples or 1_000_000)
        reports.append(rep)
        sys.stdout.write(f"== {suite} ==\n")
        sys.stdout.write(_table(rep.rows))
        for failure in rep.failures:
            sys.stdout.write("failing instance (replay config):\n" + cfgmod.dumps(failure) + "\n")
    summary = [r.summary() for r in reports]
    sys.stdout.write(cfgmod.dumps(summary[0] if len(summary) == 1 else summary) + "\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VALIDATION


def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.replace(" ", "").split(",") if s]
    except ValueError:
        raise ConfigError("--sizes", f"expected comma-separated integers, got {args.sizes!r}") from None
    if args.repeats < 5:
        raise ConfigError("--repeats", "at least 5 repetitions are required")
    kernel = permanent_ryser if args.kernel == "ryser" else permanent_naive
    limit = RYSER_MAX_N if args.kernel == "ryser" else NAIVE_MAX_N
    for n in sizes:
        if not 0 <= n <= limit:
            raise SizeLimitError(f"{args.kernel} kernel supports n <= {limit}, got {n}")
    rng = np.random.default_rng(args.seed)
    kernel(np.ones((2, 2)))  # trigger JIT compilation outside the timed region
    rows = []
    for n in sizes:
        m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter_ns()
            kernel(m)
            times.append(time.perf_counter_ns() - t0)
        median = float(statistics.median(times))
        rows.append([n, median, 1e9 / median if median > 0 else float("inf")])
    _emit(cfgmod.write_csv(["n", "median_ns", "throughput"], rows), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermal-mbci",
        description="Correlation functions of multi-mode thermal light in linear interferometers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-unitary", help="write an interferometer unitary as JSON")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", default=None, help=f"one of {', '.join(PRESETS)}")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_gen_unitary)

    formulations = list(cfgmod.FORMULATION_ALIASES)

    p = sub.add_parser("gn", help="evaluate the Nth-order correlation function for a config")
    p.add_argument("config")
    p.add_argument("--formulation", choices=formulations)
    p.add_argument("--mc", action="store_true", help="add a Monte-Carlo estimate")
    p.add_argument("--samples", type=int, help="override the Monte-Carlo sample count")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_gn)

    p = sub.add_parser("scan", help="scan the detection time of one port")
    p.add_argument("config")
    p.add_argument("--vary", nargs=2, metavar=("time-of-port", "PORT"), required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--formulation", choices=formulations)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("validate", help="run randomized validation suites")
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int)
    p.add_argument("--samples", type=int, help="Monte-Carlo samples per instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="time a permanent kernel")
    p.add_argument("--kernel", choices=["ryser", "naive"], default="ryser")
    p.add_argument("--sizes", default="4,8,12,16")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeLimitError as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE


if __name__ == "__main__":
    sys.exit(main())
