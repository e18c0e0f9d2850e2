"""Command-line benchmark harness.

Loads an instance, runs one configuration for a number of repetitions with
derived per-repetition seeds (base + index), and writes the aggregated
quality / time-to-find / iteration statistics as CSV or JSON. Run-logs go to
$PACORN_LOG_DIR when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .colony import ColonyParams
from .dynamics import DynamicsConfig
from .instance import load_instance
from .orchestrator import RunConfig, RunReport, run

CSV_COLUMNS = (
    "instance",
    "mode",
    "workers",
    "copy_ant",
    "best_gap",
    "avg3_gap",
    "avg10_gap",
    "avg_time3_s",
    "avg_time10_s",
    "iterations_total",
    "seed",
)


@dataclass
class ExperimentSpec:
    instance_path: str
    config: RunConfig
    repetitions: int = 1
    optimum_file: str | None = None
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")


@dataclass
class AggregateReport:
    reports: list[RunReport]
    mean_best_gap: float | None = None
    mean_avg3_gap: float | None = None
    mean_avg10_gap: float | None = None
    mean_time3_s: float | None = None
    mean_time10_s: float | None = None
    mean_iterations: float = 0.0

    def __post_init__(self):
        def mean_of(attr):
            vals = [getattr(r, attr) for r in self.reports]
            if any(v is None for v in vals):
                return None
            return float(np.mean(vals))

        self.mean_best_gap = mean_of("best_gap")
        self.mean_avg3_gap = mean_of("avg3_gap")
        self.mean_avg10_gap = mean_of("avg10_gap")
        self.mean_time3_s = mean_of("avg_time3_s")
        self.mean_time10_s = mean_of("avg_time10_s")
        self.mean_iterations = float(np.mean([r.iterations_total for r in self.reports]))

    def to_dict(self) -> dict:
        return {
            "repetitions": len(self.reports),
            "mean_best_gap": self.mean_best_gap,
            "mean_avg3_gap": self.mean_avg3_gap,
            "mean_avg10_gap": self.mean_avg10_gap,
            "mean_time3_s": self.mean_time3_s,
            "mean_time10_s": self.mean_time10_s,
            "mean_iterations": self.mean_iterations,
            "reports": [r.to_dict() for r in self.reports],
        }


def load_optima(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        table = json.load(fh)
    return {str(k): int(v) for k, v in table.items()}


def run_experiment(spec: ExperimentSpec) -> AggregateReport:
    """Execute the repetitions and write the report where asked."""
    cfg = spec.config
    inst = load_instance(spec.instance_path, candidate_k=cfg.params.candidate_k)
    optimum = cfg.optimum
    if spec.optimum_file:
        optimum = load_optima(spec.optimum_file).get(inst.name, optimum)
    reports = []
    for rep in range(spec.repetitions):
        cfg_rep = replace(
            cfg,
            params=replace(cfg.params, seed=cfg.params.seed + rep),
            dynamics=replace(cfg.dynamics, rng_seed=cfg.dynamics.rng_seed + rep),
            optimum=optimum,
        )
        reports.append(run(inst, cfg_rep))
    agg = AggregateReport(reports)
    if spec.out:
        with open(spec.out, "w", encoding="utf-8") as fh:
            fh.write(format_report(agg, spec.fmt))
    return agg


def _fmt_gap(v):
    return "" if v is None else f"{v:.2f}"


def _fmt_time(v):
    return "" if v is None else str(round(v))


def _csv_row(r: RunReport) -> str:
    return ",".join(
        (
            r.instance,
            r.mode,
            str(r.workers),
            "on" if r.copy_ant else "off",
            _fmt_gap(r.best_gap),
            _fmt_gap(r.avg3_gap),
            _fmt_gap(r.avg10_gap),
            _fmt_time(r.avg_time3_s),
            _fmt_time(r.avg_time10_s),
            str(r.iterations_total),
            str(r.seed),
        )
    )


def format_report(agg: AggregateReport, fmt: str) -> str:
    """CSV (one row per repetition plus a mean row) or JSON."""
    if fmt == "json":
        return json.dumps(agg.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    first = agg.reports[0]
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(_csv_row(r) for r in agg.reports)
    lines.append(
        ",".join(
            (
                first.instance,
                first.mode,
                str(first.workers),
                "on" if first.copy_ant else "off",
                _fmt_gap(agg.mean_best_gap),
                _fmt_gap(agg.mean_avg3_gap),
                _fmt_gap(agg.mean_avg10_gap),
                _fmt_time(agg.mean_time3_s),
                _fmt_time(agg.mean_time10_s),
                f"{agg.mean_iterations:.1f}",
                "mean",
            )
        )
    )
    return "\n".join(lines) + "\n"


def _onoff(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pacorn",
        description="Ant-colony solver for the dynamic TSP (serial or master-slave parallel)",
    )
    ap.add_argument("--instance", required=True, help="TSPLIB EUC_2D file")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--mode", choices=("serial", "sr", "gs"), default="serial")
    ap.add_argument("--copy-ant", type=_onoff, default=False, metavar="on|off")
    ap.add_argument("--ants", type=int, default=50)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=5.0)
    ap.add_argument("--rho", type=float, default=0.2)
    ap.add_argument("--ls", choices=("none", "2opt", "3opt"), default="2opt")
    ap.add_argument("--interval-mod", type=int, default=100)
    ap.add_argument("--dynamic", type=_onoff, default=True, metavar="on|off")
    budget = ap.add_mutually_exclusive_group(required=True)
    budget.add_argument("--time-s", type=float)
    budget.add_argument("--iters", type=int)
    ap.add_argument("--reps", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--optimum-file", help="JSON map of instance name to optimum length")
    ap.add_argument("--out", help="report file; omit to print to stdout")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--latency-ms", type=float, default=0.0)
    return ap


def spec_from_args(args) -> ExperimentSpec:
    if args.mode == "serial":
        if args.workers not in (0, 1):
            raise ValueError("serial mode runs one worker; drop --workers or set it to 1")
        workers = 1
    else:
        if args.workers < 2:
            raise ValueError(f"{args.mode} mode needs --workers >= 2")
        workers = args.workers
    params = ColonyParams(
        alpha=args.alpha,
        beta=args.beta,
        rho=args.rho,
        n_ants=args.ants,
        local_search=args.ls,
        seed=args.seed,
    )
    dyn = DynamicsConfig(
        enabled=args.dynamic,
        interval_mod=args.interval_mod,
        rng_seed=args.seed,
    )
    cfg = RunConfig(
        workers=workers,
        exchange_mode=args.mode if args.mode != "serial" else "sr",
        copy_ant_enabled=args.copy_ant,
        iterations=args.iters,
        time_limit_s=args.time_s,
        params=params,
        dynamics=dyn,
        latency_ms=args.latency_ms,
        log_dir=os.environ.get("PACORN_LOG_DIR"),
    )
    return ExperimentSpec(
        instance_path=args.instance,
        config=cfg,
        repetitions=args.reps,
        optimum_file=args.optimum_file,
        out=args.out,
        fmt=args.format,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        agg = run_experiment(spec)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"pacorn: error: {exc}", file=sys.stderr)
        return 2
    text = format_report(agg, spec.fmt)
    if spec.out:
        print(f"wrote {spec.out}")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
