"""Command line entry point: run, verify and report."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..particles import BudgetExceededError
from .config import ConfigError, ExperimentConfig
from .runner import MANIFEST, RunManifest, plot_from_rows, read_metrics

THREADS_ENV = "CHAOSLAB_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return None
    try:
        n = int(env)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chaoslab", description="Propagation-of-chaos experiments and acceptance checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: output_dir from the config)")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--threads", type=int, help=f"worker threads (env {THREADS_ENV})")
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("suite", nargs="?", default="fast", choices=("fast", "full"))
    v.add_argument("--threads", type=int)
    rep = sub.add_parser("report", help="emit a run's results from its manifest")
    rep.add_argument("manifest", help="manifest.json or the directory containing it")
    rep.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    return p


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_toml(args.config)
    if args.seed is not None:
        data = cfg.to_dict()
        data["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(data)
    threads = _threads(args.threads)
    if threads is not None:
        if threads < 1:
            raise UsageError("thread count must be >= 1")
        cfg.threads = threads
    from .runner import run

    m = run(cfg, args.out)
    out = Path(args.out or cfg.output_dir)
    print(f"{cfg.experiment}: wrote {', '.join(m.files)} and {MANIFEST} to {out} ({m.wall_time_s:.1f}s)")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import verify

    results = verify(args.suite, threads=_threads(args.threads) or 1)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


def cmd_report(args) -> int:
    path = Path(args.manifest)
    if path.is_dir():
        path = path / MANIFEST
    if not path.exists():
        raise UsageError(f"no manifest at {path}")
    m = RunManifest.load(path)
    base = path.parent
    if args.format == "csv":
        sys.stdout.write((base / "metrics.csv").read_text())
    elif args.format == "json":
        if "report.json" in m.files:
            sys.stdout.write((base / "report.json").read_text())
        else:
            print(json.dumps({"experiment": m.experiment, "metrics": read_metrics(base / "metrics.csv")}, indent=2))
    else:
        svg = plot_from_rows(m.experiment, read_metrics(base / "metrics.csv"))
        if svg is None:
            raise UsageError(f"experiment '{m.experiment}' has no N sweep to plot")
        sys.stdout.write(svg)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return {"run": cmd_run, "verify": cmd_verify, "report": cmd_report}[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"budget guard: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
