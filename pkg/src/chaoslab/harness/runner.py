"""Run an experiment end to end and persist metrics, reports, plots and a manifest."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .. import __version__
from ..grid import format_value
from .config import ExperimentConfig
from .experiments import ExperimentResult, run_experiment
from .svg import loglog_svg

CSV_HEADER = ["experiment", "N", "metric", "value", "std_error"]
MANIFEST = "manifest.json"

# metric plotted per sweep experiment
PLOTTED = {
    "strong_rate": ("strong_error", "fluctuation"),
    "rank_burgers": ("cdf_sup_error",),
    "moderate": ("strong_error",),
    "tv_marginal": ("tv", "tv_noise_floor", "kac"),
}


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    version: str
    wall_time_s: float
    seeds: dict
    files: list
    config: dict = field(default_factory=dict)
    threads: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def metrics_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in result.rows:
        w.writerow([result.experiment, "" if r.N is None else str(int(r.N)), r.metric,
                    format_value(r.value), format_value(r.std_error)])
    return buf.getvalue()


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_from_rows(experiment: str, rows: list[dict]) -> str | None:
    metrics = PLOTTED.get(experiment)
    if not metrics:
        return None
    series = {}
    for m in metrics:
        pts = [(float(r["N"]), float(r["value"])) for r in rows if r["metric"] == m and r["N"]]
        if pts:
            series[m] = ([p[0] for p in pts], [p[1] for p in pts])
    if not series:
        return None
    return loglog_svg(series, title=experiment, ylabel="value")


def run(cfg: ExperimentConfig, out: str | None = None) -> RunManifest:
    """Execute ``cfg`` and write metrics.csv, report.json, plot.svg and the manifest into ``out``."""
    out_dir = Path(out or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = run_experiment(cfg)
    files = []
    csv_text = metrics_csv(result)
    (out_dir / "metrics.csv").write_text(csv_text)
    files.append("metrics.csv")
    if result.report is not None:
        (out_dir / "report.json").write_text(result.report.to_json() + "\n")
        files.append("report.json")
    svg = plot_from_rows(cfg.experiment, list(csv.DictReader(io.StringIO(csv_text))))
    if svg is not None:
        (out_dir / "plot.svg").write_text(svg)
        files.append("plot.svg")
    manifest = RunManifest(
        experiment=cfg.experiment,
        config_hash=cfg.hash(),
        version=__version__,
        wall_time_s=round(time.perf_counter() - start, 3),
        seeds={"master": cfg.seed, **result.seeds},
        files=files,
        config=cfg.to_dict(),
        threads=cfg.threads,
    )
    (out_dir / MANIFEST).write_text(manifest.to_json() + "\n")
    return manifest


def rerun(manifest_path, out: str | None = None, threads: int | None = None) -> RunManifest:
    """Re-execute the configuration recorded in a manifest."""
    m = RunManifest.load(manifest_path)
    cfg = ExperimentConfig.from_dict(m.config)
    if threads is not None:
        cfg.threads = threads
    return run(cfg, out or str(Path(manifest_path).parent))
