"""Experiment configuration: TOML files with [kernel], [drift], [mu0], [sim], [sweep] tables."""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from ..kernels import drift_from_config, kernel_from_config

EXPERIMENTS = (
    "strong_rate", "rank_burgers", "moderate", "lemma55", "entropy_suite",
    "mixedlp_suite", "zvonkin", "picard", "tv_marginal",
)
SWEEPS = ("strong_rate", "rank_burgers", "moderate", "tv_marginal")

# required (section, key) pairs per experiment; section None means top level
REQUIRED = {
    "strong_rate": [("kernel", "type"), ("drift", "type"), ("mu0", "name"), ("sim", "T"), ("sim", "dt"),
                    ("sim", "replicas"), ("sweep", "Ns")],
    "rank_burgers": [("kernel", "type"), ("drift", "type"), ("mu0", "name"), ("sim", "T"), ("sim", "dt"),
                     ("sim", "replicas"), ("sweep", "Ns")],
    "moderate": [("kernel", "type"), ("drift", "type"), ("mu0", "name"), ("sim", "T"), ("sim", "dt"),
                 ("sim", "replicas"), ("sweep", "Ns")],
    "tv_marginal": [("kernel", "type"), ("drift", "type"), ("mu0", "name"), ("sim", "T"), ("sim", "dt"),
                    ("sim", "replicas"), ("sweep", "Ns")],
    "lemma55": [("kernel", "type"), ("mu0", "name"), ("sim", "N"), ("sim", "replicas")],
    "entropy_suite": [("suite", "trials")],
    "mixedlp_suite": [("suite", "trials")],
    "zvonkin": [("zvonkin", "lambdas"), ("zvonkin", "a"), ("zvonkin", "dx")],
    "picard": [("drift", "type"), ("pde", "T"), ("pde", "dx"), ("pde", "iterations")],
}


class ConfigError(ValueError):
    """Invalid configuration; the message carries a line number when known."""


def _line_of(text: str, section: str | None, key: str | None) -> int:
    """1-based line where ``section``/``key`` is (or would be) declared."""
    lines = text.splitlines()
    start, end = 0, len(lines)
    if section is not None:
        pat = re.compile(rf"^\s*\[\s*{re.escape(section)}\s*\]")
        hits = [i for i, ln in enumerate(lines) if pat.match(ln)]
        if not hits:
            return len(lines) + 1 if key is None else len(lines) + 1
        start = hits[0] + 1
        nxt = [i for i in range(start, len(lines)) if re.match(r"^\s*\[", lines[i])]
        end = nxt[0] if nxt else len(lines)
        if key is None:
            return hits[0] + 1
    else:
        nxt = [i for i, ln in enumerate(lines) if re.match(r"^\s*\[", ln)]
        end = nxt[0] if nxt else len(lines)
    if key is not None:
        pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
        for i in range(start, end):
            if pat.match(lines[i]):
                return i + 1
    return start if section is not None else 1


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    output_dir: str = "out"
    threads: int = 1
    kernel: dict = field(default_factory=dict)
    drift: dict = field(default_factory=dict)
    mu0: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    pde: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)
    zvonkin: dict = field(default_factory=dict)
    source: str = ""

    SECTIONS = ("kernel", "drift", "mu0", "sim", "sweep", "pde", "suite", "zvonkin")

    @classmethod
    def from_dict(cls, data: dict, source: str = "") -> "ExperimentConfig":
        data = copy.deepcopy(data)

        def fail(msg, section=None, key=None):
            if source:
                raise ConfigError(f"line {_line_of(source, section, key)}: {msg}")
            raise ConfigError(msg)

        if "experiment" not in data:
            fail("missing required key 'experiment'")
        exp = data["experiment"]
        if exp not in EXPERIMENTS:
            fail(f"unknown experiment '{exp}' (expected one of {', '.join(EXPERIMENTS)})", None, "experiment")
        unknown = set(data) - {"experiment", "seed", "output_dir", "threads", *cls.SECTIONS}
        if unknown:
            key = sorted(unknown)[0]
            fail(f"unknown key '{key}'", None, key)
        for section, key in REQUIRED[exp]:
            if section not in data:
                fail(f"missing required section [{section}] (needs key '{key}')", section, None)
            if key not in data[section]:
                fail(f"missing required key '{key}' in [{section}]", section, None)
        sim = data.get("sim", {})
        if "replicas" in sim and int(sim["replicas"]) < 1:
            fail(f"replicas must be >= 1, got {sim['replicas']}", "sim", "replicas")
        if exp in SWEEPS:
            Ns = data["sweep"]["Ns"]
            if not isinstance(Ns, list) or not Ns or any(int(n) < 1 for n in Ns):
                fail("Ns must be a nonempty list of positive integers", "sweep", "Ns")
            if any(b <= a for a, b in zip(Ns, Ns[1:])):
                fail("Ns must be strictly increasing", "sweep", "Ns")
        # build kernel and drift once so bad parameters fail here, not mid-run
        for section, build in (("kernel", kernel_from_config), ("drift", drift_from_config)):
            if section in data and not (exp == "moderate" and section == "kernel"):
                try:
                    build(data[section])
                except (ValueError, TypeError) as exc:
                    fail(str(exc), section, None)
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            fail("seed must be an unsigned 64-bit integer", None, "seed")
        return cls(
            experiment=exp,
            seed=seed,
            output_dir=str(data.get("output_dir", "out")),
            threads=int(data.get("threads", 1)),
            source=source,
            **{s: dict(data.get(s, {})) for s in cls.SECTIONS},
        )

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(str(exc)) from exc
        return cls.from_dict(data, source=text)

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "seed": self.seed, "output_dir": self.output_dir}
        for s in self.SECTIONS:
            if getattr(self, s):
                out[s] = getattr(self, s)
        return out

    def hash(self) -> str:
        """Digest of the result-determining content (threads and output_dir excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def dump_toml(data: dict) -> str:
    """Minimal TOML writer for the flat section layout used by configs."""

    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(val(x) for x in v) + "]"
        return repr(v)

    lines = [f"{k} = {val(v)}" for k, v in data.items() if not isinstance(v, dict)]
    for k, v in data.items():
        if isinstance(v, dict):
            lines += ["", f"[{k}]"] + [f"{kk} = {val(vv)}" for kk, vv in v.items()]
    return "\n".join(lines) + "\n"
