"""Seeded runs, parameter sweeps and deterministic result files."""
from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import ConfigError, SystemConfig
from .dqn import run_dqn_moea
from .moea import RunResult, run_ga, run_imode
from .problem import ISCCProblem

ALGOS = ("dqn", "ga", "imode")
LOG_COLUMNS = ("param", "value", "algo", "seed", "generation", "con", "fea", "div", "best_F", "op", "reward",
               "loss")


def streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Channel-ensemble and algorithm generators derived from one root seed."""
    ch, algo = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(ch), np.random.default_rng(algo)


def run(cfg: SystemConfig, algo: str, seed: int) -> RunResult:
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGOS}")
    ch_rng, algo_rng = streams(seed)
    problem = ISCCProblem(cfg, ch_rng)
    budget = cfg.moea.budget
    if algo == "dqn":
        return run_dqn_moea(problem, budget, cfg.dqn, algo_rng, cfg.moea, seed=seed)
    if algo == "ga":
        return run_ga(problem, budget, algo_rng, cfg.moea, seed=seed)
    return run_imode(problem, budget, algo_rng, cfg.moea, seed=seed)


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    seeds: tuple
    algos: tuple = ("dqn",)

    def __post_init__(self):
        for name in ("values", "seeds", "algos"):
            if not getattr(self, name):
                raise ConfigError(f"sweep {name} must be non-empty")
        bad = [a for a in self.algos if a not in ALGOS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; expected a subset of {ALGOS}")

    def cells(self):
        return list(itertools.product(self.values, self.seeds, self.algos))


@dataclass
class Cell:
    value: object
    algo: str
    seed: int
    result: RunResult


@dataclass
class SweepTable:
    base: SystemConfig
    spec: SweepSpec | None
    cells: list[Cell] = field(default_factory=list)
    complete: bool = False

    def medians(self) -> list[dict]:
        """Median best F per (value, algo), in sweep order."""
        out = []
        values = self.spec.values if self.spec else (None,)
        algos = self.spec.algos if self.spec else sorted({c.algo for c in self.cells})
        for v, a in itertools.product(values, algos):
            fs = [c.result.best_F for c in self.cells if c.value == v and c.algo == a]
            if not fs:
                continue
            out.append({"value": v, "algo": a, "runs": len(fs), "feasible": int(np.sum(np.isfinite(fs))),
                        "median_F": _num(float(np.median(fs)))})
        return out


def workers(requested: int | None = None) -> int:
    n = requested or int(os.environ.get("ISCC_THREADS", "0") or 0) or (os.cpu_count() or 1)
    return max(1, n)


def _cell(args):
    cfg, value, algo, seed = args
    res = run(cfg, algo, seed)
    res.population = None  # not needed downstream, and heavy to ship between processes
    return Cell(value, algo, seed, res)


def sweep(spec: SweepSpec, base: SystemConfig, n_workers: int | None = None, out: str | Path | None = None
          ) -> SweepTable:
    """Every (value, seed, algo) cell of ``spec``. On failure the finished cells are exported before re-raising."""
    jobs = [(base.replace(**{spec.param: v}), v, a, s) for v, s, a in spec.cells()]
    table = SweepTable(base, spec)
    n = min(workers(n_workers), len(jobs))
    try:
        if n == 1:
            for job in jobs:
                table.cells.append(_cell(job))
        else:
            with ProcessPoolExecutor(max_workers=n) as pool:
                for c in pool.map(_cell, jobs):
                    table.cells.append(c)
        table.complete = True
    finally:
        if out is not None:
            export(table, out)
    return table


def single(cfg: SystemConfig, algo: str, seed: int) -> SweepTable:
    res = run(cfg, algo, seed)
    return SweepTable(cfg, None, [Cell(None, algo, seed, res)], complete=True)


# persistence


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _csv(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def manifest(table: SweepTable) -> dict:
    seeds = sorted({c.seed for c in table.cells}) if table.spec is None else list(table.spec.seeds)
    return {
        "package": "iscc",
        "version": __version__,
        "config_hash": table.base.config_hash(),
        "seeds": seeds,
        "algos": sorted({c.algo for c in table.cells}) if table.spec is None else list(table.spec.algos),
        "param": None if table.spec is None else table.spec.param,
        "values": None if table.spec is None else list(table.spec.values),
        "complete": table.complete,
    }


def export(table: SweepTable, out: str | Path) -> Path:
    """runs.csv (per-generation logs), pareto.csv (final fronts), summary.json, config.yaml."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    param = table.spec.param if table.spec else None
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for c in table.cells:
            for row in c.result.log:
                w.writerow([_csv(x) for x in (param, c.value, c.algo, c.seed, row.generation, row.con, row.fea,
                                              row.div, _num(row.best_F), row.op, row.reward, row.loss)])
    dim = 4
    with open(out / "pareto.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value", "algo", "seed", "member", *(f"gene{i}" for i in range(dim)),
                    *(f"f{i + 1}" for i in range(4))])
        for c in table.cells:
            for i, (g, f) in enumerate(zip(c.result.pareto_genes, c.result.pareto_objectives)):
                w.writerow([_csv(x) for x in (param, c.value, c.algo, c.seed, i, *map(float, g), *map(float, f))])
    runs = [{
        "value": c.value, "algo": c.algo, "seed": c.seed, "best_F": _num(c.result.best_F),
        "best_genes": None if c.result.best_genes is None else [float(x) for x in c.result.best_genes],
        "best_objectives": None if c.result.best_objectives is None else [float(x) for x in c.result.best_objectives],
        "evaluations": c.result.evaluations, "generations": len(c.result.log) - 1,
        "pareto_objectives": [[float(x) for x in f] for f in c.result.pareto_objectives],
        "extra": {k: v for k, v in sorted(c.result.extra.items()) if k != "imode_trace"},
    } for c in table.cells]
    summary = {"manifest": manifest(table), "medians": table.medians(), "runs": runs}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    cfg_dict = json.loads(json.dumps(table.base.to_dict()))
    (out / "config.yaml").write_text(yaml.safe_dump(cfg_dict, sort_keys=True))
    return out


def read_summary(path: str | Path) -> dict:
    p = Path(path)
    return json.loads((p / "summary.json" if p.is_dir() else p).read_text())
