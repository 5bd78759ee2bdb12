"""Command line: ``iscc run | sweep | validate-aoi | selftest``."""
from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from . import __version__, aoi, harness
from .config import ConfigError, SystemConfig, default_config, load_config

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 2, 3


def _config(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else default_config()
    overrides = {}
    for item in args.set or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = yaml.safe_load(raw)
    return cfg.replace(**overrides) if overrides else cfg


def _values(text: str) -> tuple:
    vals = tuple(yaml.safe_load(v) for v in text.split(",") if v.strip())
    if not vals:
        raise ConfigError("--values needs at least one value")
    return vals


def _csv_list(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def cmd_run(args) -> int:
    cfg = _config(args)
    table = harness.single(cfg, args.algo, args.seed)
    harness.export(table, args.out)
    res = table.cells[0].result
    best = f"{res.best_F:.6g}" if res.feasible else "none feasible"
    print(f"{args.algo} seed={args.seed} best F={best} evaluations={res.evaluations} -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.param not in cfg.flat():
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    spec = harness.SweepSpec(args.param, _values(args.values), tuple(range(args.seeds)), _csv_list(args.algos))
    table = harness.sweep(spec, cfg, n_workers=args.workers, out=args.out)
    for m in table.medians():
        med = "none feasible" if m["median_F"] is None else f"{m['median_F']:.6g}"
        print(f"{spec.param}={m['value']} {m['algo']}: median F={med} ({m['feasible']}/{m['runs']} feasible)")
    return EXIT_OK


def cmd_validate_aoi(args) -> int:
    rng = np.random.default_rng(args.seed)
    checks = aoi.validate_against_des(aoi.sample_valid_triples(args.triples, rng), args.formula, args.packets, rng)
    bad = 0
    for c in checks:
        r = c.rates
        ok = c.rel_err < args.tol
        bad += not ok
        print(f"mu_bs={r.mu_bs:.4f} mu_trans={r.mu_trans:.4f} mu_uav={r.mu_uav:.4f} "
              f"{args.formula}={c.analytic:.5f} des={c.simulated:.5f} rel={c.rel_err:.3%} {'ok' if ok else 'FAIL'}")
    print(f"{len(checks) - bad}/{len(checks)} within {args.tol:.0%}")
    return EXIT_OK if bad == 0 else EXIT_FAILED


def cmd_selftest(args) -> int:
    from .selftest import run_all

    failed = 0
    for check, secs in run_all(args.seed):
        failed += not check.ok
        print(f"{'PASS' if check.ok else 'FAIL'} {check.name}: {check.detail} ({secs:.2f}s)")
    return EXIT_OK if failed == 0 else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iscc", description="Secure ISCC allocation with learned-operator MOEA")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config (default: the shipped defaults)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key, repeatable")

    r = sub.add_parser("run", help="one optimisation run")
    common(r)
    r.add_argument("--algo", choices=harness.ALGOS, default="dqn")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="parameter sweep over values x seeds x algorithms")
    common(s)
    s.add_argument("--param", required=True, help="dotted config key, e.g. dims.n_bs")
    s.add_argument("--values", required=True, help="comma separated, e.g. 60,70,80")
    s.add_argument("--seeds", type=int, default=10, help="seeds 0..K-1")
    s.add_argument("--algos", default="dqn", help="comma separated subset of dqn,ga,imode")
    s.add_argument("--workers", type=int, default=None, help="process pool width (default ISCC_THREADS or CPUs)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate-aoi", help="analytic AAoI against the discrete-event simulation")
    v.add_argument("--formula", choices=tuple(aoi.AAOI_FORMULAS), default="theorem")
    v.add_argument("--triples", type=int, default=10)
    v.add_argument("--packets", type=int, default=1_000_000)
    v.add_argument("--tol", type=float, default=0.02)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_validate_aoi)

    t = sub.add_parser("selftest", help="built-in property checks")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
