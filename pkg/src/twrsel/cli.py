"""Command-line entry point: ``twrsel {simulate,compare,analyze,selfcheck}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import MgfSpec, array_gain, asymptotic_ser, bound_constants, ser_bc_avg, ser_ma_avg
from .config import load_config
from .core import TwrError
from .harness import analytic_bound, compare_schemes, records_to_csv, run_sweep, write_results

log = logging.getLogger("twrsel")


def _sweep_overrides(sweep, args):
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        kw["workers"] = args.workers
    return replace(sweep, **kw) if kw else sweep


def _progress(rec):
    log.info("%6.2f dB  %s  trials=%d errors=%d ser=%.3e", rec.snr_db, rec.scheme, rec.trials, rec.errors_e2e, rec.ser)


def cmd_simulate(args) -> int:
    cfg, sweep = load_config(args.config)
    sweep = _sweep_overrides(sweep, args)
    recs = run_sweep(cfg, sweep, progress=_progress)
    csv_path, json_path = write_results(recs, cfg, sweep, args.out, stem=args.stem or Path(args.config).stem)
    sys.stdout.write(records_to_csv(recs))
    log.info("wrote %s and %s", csv_path, json_path)
    return 0


def cmd_compare(args) -> int:
    loaded = [load_config(p) for p in args.configs]
    cfgs = [c for c, _ in loaded]
    sweep = _sweep_overrides(loaded[0][1], args)
    for path, (_, sw) in zip(args.configs[1:], loaded[1:]):
        if replace(sw, seed=sweep.seed, workers=sweep.workers) != sweep:
            log.warning("%s: sweep settings differ from the first config; using the first", path)
    window = tuple(args.window) if args.window else None
    report = compare_schemes(cfgs, sweep, window=window, progress=_progress)
    print(report.table())
    if args.out:
        out = Path(args.out)
        for path, cfg, recs in zip(args.configs, cfgs, report.records.values()):
            write_results(recs, cfg, sweep, out, stem=Path(path).stem)
    return 0


def cmd_analyze(args) -> int:
    cfg, sweep = load_config(args.config)
    cfg = cfg.resolved()
    c = cfg.constellation
    lay = cfg.layout
    ups = cfg.upsilon_value if cfg.uses_rotation else None
    consts = bound_constants(c, ups, cfg.p, min(lay))
    print(f"# {cfg.scheme} {cfg.modulation} layout={list(lay)} p={cfg.p!r} upsilon={cfg.upsilon_value!r}")
    print(f"# alpha={consts.alpha!r} beta={consts.beta!r} C1={consts.C1!r} C2={consts.C2!r} C3={consts.C3!r} d_min={consts.d_min!r}")
    gain = array_gain(None, consts.beta, lay) if consts.beta > 0 else None
    if gain is not None:
        print(f"# Gd={gain[0]} Gc={gain[1]!r}")
    else:
        print("# beta = 0: no diversity guarantee from the instantaneous bound")
    print("snr_db,ser_ma_bound,ser_bc_bound,ser_e2e_bound,asymptotic")
    closed = analytic_bound(cfg, 0.0) is not None
    for snr in sweep.snr_grid:
        mu = 10.0 ** (snr / 10.0)
        ma = bc = e2e = ""
        if closed:
            spec = MgfSpec(len(lay), lay[0], mu)
            ma_v = ser_ma_avg(c, spec)
            bc_v = ser_bc_avg(spec, cfg.p, c.M)
            ma, bc, e2e = repr(ma_v), repr(bc_v), repr(ma_v + bc_v)
        asym = repr(asymptotic_ser(consts.alpha, gain[1], gain[0], mu)) if gain is not None else ""
        print(f"{snr!r},{ma},{bc},{e2e},{asym}")
    return 0


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.detail})")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twrsel", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-q", "--quiet", action="store_true", help="only print results")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo SER sweep for one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory for the CSV and JSON sidecar")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--stem", help="output file stem (default: config file stem)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several schemes on one sweep and fit slopes")
    p.add_argument("--configs", nargs="+", required=True)
    p.add_argument("--window", nargs=2, type=float, metavar=("LO_DB", "HI_DB"))
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze", help="closed-form bound and asymptotic curves")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("selfcheck", help="fast invariant suite")
    p.set_defaults(func=cmd_selfcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (TwrError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
