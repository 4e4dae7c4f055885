"""Command-line runner: ``starsfd {optimize,validate,gradcheck,sweep}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, SystemConfig, config_from_overrides, desk_config, load_config
from .correlation import build_correlations
from .gradients import gradcheck, gradcheck_csv
from .monte_carlo import report_json, validate_closed_form
from .optimizer import best_restart, multi_start
from .pbm import PBM, random_pbm
from .spectral_efficiency import MODES, evaluate, make_variant

SWEEP_SCHEMA = "sweep-v1"
SWEEP_VARIABLES = ("N", "p_b", "p_u", "M_R", "M_T", "p_train", "K", "elem_size_frac")
GRADCHECK_LIMIT = 1e-4


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    modes: tuple = ("FD_STARS",)
    restarts: int = 5

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; "
                             f"choose from {', '.join(SWEEP_VARIABLES)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if not self.modes:
            raise ValueError("sweep needs at least one mode")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown mode(s) {bad}")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


def apply_sweep_value(cfg, variable, value):
    """Configuration with one sweep variable set (powers in dBm)."""
    if variable == "N":
        side = math.isqrt(int(value))
        if side * side != int(value):
            raise ValueError(f"N={value} is not a square grid size")
        return cfg.replace(N_h=side, N_v=side)
    if variable in ("p_b", "p_u", "p_train"):
        return cfg.replace(**{f"{variable}_dBm": float(value)})
    if variable in ("M_R", "M_T"):
        return cfg.replace(**{variable: int(value)})
    if variable == "K":
        K = int(value)
        if K % 2:
            raise ValueError("K sweep splits users evenly between regions; K must be even")
        tau = max(K, cfg.tau_up, cfg.tau_dp)
        return cfg.replace(K_r=K // 2, K_t=K // 2, tau_up=tau, tau_dp=tau)
    return cfg.replace(elem_size_frac=float(value))


def solve_mode(cfg, mode, restarts, seed, corr=None):
    """SE report for one mode: best of ``restarts`` ascents, or mean over random PBMs."""
    corr = corr or build_correlations(cfg)
    variant = make_variant(cfg, corr, mode)
    if mode == "RANDOM_PBM":
        reports = [evaluate(cfg, corr, random_pbm(cfg.N, np.random.SeedSequence([seed, i])), variant)
                   for i in range(restarts)]
        return (float(np.mean([r.ul_se for r in reports])),
                float(np.mean([r.dl_se for r in reports])))
    best = best_restart(multi_start(cfg, corr, variant, restarts, seed))
    report = evaluate(cfg, corr, best.pbm, variant)
    return report.ul_se, report.dl_se


def _sweep_task(args):
    cfg, variable, value, mode, restarts, seed = args
    point = apply_sweep_value(cfg, variable, value)
    ul, dl = solve_mode(point, mode, restarts, seed)
    return [SWEEP_SCHEMA, variable, repr(value), mode, repr(ul), repr(dl), repr(ul + dl)]


def run_sweep(cfg, spec, seed, jobs=1):
    tasks = [(cfg, spec.variable, v, m, spec.restarts, seed) for v in spec.values for m in spec.modes]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["schema", "variable", "value", "mode", "ul_se", "dl_se", "sum_se"])
    writer.writerows(rows)
    return buf.getvalue()


# -- argument handling --------------------------------------------------------------

def _config(args):
    base = desk_config() if args.profile == "desk" else SystemConfig()
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.config:
        values = load_config(args.config).to_dict()
        return config_from_overrides(overrides, SystemConfig(**values))
    return config_from_overrides(overrides, base)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def cmd_optimize(args):
    cfg = _config(args)
    out = _out_dir(args)
    corr = build_correlations(cfg)
    variant = make_variant(cfg, corr, args.mode)
    results = multi_start(cfg, corr, variant, args.restarts, cfg.seed, jobs=args.jobs,
                          max_iter=args.max_iter, step_rule=args.step_rule)
    for r in results:
        _write(out / f"trace_{r.restart:02d}.csv", r.trace.to_csv())
    best = best_restart(results)
    _write(out / "best_pbm.json", best.pbm.to_json())
    report = evaluate(cfg, corr, best.pbm, variant)
    summary = {
        "mode": args.mode, "config_hash": cfg.digest(), "seed": cfg.seed,
        "best_restart": best.restart,
        "restarts": [{"restart": r.restart, "objective": r.objective,
                      "iterations": r.trace.n_iter, "terminated_by": r.trace.terminated_by}
                     for r in results],
        "report": report.to_dict(),
    }
    _write(out / "optimize.json", json.dumps(summary, indent=2, sort_keys=True))
    print(f"best sum SE {report.sum_se:.6f} bit/s/Hz (restart {best.restart})")
    return 0


def cmd_validate(args):
    if args.realizations <= 0:
        raise ValueError("--realizations must be positive")
    cfg = _config(args)
    out = _out_dir(args)
    corr = build_correlations(cfg)
    if args.pbm:
        pbm = PBM.from_json(Path(args.pbm).read_text())
    else:
        pbm = random_pbm(cfg.N, cfg.seed)
    report = validate_closed_form(cfg, corr, pbm, args.realizations, args.tolerance,
                                  seed=cfg.seed, jobs=args.jobs, corrupt=args.corrupt)
    _write(out / "validation.json", report_json(report))
    failed = [f"{r['term']}[{r['user']}]" for r in report["terms"] if r["gated"] and not r["pass"]]
    print(report["verdict"] + (f": {', '.join(failed)}" if failed else ""))
    return 0 if report["verdict"] == "PASS" else 1


def _parse_dims(text):
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 6:
        raise ValueError("--dims expects M_T,M_R,N_h,N_v,K_r,K_t")
    return dict(zip(("M_T", "M_R", "N_h", "N_v", "K_r", "K_t"), parts))


def cmd_gradcheck(args):
    cfg = _config(args)
    dims = _parse_dims(args.dims)
    K = dims["K_r"] + dims["K_t"]
    cfg = cfg.replace(**dims, tau_up=max(K, cfg.tau_up), tau_dp=max(K, cfg.tau_dp))
    out = _out_dir(args)
    corr = build_correlations(cfg)
    variant = make_variant(cfg, corr, args.mode)
    from .optimizer import random_start
    text = []
    worst = 0.0
    for s in range(args.seeds):
        pbm = random_start(cfg, variant, np.random.SeedSequence([cfg.seed, s]))
        rows = gradcheck(cfg, corr, pbm, variant, step=args.step)
        if args.corrupt:
            for row in rows:
                row.analytic = row.analytic * args.corrupt
        body = gradcheck_csv(rows)
        text.append(body if s == 0 else body.split("\n", 1)[1])
        worst = max(worst, max(r.rel_error for r in rows))
    _write(out / "gradcheck.csv", "".join(text))
    status = "PASS" if worst <= GRADCHECK_LIMIT else "FAIL"
    print(f"{status}: max relative error {worst:.3e}")
    return 0 if status == "PASS" else 1


def cmd_sweep(args):
    cfg = _config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    modes = tuple(m for m in args.modes.split(",") if m.strip())
    spec = SweepSpec(args.variable, tuple(values), modes, args.restarts)
    out = _out_dir(args)
    text = run_sweep(cfg, spec, cfg.seed, jobs=args.jobs)
    _write(out / f"sweep_{spec.variable}.csv", text)
    sys.stdout.write(text)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("--profile", choices=("desk", "full"), default="desk",
                        help="base profile when no --config is given (default: desk)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", default="out", help="output directory")

    parser = argparse.ArgumentParser(prog="starsfd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", parents=[common], help="optimize the surface coefficients")
    p.add_argument("--mode", choices=("FD_STARS", "HD_STARS", "FD_CRIS"), default="FD_STARS")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--step-rule", choices=("bb2", "bb1", "fixed"), default="bb2")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("validate", parents=[common], help="closed form vs Monte Carlo")
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--pbm", help="coefficients JSON (default: random from the seed)")
    p.add_argument("--corrupt", help="double this closed-form term (negative control)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gradcheck", parents=[common], help="analytic vs numeric gradients")
    p.add_argument("--dims", default="8,8,2,4,2,2", help="M_T,M_R,N_h,N_v,K_r,K_t")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--mode", choices=("FD_STARS", "HD_STARS", "FD_CRIS"), default="FD_STARS")
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--corrupt", type=float, help="scale analytic gradients (negative control)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("sweep", parents=[common], help="optimized SE over one parameter")
    p.add_argument("--variable", required=True, choices=SWEEP_VARIABLES)
    p.add_argument("--values", required=True, help="comma-separated values (powers in dBm)")
    p.add_argument("--modes", default="FD_STARS", help="comma-separated subset of " + ",".join(MODES))
    p.add_argument("--restarts", type=int, default=5)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
