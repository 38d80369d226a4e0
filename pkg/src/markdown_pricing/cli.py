"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invariant violation,
3 infeasible configuration.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import (
    ExperimentSpec,
    NoiseSpec,
    lower_bound_fixture,
    merge_sections,
    parse_ini,
    spec_from_sections,
)
from .errors import ConfigFormatError, ConfigurationError, InvariantViolation, MarkdownPricingError, ParameterError

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_INFEASIBLE = 0, 1, 2, 3
OUT_ENV = "MARKDOWN_PRICING_OUT"


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(v: float) -> str:
    return "%.17g" % v


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _hash_of(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _out_dir(args, spec: Optional[ExperimentSpec] = None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if spec is not None and spec.output_dir:
        return Path(spec.output_dir)
    return Path(os.environ.get(OUT_ENV, "results"))


def _header(pairs: dict) -> str:
    return "".join(f"# {k}={v}\n" for k, v in pairs.items())


# -- spec assembly ----------------------------------------------------------------


def _spec_from_args(args, study: str) -> ExperimentSpec:
    sections: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        sections = parse_ini(text)
    flags = {
        "experiment": {
            "policies": tuple(p.strip() for p in args.policy.split(",")) if args.policy else None,
            "horizons": tuple(args.n) if args.n else None,
            "replications": getattr(args, "reps", None),
            "seed": args.seed,
            "workers": getattr(args, "workers", None),
            "icm_m": args.m,
            "icm_s": args.s,
            "test_mode": True if args.test_mode else None,
        },
        "family": {
            "name": args.family,
            "theta": tuple(args.theta) if args.theta else None,
            "c2": args.c2,
            "c_star": args.c_star,
            "c_sg": args.c_sg,
        },
        "noise": {"kind": args.noise, "sigma": args.sigma},
    }
    merged = merge_sections(sections, flags)
    merged.setdefault("experiment", {})["study"] = study
    return spec_from_sections(merged)


def _add_spec_flags(p: argparse.ArgumentParser, reps: bool = True) -> None:
    p.add_argument("--config", help="INI config file; flags override its values")
    p.add_argument("--policy", help="policy roster, comma separated (cm, icm, mle_greedy, oracle, fixed:<p>)")
    p.add_argument("--family", help="family name (linear, exponential, logit, poly1, poly2)")
    p.add_argument("--theta", type=float, nargs="+", help="fixed parameter vector")
    p.add_argument("--noise", choices=("gaussian_clipped", "bernoulli", "none"))
    p.add_argument("--sigma", type=float)
    p.add_argument("--n", type=int, nargs="+", help="horizon(s)")
    p.add_argument("--seed", type=int)
    p.add_argument("--m", type=int, help="ICM phases before feasibility reduction")
    p.add_argument("--s", type=int, help="sensitivity used for ICM tuning")
    p.add_argument("--c2", type=float)
    p.add_argument("--c-star", dest="c_star", type=float)
    p.add_argument("--c-sg", dest="c_sg", type=float)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    p.add_argument("--test-mode", action="store_true", help=argparse.SUPPRESS)
    if reps:
        p.add_argument("--reps", type=int)
        p.add_argument("--workers", type=int)


# -- subcommands ----------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .engine import build_run, simulate

    spec = _spec_from_args(args, "simulate")
    policy = spec.policies[0]
    model, noise, pol, rng, n = build_run(spec, policy, 0, args.replication)
    tr = simulate(pol, model, noise, n, rng)
    h = spec.config_hash()
    head = {
        "config_hash": h,
        "seed": spec.seed,
        "policy": policy,
        "family": model.family.name,
        "theta": " ".join(_fmt(v) for v in model.theta),
        "n": n,
        "replication": args.replication,
        "noise": f"{noise.kind}:{_fmt(noise.sigma)}",
        "total_regret": _fmt(tr.total_regret),
        "price_increases": tr.meta["price_increases"],
        "events": " ".join(tr.meta["events"]) or "-",
    }
    lines = [_header(head), "t,price,demand,regret\n"]
    lines.extend(f"{t + 1},{_fmt(p)},{_fmt(d)},{_fmt(r)}\n"
                 for t, (p, d, r) in enumerate(zip(tr.prices.tolist(), tr.demands.tolist(),
                                                   tr.per_round_regret.tolist())))
    path = _out_dir(args, spec) / f"trajectory_{policy.replace(':', '-')}_{n}_{args.replication}_{h}.csv"
    _write(path, "".join(lines))
    print(f"total regret {tr.total_regret:.6g} over {n} rounds -> {path}")
    return EXIT_OK


def cmd_batch(args) -> int:
    from .engine import run_batch

    spec = _spec_from_args(args, "batch")
    cells = run_batch(spec)
    h = spec.config_hash()
    k = spec.family.family().crossing_k
    out = _out_dir(args, spec)
    head = {"config_hash": h, "seed": spec.seed, "family": spec.family.name,
            "noise": f"{spec.noise.kind}:{_fmt(spec.noise.sigma)}"}
    rows = [_header(head), "policy,n,replication,theta,total_regret,price_increases,overshoot\n"]
    for cell in cells:
        for r in cell.replications:
            rows.append(f"{r.policy},{r.n},{r.replication},{' '.join(_fmt(v) for v in r.theta)},"
                        f"{_fmt(r.total_regret)},{r.price_increases},{int(r.overshoot)}\n")
    summary = {"config_hash": h, "seed": spec.seed, "config": spec.to_dict(),
               "cells": [c.summary() for c in cells]}
    _write(out / f"batch_{k}_{h}.csv", "".join(rows))
    _write(out / f"batch_{k}_{h}.json", _dump_json(summary))
    for c in cells:
        s = c.summary()
        print(f"{s['policy']:>12} n={s['n']:<8d} mean regret {s['mean_regret']:.6g} +- {s['stderr']:.3g}"
              f"  increases {s['mean_price_increases']:.3g}")
    violations = sum(c.summary()["monotonicity_violations"] for c in cells)
    return EXIT_INVARIANT if violations else EXIT_OK


def cmd_tune(args) -> int:
    from .tuning import solve_lp

    t = solve_lp(args.n, args.k, args.s, args.m)
    print(f"n={t.n} k={t.k} s={t.s} m={t.m} (requested {t.requested_m})")
    print(f"{'quantity':<10} {'value':>22}")
    print(f"{'h':<10} {t.h:>22.6g}")
    for j, nj in enumerate(t.n_schedule, 1):
        print(f"{'n_' + str(j):<10} {nj:>22d}")
    print(f"{'rho':<10} {t.rho:>22.4f}")
    print(f"{'rounds':<10} {t.exploration_rounds:>22d}")
    if t.s == 2:
        print(f"note: the s=2 shortcut h = n^(-m/(m(k+1)+1)) gives h={t.theorem_form_h():.6g}; "
              f"the tight constraint 1 - s*y = x gives h = n^(-y) with y={t.y:.6g}, which is used here")
    return EXIT_OK


def _study_out(args, name: str, k: int, params: dict, table: list, summary: dict) -> None:
    h = _hash_of(params)
    out = _out_dir(args)
    head = _header({"config_hash": h, "seed": params["seed"], "study": name})
    _write(out / f"{name}_{k}_{h}.csv", head + "".join(table))
    _write(out / f"{name}_{k}_{h}.json", _dump_json({"config_hash": h, "seed": params["seed"],
                                                     "params": params, **summary}))


def cmd_scaling(args) -> int:
    from .experiments import cm_rate_study, icm_rate_study

    noise = None
    if args.noise or args.sigma is not None:
        noise = NoiseSpec(args.noise or "gaussian_clipped", args.sigma if args.sigma is not None else 0.1)
    if args.policy == "cm":
        res = cm_rate_study(args.grid, args.reps, args.seed, noise, workers=args.workers)
        k = 0
    else:
        res = icm_rate_study(args.k, args.s, args.grid, args.reps, args.seed, noise, policy=args.policy,
                             workers=args.workers)
        k = args.k
    params = {"study": "scaling", "policy": args.policy, "k": k, "s": args.s, "grid": list(args.grid),
              "reps": args.reps, "seed": args.seed, "sigma": args.sigma, "noise": args.noise}
    table = ["n,mean_regret,stderr\n"] + [f"{n},{_fmt(m)},{_fmt(s)}\n"
                                          for n, m, s in zip(res.grid, res.mean_regret, res.stderr)]
    _study_out(args, "scaling", k, params, table, res.to_dict())
    print(f"{res.label}: fitted exponent {res.fitted_exponent:.4f} ({res.transform}), r^2 {res.r_squared:.4f}")
    for n, m, s in zip(res.grid, res.mean_regret, res.stderr):
        print(f"  n={n:<9d} regret {m:.6g} +- {s:.3g}")
    return EXIT_OK


def cmd_separation(args) -> int:
    from .experiments import separation_study

    noise = NoiseSpec(args.noise or "gaussian_clipped", args.sigma if args.sigma is not None else 0.1)
    rep = separation_study(args.grid, args.reps, args.seed, noise, workers=args.workers)
    params = {"study": "separation", "grid": list(args.grid), "reps": args.reps, "seed": args.seed,
              "sigma": noise.sigma, "noise": noise.kind}
    table = ["policy,n,mean_regret,stderr,ratio,ratio_stderr,fraction_with_increase\n"]
    for pol in ("cm", "mle_greedy"):
        r = rep[pol]
        for i, n in enumerate(rep["grid"]):
            table.append(f"{pol},{n},{_fmt(r['mean_regret'][i])},{_fmt(r['stderr'][i])},{_fmt(r['ratio'][i])},"
                         f"{_fmt(r['ratio_stderr'][i])},{_fmt(r['fraction_with_increase'][i])}\n")
    _study_out(args, "separation", 0, params, table, rep)
    print(f"cm regret/(ln n)^2: {np.round(rep['cm']['ratio'], 4).tolist()} spread {rep['cm']['ratio_spread']:.3f}")
    print(f"mle_greedy regret/ln n: {np.round(rep['mle_greedy']['ratio'], 4).tolist()} "
          f"spread {rep['mle_greedy']['ratio_spread']:.3f}")
    print(f"mle_greedy runs with a price increase: {rep['mle_greedy']['fraction_with_increase']}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    from .demand import make_polynomial_pair

    records = []
    for t in args.t:
        records.append(lower_bound_fixture(t, args.horizon))
    for k in args.pair_k:
        red, blue = make_polynomial_pair(k)
        records.append({
            "kind": "polynomial_pair",
            "k": k,
            "price_domain": list(red.price_domain),
            "scale": red.family.scale,
            "red_coefficients": red.theta.tolist(),
            "blue_coefficients": blue.theta.tolist(),
            "red_p_star": red.optimal_price(),
            "blue_p_star": blue.optimal_price(),
        })
    text = _dump_json({"fixtures": records})
    if args.out:
        _write(Path(args.out) / "fixtures.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_all

    checks = run_all(quick=args.quick)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    p = Parser(prog="markdown-pricing", description="Markdown pricing policies and regret studies.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=Parser)
    sub.required = True

    sp = sub.add_parser("simulate", help="run one trajectory and write it to a file")
    _add_spec_flags(sp, reps=False)
    sp.add_argument("--replication", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("batch", help="replicated runs with a summary")
    _add_spec_flags(sp)
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("tune", help="closed-form ICM tuning")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--s", type=int, default=2)
    sp.add_argument("--m", type=int, default=1)
    sp.set_defaults(func=cmd_tune)

    for name, func, default_reps in (("scaling", cmd_scaling, 100), ("separation", cmd_separation, 200)):
        sp = sub.add_parser(name, help=f"{name} study")
        sp.add_argument("--grid", type=int, nargs="+", default=[10**3, 10**4, 10**5, 10**6])
        sp.add_argument("--reps", type=int, default=default_reps)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--noise", choices=("gaussian_clipped", "bernoulli", "none"))
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out")
        if name == "scaling":
            sp.add_argument("--policy", default="icm", help="cm or icm")
            sp.add_argument("--k", type=int, default=1)
            sp.add_argument("--s", type=int, default=2)
        sp.set_defaults(func=func)

    sp = sub.add_parser("fixtures", help="print lower-bound instance definitions")
    sp.add_argument("--horizon", type=int, default=10_000)
    sp.add_argument("--t", type=int, nargs="*", default=[100, 400, 900])
    sp.add_argument("--pair-k", type=int, nargs="*", default=[1, 2, 3])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fixtures)

    sp = sub.add_parser("verify", help="run the invariant suite")
    sp.add_argument("--quick", action="store_true")
    sp.set_defaults(func=cmd_verify)
    return p


def cli_run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigFormatError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ConfigurationError as exc:
        print(f"infeasible configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParameterError, MarkdownPricingError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
