"""``panelfe`` command line: simulate, estimate and mc-bench.

Exit codes: 0 success, 1 estimation failure, 2 usage or validation error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .clustering import Grouping
from .errors import BalanceError, DomainError, JackknifeError, PanelError, ParseError
from .estimators import DEFAULT_ESTIMATORS, EstimatorSpec, PanelFitter
from .factor_ls import LsConfig
from .inference import HALVES, bootstrap_cluster_se, cluster_se, hc_se, jackknife_report
from .panel import EstimateReport, load_panel_csv, write_panel_csv
from .simulation import KERNEL_SIGNS, SimConfig, default_workers, generate_panel, run_monte_carlo

EXIT_OK, EXIT_ESTIMATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
SCHEMA = 1

log = logging.getLogger("panelfe")


class UsageError(Exception):
    """Invalid flag value; the message names the flag."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(flag):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be an integer, got {text!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {v}")
        return v
    return conv


def _positive_float(flag):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be a number, got {text!r}") from None
        if not v > 0 or not np.isfinite(v):
            raise argparse.ArgumentTypeError(f"{flag} must be a positive finite number, got {text}")
        return v
    return conv


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)


def _write_text(path, text: str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _ls_config(args) -> LsConfig:
    return LsConfig(n_starts=args.starts, tol=args.tol, max_iter=args.max_iter, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="panelfe", description="Panel regression with interactive and grouped fixed effects.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write one simulated panel as CSV")
    s.add_argument("--n", type=_positive_int("--n"), default=100)
    s.add_argument("--t", type=_positive_int("--t"), default=100)
    s.add_argument("--theta", type=_positive_float("--theta"), default=0.125)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rep", type=int, default=0, help="replication index within the seed")
    s.add_argument("--kernel-sign", choices=KERNEL_SIGNS, default="negative")
    s.add_argument("--out", required=True)

    e = sub.add_parser("estimate", help="estimate beta on a long-format panel CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--k", type=_positive_int("--k"), default=1, help="number of regressors")
    e.add_argument("--estimator", choices=("ls", "gfe", "gfe-split", "ols"), default="ls")
    e.add_argument("--factors", type=int, default=None,
                   help="LS factor count (default 5); first-stage factors for gfe (default 20)")
    e.add_argument("--proxies", type=_positive_int("--proxies"), default=2)
    e.add_argument("--jackknife", action="store_true")
    e.add_argument("--se", choices=("auto", "hc", "cluster", "bootstrap", "none"), default="auto")
    e.add_argument("--n-boot", type=_positive_int("--n-boot"), default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--starts", type=_positive_int("--starts"), default=5)
    e.add_argument("--tol", type=_positive_float("--tol"), default=1e-9)
    e.add_argument("--max-iter", type=_positive_int("--max-iter"), default=1000)
    e.add_argument("--json-out", default=None)

    m = sub.add_parser("mc-bench", help="Monte Carlo study on the simulated design")
    m.add_argument("--reps", type=_positive_int("--reps"), default=200)
    m.add_argument("--n", type=_positive_int("--n"), default=100)
    m.add_argument("--t", type=_positive_int("--t"), default=100)
    m.add_argument("--estimators", default=",".join(DEFAULT_ESTIMATORS),
                   help="comma-separated list, e.g. ls5,ls20-jk,gfe,gfe-split")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--theta", type=_positive_float("--theta"), default=0.125)
    m.add_argument("--beta", type=float, default=1.0)
    m.add_argument("--kernel-sign", choices=KERNEL_SIGNS, default="negative")
    m.add_argument("--proxies", type=_positive_int("--proxies"), default=2)
    m.add_argument("--gfe-factors", type=_positive_int("--gfe-factors"), default=20)
    m.add_argument("--threads", type=_positive_int("--threads"), default=None,
                   help="worker processes (default: $PANELFE_THREADS or 1)")
    m.add_argument("--out", default=None, help="CSV path; a .meta.json sidecar is written next to it")
    return p


def cmd_simulate(args) -> int:
    cfg = SimConfig(n=args.n, t=args.t, beta0=args.beta, theta=args.theta,
                    kernel_sign=args.kernel_sign, reps=1, seed=args.seed, estimators=())
    panel = generate_panel(cfg, args.rep)
    write_panel_csv(panel, args.out)
    truth = {
        "schema": SCHEMA,
        "config": {"n": args.n, "t": args.t, "theta": args.theta, "beta": args.beta,
                   "seed": args.seed, "rep": args.rep, "kernel_sign": args.kernel_sign},
        "beta_true": [float(b) for b in panel.beta_true],
        "gamma": panel.gamma_true.tolist(),
    }
    _write_text(f"{args.out}.truth.json", _dumps(truth) + "\n")
    print(f"wrote {args.out} ({args.n} units x {args.t} periods) and {args.out}.truth.json")
    return EXIT_OK


def _spec_from_args(args) -> EstimatorSpec:
    kind = args.estimator.replace("-", "_")
    if kind == "ls":
        r = 5 if args.factors is None else args.factors
        if r < 0:
            raise UsageError("--factors must be >= 0")
        return EstimatorSpec("ls", r, args.jackknife)
    if kind == "ols":
        return EstimatorSpec("ols", 0, args.jackknife)
    r_initial = 20 if args.factors is None else args.factors
    if r_initial < 1:
        raise UsageError("--factors must be >= 1 for grouped estimators")
    if args.proxies > r_initial:
        raise UsageError("--proxies must not exceed --factors")
    return EstimatorSpec(kind, 0, args.jackknife, r_initial, args.proxies)


def _standard_errors(kind: str, spec: EstimatorSpec, fit, fitter: PanelFitter, args):
    if kind == "none":
        return None
    panel = fitter.panel
    if kind == "hc":
        if spec.kind not in ("ls", "ols"):
            raise UsageError("--se hc applies to ls and ols; use --se cluster for grouped estimators")
        return hc_se(fit, panel)
    if kind == "cluster":
        if spec.kind in ("ls", "ols"):
            raise UsageError("--se cluster applies to gfe and gfe-split")
        return cluster_se(fit, panel)
    # bootstrap over unit groups (single units for LS/OLS and split fits)
    if spec.kind == "gfe":
        on = fit.unit_grouping
    else:
        on = Grouping.from_labels(np.arange(panel.n_units))

    def estimator(p):
        return PanelFitter(p, fitter.ls_cfg).fit(spec, "full", with_se=False)[0]

    return bootstrap_cluster_se(estimator, panel, on, n_boot=args.n_boot, seed=args.seed)


def _meta_of(spec: EstimatorSpec, fit) -> dict:
    if spec.kind in ("ls", "ols"):
        return {"R": fit.r, "objective": fit.objective, "iterations": fit.iterations,
                "converged": fit.converged}
    meta = fit.metadata()
    meta.update(R=spec.r_initial, R_star=spec.r_star)
    if spec.kind == "gfe":
        meta.update(group_sizes_units=fit.unit_grouping.sizes, group_sizes_periods=fit.time_grouping.sizes)
    return meta


def cmd_estimate(args) -> int:
    spec = _spec_from_args(args)
    se_kind = args.se
    if se_kind == "auto":
        se_kind = "hc" if spec.kind in ("ls", "ols") else "cluster"
    panel = load_panel_csv(args.input, args.k)
    ls_cfg = _ls_config(args)
    fitter = PanelFitter(panel, ls_cfg)
    base = spec.base()
    beta, _, fit = fitter.fit(base, "full", with_se=False)
    meta = _meta_of(base, fit)
    se = _standard_errors(se_kind, base, fit, fitter, args)
    if se is not None and not np.all(se > 0):
        meta["se_degenerate"] = True
        se = None
    report = EstimateReport(beta, base.tag, se=se, metadata=meta, fit=fit)
    if spec.jackknife:
        halves = {}
        for name in HALVES:
            try:
                halves[name] = fitter.fit(base, name, with_se=False)[0]
            except (PanelError, np.linalg.LinAlgError) as exc:
                raise JackknifeError(name, exc) from exc
        report = jackknife_report(report, halves)
    config = {
        "input": args.input, "k": args.k, "estimator": args.estimator, "label": spec.label,
        "factors": spec.r if spec.kind in ("ls", "ols") else spec.r_initial,
        "proxies": spec.r_star if spec.kind in ("gfe", "gfe_split") else None,
        "jackknife": args.jackknife, "se": se_kind, "n_boot": args.n_boot,
        "ls": {k: v for k, v in asdict(ls_cfg).items() if k != "r"}, "n_units": panel.n_units, "n_periods": panel.n_periods,
    }
    out = {"schema": SCHEMA, "report": report.to_dict(), "config": config}
    text = _dumps(out) + "\n"
    sys.stdout.write(text)
    if args.json_out:
        _write_text(args.json_out, text)
    return EXIT_OK


def cmd_mc_bench(args) -> int:
    names = tuple(s.strip() for s in args.estimators.split(",") if s.strip())
    if not names:
        raise UsageError("--estimators must name at least one estimator")
    try:
        cfg = SimConfig(n=args.n, t=args.t, beta0=args.beta, theta=args.theta,
                        kernel_sign=args.kernel_sign, reps=args.reps, seed=args.seed,
                        estimators=names, r_initial=args.gfe_factors, r_star=args.proxies)
    except DomainError as exc:
        raise UsageError(f"--estimators: {exc}") from None
    workers = args.threads if args.threads is not None else default_workers()
    report = run_monte_carlo(cfg, workers=workers)
    csv_text = report.to_csv()
    meta = {"schema": SCHEMA, "config": report.config,
            "failures": {k: len(v) for k, v in report.failures.items()}}
    if args.out:
        _write_text(args.out, csv_text)
        _write_text(f"{args.out}.meta.json", _dumps(meta) + "\n")
    else:
        sys.stdout.write(csv_text)
    print(report.to_table())
    print(f"seed={cfg.seed} reps={cfg.reps} N={cfg.n} T={cfg.t} theta={cfg.theta!r}")
    return EXIT_OK


_COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "mc-bench": cmd_mc_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"panelfe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"panelfe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BalanceError, ParseError, DomainError) as exc:
        print(f"panelfe: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PanelError, np.linalg.LinAlgError) as exc:
        print(f"panelfe: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"panelfe: IOError: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
