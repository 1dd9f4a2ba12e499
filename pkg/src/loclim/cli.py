"""Command-line interface.

Subcommands: simulate | estimate | constants | classify | rates | clt |
moments | verify-conditions | report.  Experiment subcommands read an INI
config plus flag overrides, append one JSON record per run to the record
store, and write CSV tables; ``report`` re-renders tables and figures from
a record store.  Exit codes: 0 success, 2 configuration error, 3 numerical
accuracy error.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .conditions import Condition, check_condition
from .configfile import load_config, merge_overrides, parse_float
from .errors import AccuracyError, CapacityError, ConfigError, DomainError
from .experiments import (
    ExperimentConfig,
    geometric_grid,
    run_clt_experiment,
    run_rate_experiment,
    resolve_test_function,
)
from .figures import render_figures
from .heatkernel import MultiIndex
from .limits import ConstantName, classify, constant
from .loctime import EstimatorConfig, IntegrationRule, estimate, existence_gate
from .moments import MomentQuery, moment_formula, moment_simulated
from .processes import Kind, ProcessSpec, sample_path
from .records import append_record, read_records, write_tables

_KINDS = {
    "fbm": Kind.FBM,
    "sub_fbm": Kind.SUB_FBM,
    "subfbm": Kind.SUB_FBM,
    "bi_fbm": Kind.BI_FBM,
    "bifbm": Kind.BI_FBM,
}


def _parse_vector(text: str, key: str) -> tuple:
    try:
        return tuple(float(Fraction(part)) for part in text.split(","))
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"cannot parse {key} = {text!r} as comma-separated numbers") from err


def _hurst_value(text: str):
    """Keep rational Hurst inputs exact; returns (float, label-or-None)."""
    text = text.strip()
    if "/" in text:
        frac = Fraction(text)
        return float(frac), text
    return float(text), None


def _spec_from(args, section: dict) -> ProcessSpec:
    kind_text = getattr(args, "kind", None) or section.get("kind", "fbm")
    kind = _KINDS.get(kind_text.lower())
    if kind is None:
        raise ConfigError(f"unknown process kind {kind_text!r}")
    hurst_text = getattr(args, "hurst", None) or section.get("hurst")
    if hurst_text is None:
        raise ConfigError("a Hurst index is required (--H or [process] hurst)")
    hurst, label = _hurst_value(str(hurst_text))
    sigma = float(getattr(args, "sigma", None) or section.get("sigma", 1.0))
    dim = int(getattr(args, "dim", None) or section.get("dim", 1))
    bif_h = getattr(args, "bifbm_h", None) or section.get("bifbm_h")
    bif_k = getattr(args, "bifbm_k", None) or section.get("bifbm_k")
    spec = ProcessSpec(
        kind=kind,
        hurst=hurst,
        sigma=sigma,
        dim=dim,
        bifbm_h=float(bif_h) if bif_h is not None else None,
        bifbm_k=float(bif_k) if bif_k is not None else None,
    )
    return spec, label


def _add_process_flags(sub):
    sub.add_argument("--kind", help="fbm | sub_fbm | bi_fbm")
    sub.add_argument("--H", dest="hurst", help="Hurst index (floats or rationals like 1/3)")
    sub.add_argument("--sigma", type=float, help="variance scale (fBm)")
    sub.add_argument("--dim", "--d", dest="dim", type=int, help="dimension d")
    sub.add_argument("--bifbm-h", dest="bifbm_h", type=float, help="bi-fBm H'")
    sub.add_argument("--bifbm-k", dest="bifbm_k", type=float, help="bi-fBm K")


def _cmd_simulate(args) -> int:
    spec, _ = _spec_from(args, {})
    path = sample_path(spec, args.T, args.n, args.seed, method=args.method)
    print(f"# kind={spec.kind.value} H={spec.hurst!r} sigma={spec.sigma!r} "
          f"d={spec.dim} T={args.T!r} n_t={args.n} seed={args.seed} method={path.method}")
    header = "t " + " ".join(f"X{ell+1}" for ell in range(spec.dim))
    print(header)
    for i, t in enumerate(path.grid):
        row = " ".join(repr(float(v)) for v in path.values[:, i])
        print(f"{float(t)!r} {row}")
    return 0


def _cmd_estimate(args) -> int:
    spec, _ = _spec_from(args, {})
    x = _parse_vector(args.x, "--x") if args.x else (0.0,) * spec.dim
    k = _parse_vector(args.k, "--k") if args.k else (0.0,) * spec.dim
    cfg = EstimatorConfig(
        epsilon=parse_float(args.epsilon, "--epsilon"),
        x=x,
        k=MultiIndex(k),
        T=args.T,
        rule=IntegrationRule(args.rule),
    )
    path = sample_path(spec, args.T, args.n, args.seed)
    result = estimate(path, cfg)
    gate = existence_gate(spec.hurst, cfg.k, spec.dim)
    print(f"estimate = {result.value!r}")
    print(f"existence gate H(2|k|+d) < 1: {'ok' if gate else 'VIOLATED (divergent limit)'}")
    return 0


def _cmd_constants(args) -> int:
    try:
        name = ConstantName(args.name)
    except ValueError:
        valid = ", ".join(sorted(c.value for c in ConstantName))
        raise ConfigError(f"unknown constant {args.name!r}; valid names: {valid}")
    params = {}
    if args.hurst is not None:
        hurst, label = _hurst_value(args.hurst)
        params["hurst"] = Fraction(args.hurst) if label else hurst
    if args.sigma is not None:
        params["sigma"] = args.sigma
    params["dim"] = args.dim or 1
    if args.k:
        params["k"] = _parse_vector(args.k, "--k")
    params["order_n"] = args.N or 2
    if args.f:
        params["f"] = resolve_test_function(args.f, params["dim"])
    result = constant(name, **params)
    print(result)
    if result.tensor is not None:
        print(f"prefactor = {result.prefactor}")
        for idx, val in sorted(result.tensor.items()):
            print(f"moment{idx} = {val!r}")
    return 0


def _cmd_classify(args) -> int:
    hurst, label = _hurst_value(args.hurst)
    k = _parse_vector(args.k, "--k") if args.k else (0.0,) * args.dim
    report = classify(label if label else hurst, k, args.dim, args.N)
    print(report)
    print(f"H(2|k|+d) = {report.product!r}; boundary_exact = {report.boundary_exact}")
    return 0


def _experiment_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else {}
    config = merge_overrides(
        config,
        "experiment",
        eps0=args.eps0,
        ratio=args.ratio,
        count=args.count,
        eps_ref=args.eps_ref,
        replicates=args.replicates,
        master_seed=args.master_seed,
        workers=args.workers,
        f=args.f,
        order_n=args.N,
        label=args.label,
    )
    config = merge_overrides(
        config, "estimator", n_t=args.n_t, x=args.x, k=args.k, T=args.T
    )
    proc = config.get("process", {})
    est = config.get("estimator", {})
    exp = config.get("experiment", {})
    spec, label = _spec_from(args, proc)

    if "eps0" not in exp or "count" not in exp:
        raise ConfigError("experiment needs eps0 and count (config file or flags)")
    grid = geometric_grid(
        parse_float(exp["eps0"], "eps0"),
        parse_float(exp.get("ratio", "0.5"), "ratio"),
        int(exp["count"]),
    )
    dim = spec.dim
    x = _parse_vector(est["x"], "x") if "x" in est else (0.0,) * dim
    k = _parse_vector(est["k"], "k") if "k" in est else (0.0,) * dim
    gaps = ()
    if "tightness_gaps" in exp:
        gaps = _parse_vector(exp["tightness_gaps"], "tightness_gaps")
    return ExperimentConfig(
        spec=spec,
        eps_grid=grid,
        x=x,
        k=k,
        T=parse_float(est.get("T", "1.0"), "T"),
        order_n=int(exp.get("order_n", 2)),
        f_name=exp.get("f", "p1"),
        replicates=int(exp.get("replicates", 200)),
        eps_ref=parse_float(exp["eps_ref"], "eps_ref") if "eps_ref" in exp else None,
        n_t=int(est["n_t"]) if "n_t" in est else None,
        master_seed=int(exp.get("master_seed", 1)),
        workers=int(exp["workers"]) if "workers" in exp else None,
        rule=IntegrationRule(est.get("rule", "trapezoid")),
        tightness_gaps=gaps,
        hurst_label=label,
        label=exp.get("label", ""),
    )


def _emit_record(args, record) -> None:
    config = load_config(args.config) if args.config else {}
    out = config.get("output", {})
    records_path = args.out_records or out.get("records")
    if records_path:
        append_record(records_path, record.to_dict())
        print(f"record appended to {records_path}")
    tables_dir = args.tables_dir or out.get("tables_dir")
    if tables_dir:
        for p in write_tables([record.to_dict()], tables_dir):
            print(f"table written: {p}")


def _cmd_rates(args) -> int:
    config = _experiment_config(args)
    record = run_rate_experiment(config)
    res = record.results
    print(f"regime: {record.regime_detail}")
    print(f"slope = {res['slope']:.4f} +- {res['slope_se']:.4f}")
    for e, v in zip(res["eps"], res["mean_abs_delta"]):
        print(f"  eps={e!r}  mean|delta|={v!r}")
    if res["lp_limit_prediction"] is not None:
        print(
            f"LP limit: empirical {res['lp_limit_empirical']:+.5f} vs "
            f"coefficient x moments {res['lp_limit_prediction']:+.5f}"
        )
    _emit_record(args, record)
    return 0


def _cmd_clt(args) -> int:
    config = _experiment_config(args)
    record = run_clt_experiment(config)
    res = record.results
    print(f"regime: {record.regime_detail}")
    if res["regime_warning"]:
        print("warning: parameters are not in a mixed-normal regime")
    print(f"sd slope = {res['sd_slope']:.4f} +- {res['sd_slope_se']:.4f}")
    if res["constant_value"] is not None:
        print(
            f"Var(F)/(D*EL) = {res['var_ratio_at_min_eps']:.4f} "
            f"(D = {res['constant_name']} = {res['constant_value']:.6f})"
        )
    print(f"excess kurtosis = {res['excess_kurtosis']:+.4f} (se {res['kurtosis_se']:.3f})")
    print(f"corr(F, X_T) = {res['corr_F_XT']:+.4f} (se {res['corr_se']:.3f})")
    print(f"tightness exponent = {res['tightness_exponent']:.4f}")
    _emit_record(args, record)
    return 0


def _cmd_moments(args) -> int:
    spec, _ = _spec_from(args, {})
    intervals = []
    for part in args.intervals.split(","):
        a, _, b = part.partition(":")
        intervals.append((parse_float(a, "interval start"), parse_float(b, "interval end")))
    powers = tuple(int(p) for p in args.powers.split(","))
    x = _parse_vector(args.x, "--x") if args.x else (0.0,) * spec.dim
    q = MomentQuery(intervals=tuple(intervals), powers=powers, x=x, spec=spec)
    if args.method in ("formula", "both"):
        r = moment_formula(q, draws=args.draws, seed=args.seed)
        print(f"formula:   {r.value!r} +- {r.se!r} ({r.draws} draws)")
    if args.method in ("simulated", "both"):
        s = moment_simulated(
            q, replicates=args.replicates, n_t=args.n_t, eps_proxy=args.eps_proxy, seed=args.seed
        )
        print(f"simulated: {s.value!r} +- {s.se!r} ({s.draws} replicates)")
    return 0


_CONDITIONS = {
    "lnd": Condition.LND,
    "a": Condition.STRONG_LND_A,
    "b": Condition.VARIANCE_ENVELOPE_B,
    "c": Condition.DECORRELATION_C,
}


def _cmd_verify_conditions(args) -> int:
    spec, _ = _spec_from(args, {})
    names = list(_CONDITIONS) if args.condition == "all" else [args.condition]
    all_ok = True
    for name in names:
        report = check_condition(spec, _CONDITIONS[name])
        print(report)
        all_ok = all_ok and report.passed
    return 0 if all_ok else 1


def _cmd_report(args) -> int:
    records = read_records(args.records)
    if not records:
        raise ConfigError(f"no records found in {args.records}")
    for p in write_tables(records, args.out):
        print(f"table written: {p}")
    for p in render_figures(records, args.out):
        print(f"figure written: {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loclim",
        description="Simulation lab for local-time derivative estimators of "
        "self-similar Gaussian processes",
    )
    parser.add_argument("--version", action="version", version=f"loclim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("simulate", help="sample a path and print it")
    _add_process_flags(sub)
    sub.add_argument("--T", type=float, default=1.0)
    sub.add_argument("--n", type=int, required=True, help="grid size n_t")
    sub.add_argument("--seed", type=int, default=1)
    sub.add_argument("--method", default="auto", choices=["auto", "circulant", "cholesky"])
    sub.set_defaults(func=_cmd_simulate)

    sub = subs.add_parser("estimate", help="evaluate the estimator on one sampled path")
    _add_process_flags(sub)
    sub.add_argument("--epsilon", required=True, help="bandwidth (accepts 2^-8 style)")
    sub.add_argument("--x", help="level point, comma-separated")
    sub.add_argument("--k", help="derivative multi-index, comma-separated")
    sub.add_argument("--T", type=float, default=1.0)
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--seed", type=int, default=1)
    sub.add_argument("--rule", default="trapezoid", choices=[r.value for r in IntegrationRule])
    sub.set_defaults(func=_cmd_estimate)

    sub = subs.add_parser("constants", help="evaluate a limiting constant")
    sub.add_argument("--name", required=True)
    sub.add_argument("--H", dest="hurst")
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--d", "--dim", dest="dim", type=int)
    sub.add_argument("--k")
    sub.add_argument("--N", type=int)
    sub.add_argument("--f", help="test function: p1 | third_order")
    sub.set_defaults(func=_cmd_constants)

    sub = subs.add_parser("classify", help="regime classification for (H, k, d, N)")
    sub.add_argument("--H", dest="hurst", required=True)
    sub.add_argument("--d", "--dim", dest="dim", type=int, default=1)
    sub.add_argument("--k")
    sub.add_argument("--N", type=int, default=2)
    sub.set_defaults(func=_cmd_classify)

    for name, fn, help_text in (
        ("rates", _cmd_rates, "convergence-rate experiment"),
        ("clt", _cmd_clt, "distributional (mixed normal) experiment"),
    ):
        sub = subs.add_parser(name, help=help_text)
        _add_process_flags(sub)
        sub.add_argument("--config", help="INI config file")
        sub.add_argument("--eps0")
        sub.add_argument("--ratio")
        sub.add_argument("--count", type=int)
        sub.add_argument("--eps-ref", dest="eps_ref")
        sub.add_argument("--replicates", type=int)
        sub.add_argument("--master-seed", dest="master_seed", type=int)
        sub.add_argument("--workers", type=int)
        sub.add_argument("--n-t", dest="n_t", type=int)
        sub.add_argument("--x")
        sub.add_argument("--k")
        sub.add_argument("--T")
        sub.add_argument("--N", type=int)
        sub.add_argument("--f")
        sub.add_argument("--label")
        sub.add_argument("--out-records", dest="out_records")
        sub.add_argument("--tables-dir", dest="tables_dir")
        sub.set_defaults(func=fn)

    sub = subs.add_parser("moments", help="mixed moments of the limiting process")
    _add_process_flags(sub)
    sub.add_argument("--intervals", required=True, help="a:b[,c:d...]")
    sub.add_argument("--powers", required=True, help="m_1[,m_2...]")
    sub.add_argument("--x")
    sub.add_argument("--method", default="both", choices=["formula", "simulated", "both"])
    sub.add_argument("--draws", type=int, default=20000)
    sub.add_argument("--replicates", type=int, default=4000)
    sub.add_argument("--n-t", dest="n_t", type=int, default=4096)
    sub.add_argument("--eps-proxy", dest="eps_proxy", type=float, default=1e-4)
    sub.add_argument("--seed", type=int, default=7)
    sub.set_defaults(func=_cmd_moments)

    sub = subs.add_parser("verify-conditions", help="probe LND/(A)/(B)/(C) numerically")
    _add_process_flags(sub)
    sub.add_argument("--condition", default="all", choices=["all"] + list(_CONDITIONS))
    sub.set_defaults(func=_cmd_verify_conditions)

    sub = subs.add_parser("report", help="tables and figures from a record store")
    sub.add_argument("--records", required=True)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, CapacityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except AccuracyError as err:
        print(f"accuracy error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
