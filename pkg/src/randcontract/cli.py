"""Command-line front end.

Three subcommands, each driven by an optional YAML/JSON config file whose
values can be overridden by flags::

    randcontract tail --model model.yaml --grid 5,10,20,40
    randcontract ruin --model ruin.yaml --u0-grid 25,50,100 --seed 1
    randcontract diag tony --family kotz --gamma 0.5

Exit codes: 0 success, 2 bad configuration, 3 a formula guard refused a
point (pre-asymptotic or outside its domain), 4 an oracle or Monte Carlo
evaluation failed. Reports for codes 3 and 4 are still written, with the
missing cells left empty and the reason on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np
import scipy
import yaml

from . import __version__
from .aggregation import asymptotic_independence_diagnostic, dirichlet_mixture, spherical_mixture
from .asymptotics import FORMULAS, ProductModel
from .dist_model import Frechet, Gumbel, Weibull, as_scaling, make_builtin
from .errors import ContractionError, QuadratureError, RarityError, UnreliableRegionError
from .oracle import convergence_report
from .risk import RiskModel, ruin_asymptotic, ruin_prob_mc, ruin_term_sum
from .subexp import (
    conv_square_ratio,
    dominated_variation_trajectory,
    goldie_resnick_check,
    long_tail_trajectory,
    mitra_resnick_trajectory,
    tony_integral_trajectory,
)

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_ORACLE = 0, 2, 3, 4
CRITERIA = ("mitra_resnick", "tony", "goldie_resnick", "long_tail", "conv_square",
            "dominated_variation", "indep")
DEFAULT_GRID = [1e2, 1e3, 1e4, 1e5]
FAMILY_DEFAULTS = {"kotz": {"K": 1.0, "q": 0.0, "r": 1.0}, "kotztype": {"K": 1.0, "q": 0.0, "r": 1.0}}


class ConfigError(Exception):
    pass


# ----------------------------------------------------------------------------
# config helpers


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def _number(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _parse_grid(value, name="grid"):
    if value is None:
        return None
    if isinstance(value, str):
        items = [x for x in value.replace(" ", "").split(",") if x]
    else:
        items = list(value)
    grid = [_number(x) if isinstance(x, str) else float(x) for x in items]
    if not grid:
        raise ConfigError(f"{name} is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{name} must be strictly increasing, got {grid}")
    return grid


def _law_spec(text):
    """``"family:k=v,k=v"`` -> ``{"family": ..., k: v}``."""
    family, _, rest = text.partition(":")
    spec = {"family": family}
    for item in filter(None, rest.split(",")):
        k, eq, v = item.partition("=")
        if not eq:
            raise ConfigError(f"bad parameter {item!r} in {text!r}; use key=value")
        spec[k.strip()] = _number(v)
    return spec


def _build_law(spec, what):
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"{what} needs a 'family' entry")
    params = {k: v for k, v in spec.items() if k != "family"}
    family = str(spec["family"])
    defaults = FAMILY_DEFAULTS.get(family.replace("_", "").lower(), {})
    try:
        return make_builtin(family, **{**defaults, **params})
    except ContractionError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _mc_settings(cfg, args, n_key="n_samples"):
    mc = dict(cfg.get("mc") or {})
    if getattr(args, "seed", None) is not None:
        mc["seed"] = args.seed
    if getattr(args, "n_samples", None) is not None:
        mc[n_key] = args.n_samples
    return mc


def _output(cfg, args):
    out = dict(cfg.get("output") or {})
    if args.output is not None:
        out["path"] = args.output
    if args.format is not None:
        out["format"] = args.format
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "text"):
        raise ConfigError(f"output format must be csv or text, got {fmt!r}")
    return out.get("path"), fmt


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _meta(**extra):
    meta = {"version": __version__, "numpy": np.__version__, "scipy": scipy.__version__}
    meta.update(extra)
    return meta


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


# ----------------------------------------------------------------------------
# tail


def _auto_formula(r):
    if isinstance(r.tail, Frechet):
        return "breiman"
    if isinstance(r.tail, Gumbel):
        return "gumbel_product_tail"
    if isinstance(r.tail, Weibull):
        return "weibull_product_tail"
    raise ConfigError(f"no formula for tail class {r.tail!r}")


def cmd_tail(args):
    cfg = _load_config(args.model)
    model = dict(cfg.get("model") or {})
    if args.risk:
        model["risk"] = _law_spec(args.risk)
    if args.factor:
        model["factors"] = [_law_spec(f) for f in args.factor]
    if "risk" not in model or not model.get("factors"):
        raise ConfigError("tail needs a model with 'risk' and 'factors'")
    r = _build_law(model["risk"], "risk")
    factors = []
    for j, f in enumerate(model["factors"]):
        law = _build_law(f, f"factor {j}")
        try:
            factors.append(as_scaling(law))
        except ContractionError as exc:
            raise ConfigError(f"factor {j}: {exc}") from None
    try:
        m = ProductModel(r, factors)
    except ContractionError as exc:
        raise ConfigError(str(exc)) from None
    grid = _parse_grid(args.grid if args.grid is not None else cfg.get("grid"))
    if grid is None:
        raise ConfigError("tail needs a threshold grid (--grid or 'grid')")
    formula = args.formula or cfg.get("formula") or _auto_formula(r)
    if formula not in FORMULAS:
        raise ConfigError(f"unknown formula {formula!r}; known: {sorted(FORMULAS)}")
    method = args.method or cfg.get("oracle", "quadrature")
    if method not in ("quadrature", "iterated", "montecarlo"):
        raise ConfigError(f"unknown oracle method {method!r}")
    mc = _mc_settings(cfg, args)
    if method == "montecarlo" and mc.get("seed") is None:
        raise ConfigError("Monte Carlo oracle needs a seed (--seed or mc.seed)")
    path, fmt = _output(cfg, args)
    rep = convergence_report(m, formula, grid, method, n_samples=int(mc.get("n_samples", 10**6)),
                             seed=mc.get("seed"), workers=args.workers)
    rep.meta.update(_meta(seed=mc.get("seed"), oracle=method))
    _write(rep.to_csv() if fmt == "csv" else rep.to_text(), path)
    code = EXIT_OK
    for gap in rep.gaps:
        print(f"randcontract: {gap}", file=sys.stderr)
        code = max(code, EXIT_ORACLE if ": oracle:" in gap else EXIT_GUARD)
    return code


# ----------------------------------------------------------------------------
# ruin

RUIN_COLUMNS = ("u0", "n", "mc", "term_sum", "asymptotic", "ci_lo", "ci_hi")


def cmd_ruin(args):
    cfg = _load_config(args.model)
    block = dict(cfg.get("risk") or {})
    for key in ("pi", "delta", "horizon"):
        val = getattr(args, key)
        if val is not None:
            block[key] = val
    if args.net_loss:
        block["net_loss"] = _law_spec(args.net_loss)
    if args.upsilon:
        block["upsilon"] = _law_spec(args.upsilon)
    if "net_loss" not in block or "upsilon" not in block:
        raise ConfigError("ruin needs a risk block with 'net_loss' and 'upsilon'")
    block["net_loss"] = _build_law(block["net_loss"], "net_loss")
    ups = block["upsilon"]
    block["upsilon"] = ([_build_law(u, "upsilon") for u in ups] if isinstance(ups, list)
                        else _build_law(ups, "upsilon"))
    try:
        model = RiskModel.from_config(block)
    except ContractionError as exc:
        raise ConfigError(str(exc)) from None
    grid = _parse_grid(args.u0_grid if args.u0_grid is not None else cfg.get("u0_grid"), "u0_grid")
    if grid is None:
        raise ConfigError("ruin needs --u0-grid or 'u0_grid'")
    mc = _mc_settings(cfg, args, "n_paths")
    run_mc = bool(mc) and not args.no_mc
    if run_mc and mc.get("seed") is None:
        raise ConfigError("Monte Carlo needs a seed (--seed or mc.seed)")
    path, fmt = _output(cfg, args)

    rows, notes, code = [], [], EXIT_OK
    for u0 in grid:
        row = {"u0": u0, "n": model.horizon, "mc": None, "term_sum": None, "asymptotic": None,
               "ci_lo": None, "ci_hi": None}
        if run_mc:
            try:
                res = ruin_prob_mc(model, u0, int(mc.get("n_paths", 10**6)), int(mc["seed"]),
                                   workers=args.workers)
                row["mc"], row["ci_lo"], row["ci_hi"] = res.value, res.estimate.ci_lo, res.estimate.ci_hi
            except ContractionError as exc:
                notes.append(f"u0={u0!r}: mc: {exc}")
                code = max(code, EXIT_ORACLE)
        try:
            row["term_sum"] = ruin_term_sum(model, u0).value
        except ContractionError as exc:
            notes.append(f"u0={u0!r}: term_sum: {exc}")
            code = max(code, EXIT_ORACLE if isinstance(exc, (QuadratureError, UnreliableRegionError))
                       else EXIT_GUARD)
        try:
            row["asymptotic"] = ruin_asymptotic(model, u0).value
        except ContractionError as exc:
            notes.append(f"u0={u0!r}: asymptotic: {exc}")
            code = max(code, EXIT_GUARD)
        rows.append(row)

    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(RUIN_COLUMNS + ("formula_id",))
        for row in rows:
            wr.writerow([_fmt(row["u0"]), row["n"]] + [_fmt(row[k]) for k in RUIN_COLUMNS[2:]]
                        + ["ruin-asymptotic"])
        text = buf.getvalue()
    else:
        doc = {"columns": list(RUIN_COLUMNS), "rows": [[row[k] for k in RUIN_COLUMNS] for row in rows],
               "formula_id": "ruin-asymptotic", "notes": notes,
               "meta": _meta(seed=mc.get("seed") if run_mc else None)}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _write(text, path)
    for note in notes:
        print(f"randcontract: {note}", file=sys.stderr)
    return code


# ----------------------------------------------------------------------------
# diag


def _extra_params(tokens):
    """Turn leftover ``--name value`` pairs into family parameters."""
    params = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        name, eq, val = tok[2:].partition("=")
        if not eq:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(f"flag {tok} needs a value") from None
        params[name.replace("-", "_")] = _number(val)
    return params


def cmd_diag(args, extra):
    if args.criterion not in CRITERIA:
        raise ConfigError(f"unknown criterion {args.criterion!r}; choose from {', '.join(CRITERIA)}")
    cfg = _load_config(args.model)
    law_cfg = dict(cfg.get("distribution") or {})
    if args.family:
        law_cfg = {"family": args.family}
    law_cfg.update(_extra_params(extra))
    path, fmt = _output(cfg, args)
    lam = args.lam if args.lam is not None else float(cfg.get("lambda", 1.0))
    grid = _parse_grid(args.grid if args.grid is not None else cfg.get("grid"))
    meta = {}
    diag = None

    if args.criterion == "indep":
        mix_cfg = dict(cfg.get("mixture") or {})
        if law_cfg:
            mix_cfg["radius"] = law_cfg
        if "radius" not in mix_cfg:
            raise ConfigError("indep needs a radius law (--family or mixture.radius)")
        radius = _build_law(mix_cfg["radius"], "radius")
        kind = args.mixture or mix_cfg.get("kind", "spherical")
        if kind == "spherical":
            mix = spherical_mixture(radius)
        elif kind == "dirichlet":
            try:
                mix = dirichlet_mixture(radius, float(mix_cfg.get("alpha", 1.0)), float(mix_cfg.get("beta", 1.0)))
            except ContractionError as exc:
                raise ConfigError(str(exc)) from None
        else:
            raise ConfigError(f"unknown mixture {kind!r}")
        rho = args.rho if args.rho is not None else float(mix_cfg.get("rho", 0.5))
        mc = _mc_settings(cfg, args)
        if mc.get("seed") is None:
            raise ConfigError("indep uses Monte Carlo and needs a seed (--seed or mc.seed)")
        n_grid = grid or [1e2, 1e3, 1e4]
        diag = asymptotic_independence_diagnostic(mix, rho, n_grid, int(mc["seed"]),
                                                  n_samples=int(mc.get("n_samples", 10**7)),
                                                  workers=args.workers)
        traj = diag.trajectory
        meta = {"gap": diag.gap, "gap_increasing": diag.gap_increasing, "b1": diag.b1, "b2": diag.b2,
                "rho": rho, "seed": int(mc["seed"])}
    else:
        if not law_cfg:
            raise ConfigError("diag needs a distribution (--family or 'distribution')")
        d = _build_law(law_cfg, "distribution")
        grid = grid or DEFAULT_GRID
        crit = args.criterion
        if crit == "mitra_resnick":
            traj = mitra_resnick_trajectory(d, lam, grid)
        elif crit == "tony":
            traj = tony_integral_trajectory(d, lam, grid)
        elif crit == "dominated_variation":
            traj = dominated_variation_trajectory(d, lam, grid)
        elif crit == "long_tail":
            y = args.y if args.y is not None else float(cfg.get("y", 1.0))
            traj = long_tail_trajectory(d, y, grid)
        elif crit == "conv_square":
            traj = conv_square_ratio(d, grid)
        else:
            if not isinstance(d.tail, Gumbel):
                raise ConfigError("goldie_resnick needs a Gumbel-class law")
            t = args.t if args.t is not None else float(cfg.get("t", 2.0))
            holds, traj = goldie_resnick_check(lambda u: float(d.tail.w(u)), t, grid)
            meta["holds"] = holds
        meta["distribution"] = d.name

    if fmt == "csv":
        text = diag.to_csv() if diag is not None else traj.to_csv()
    else:
        doc = {"criterion_id": traj.criterion_id, "verdict": traj.verdict, "target": traj.target,
               "columns": ["u", "value", "log_value"],
               "rows": [[float(u), float(v), float(lv)] for u, v, lv in traj.rows()],
               "two_sided": traj.two_sided, "skipped": traj.skipped,
               "meta": _meta(**{k: v for k, v in meta.items()})}
        text = json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n"
    _write(text, path)
    print(f"randcontract: {traj.criterion_id}: verdict {traj.verdict}", file=sys.stderr)
    if "holds" in meta:
        print(f"randcontract: {traj.criterion_id}: condition holds: {meta['holds']}", file=sys.stderr)
    for s in traj.skipped:
        print(f"randcontract: skipped {s}", file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------------------
# entry point


def _common(p):
    p.add_argument("--model", "--config", dest="model", help="YAML or JSON config file")
    p.add_argument("--output", "-o", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "text"), help="csv (default) or structured text")
    p.add_argument("--seed", type=int, help="Monte Carlo seed")
    p.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo chunks")


def build_parser():
    parser = argparse.ArgumentParser(prog="randcontract",
                                     description="Tail asymptotics of random contractions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tail", help="exact vs asymptotic tail of R*S1*...*Sn")
    _common(p)
    p.add_argument("--grid", help="comma-separated increasing thresholds")
    p.add_argument("--risk", help="risk law, e.g. exponential:rate=1")
    p.add_argument("--factor", action="append", help="factor law, e.g. uniform01 (repeatable)")
    p.add_argument("--formula", help=f"one of {', '.join(sorted(FORMULAS))}")
    p.add_argument("--method", choices=("quadrature", "iterated", "montecarlo"))
    p.add_argument("--n-samples", type=int, dest="n_samples")

    p = sub.add_parser("ruin", help="finite-horizon ruin probability")
    _common(p)
    p.add_argument("--u0-grid", dest="u0_grid", help="comma-separated increasing initial wealths")
    p.add_argument("--net-loss", dest="net_loss", help="net loss law, e.g. kotz:gamma=0.5")
    p.add_argument("--upsilon", help="discount factor law, e.g. pareto:gamma=1")
    p.add_argument("--pi", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--n-paths", type=int, dest="n_samples")
    p.add_argument("--no-mc", action="store_true", help="skip the Monte Carlo column")

    p = sub.add_parser("diag", help="subexponentiality and independence diagnostics",
                       description="Unrecognised --name value pairs become family parameters.")
    p.add_argument("criterion", help=", ".join(CRITERIA))
    _common(p)
    p.add_argument("--family", help="builtin family name")
    p.add_argument("--grid", help="comma-separated increasing thresholds (n values for indep)")
    p.add_argument("--lam", "--lambda", dest="lam", type=float)
    p.add_argument("--y", type=float, help="shift for long_tail")
    p.add_argument("--t", type=float, help="scale factor for goldie_resnick")
    p.add_argument("--rho", type=float)
    p.add_argument("--mixture", choices=("spherical", "dirichlet"))
    p.add_argument("--n-samples", type=int, dest="n_samples")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "diag":
            return cmd_diag(args, extra)
        if extra:
            raise ConfigError(f"unrecognised arguments: {' '.join(extra)}")
        if args.command == "tail":
            return cmd_tail(args)
        return cmd_ruin(args)
    except ConfigError as exc:
        print(f"randcontract: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, RarityError, UnreliableRegionError) as exc:
        print(f"randcontract: oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except ContractionError as exc:
        print(f"randcontract: guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD


def main_entry():
    sys.exit(main())
