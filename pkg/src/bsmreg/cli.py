"""Command-line interface: ``bsmreg {fit,rank,simulate,pdf-table}``.

Exit status: 0 on success, 1 on input errors, 2 when a fit does not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .distributions import BsmParams, bsm_pdf, tpb_posterior_prob
from .em import em_fit
from .estimator import check_unit_interval, squeeze_unit_interval
from .exceptions import BSMError, DomainError
from .mixing import FAMILY_LABELS, MixingKind, MixingSpec, as_kind
from .regression import Dataset, FitOptions, fit_mle
from .selection import rank_models
from .simulation import ScenarioConfig, run_sensitivity

logger = logging.getLogger("bsmreg")

EXIT_OK, EXIT_INPUT, EXIT_NOCONV = 0, 1, 2
FAMILIES = ("beta", "tpb", "gb", "lnb", "igb")


class InputError(BSMError):
    """Bad user input; maps to exit status 1."""


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    response: str | None = None
    covariates: list = field(default_factory=list)
    family: str | list | None = None
    nodes: int = 64
    seed: int = 0
    format: str = "json"
    boundary: str = "reject"
    em: bool = False
    contrasts: str = "treatment"
    extra: dict = field(default_factory=dict)


# --------------------------------------------------------------------------- input

def _encode_column(name, col: pd.Series, contrasts: str):
    """Numeric columns pass through; others are factor-coded (levels sorted)."""
    numeric = pd.to_numeric(col, errors="coerce")
    if not numeric.isna().any():
        return [name], numeric.to_numpy(dtype=float)[:, None]
    if col.isna().any():
        raise InputError(f"column {name!r} has missing values")
    levels = sorted(col.astype(str).unique())
    if len(levels) < 2:
        raise InputError(f"column {name!r} has a single level")
    values = col.astype(str).to_numpy()
    if contrasts == "sum":
        # R's contr.sum: level j -> e_j, last level -> all -1
        cols = np.zeros((values.size, len(levels) - 1))
        for j, lev in enumerate(levels[:-1]):
            cols[values == lev, j] = 1.0
        cols[values == levels[-1], :] = -1.0
        names = [f"{name}[S.{lev}]" for lev in levels[:-1]]
    else:
        cols = np.column_stack([(values == lev).astype(float) for lev in levels[1:]])
        names = [f"{name}[{lev}]" for lev in levels[1:]]
    return names, cols


def load_dataset(path, response, covariates, boundary="reject", contrasts="treatment") -> Dataset:
    """Read a comma-separated file with a header into a :class:`Dataset`."""
    try:
        frame = pd.read_csv(path, sep=",", encoding="utf-8")
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in [response, *covariates] if c not in frame.columns]
    if missing:
        raise InputError(f"unknown column(s) {missing}; available: {list(frame.columns)}")
    y = pd.to_numeric(frame[response], errors="coerce")
    if y.isna().any():
        row = int(np.flatnonzero(y.isna().to_numpy())[0])
        raise InputError(f"response {response!r} is not numeric at row {row + 1}")
    y = y.to_numpy(dtype=float)
    if boundary == "squeeze":
        try:
            y = squeeze_unit_interval(y)
        except DomainError as exc:
            raise InputError(str(exc)) from exc
    else:
        bad = np.flatnonzero(~((y > 0.0) & (y < 1.0)))
        if bad.size:
            raise InputError(f"response {response!r} at row {int(bad[0]) + 1} is {float(y[bad[0]])!r}, "
                             "outside (0, 1); use --boundary squeeze to compress")
    names, blocks = [], []
    for cov in covariates:
        nm, block = _encode_column(cov, frame[cov], contrasts)
        names += nm
        blocks.append(block)
    X = np.hstack(blocks) if blocks else np.empty((y.size, 0))
    try:
        return Dataset.from_arrays(check_unit_interval(y), X, names)
    except DomainError as exc:
        raise InputError(str(exc)) from exc


# --------------------------------------------------------------------------- output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, MixingKind):
        return FAMILY_LABELS[obj]
    return obj


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, rows)
    elif isinstance(obj, list):
        rows.append((prefix, ";".join(_fmt(v) for v in obj)))
    else:
        rows.append((prefix, _fmt(obj)))


def render(report: dict, fmt: str) -> str:
    """Serialize a report; CSV is a flat ``key,value`` listing of the JSON tree."""
    report = _clean(report)
    if fmt == "json":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    rows = []
    _flatten("", report, rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerows(rows)
    return buf.getvalue()


def _config_dict(cfg: RunConfig) -> dict:
    out = asdict(cfg)
    extra = out.pop("extra")
    out.update(extra)
    return out


# --------------------------------------------------------------------------- commands

def _fit_one(data: Dataset, family: str, cfg: RunConfig):
    kind = as_kind(family)
    if cfg.em and kind is MixingKind.TWO_POINT:
        fit, trace = em_fit(data, nodes=cfg.nodes)
        return fit, trace
    return fit_mle(data, kind, FitOptions(nodes=cfg.nodes, seed=cfg.seed)), None


def cmd_fit(cfg: RunConfig):
    data = load_dataset(cfg.input, cfg.response, cfg.covariates, cfg.boundary, cfg.contrasts)
    fit, trace = _fit_one(data, cfg.family, cfg)
    report = {
        "config": _config_dict(cfg),
        "family": fit.label,
        "method": fit.method,
        "n": data.n,
        "covariate_names": list(data.covariate_names),
        "n_params": fit.n_params,
        "estimates": fit.natural_estimates,
        "se": fit.standard_errors,
        "loglik": fit.loglik,
        "aic": fit.aic,
        "bic": fit.bic,
        "converged": fit.converged,
        "iterations": fit.iterations,
    }
    if fit.se_diagnostic:
        report["se_diagnostic"] = fit.se_diagnostic
    if fit.family is MixingKind.TWO_POINT:
        model = fit.model
        probs = tpb_posterior_prob(data.response, model.mean(data.design), model.phi,
                                   model.mixing.theta1, model.mixing.theta2)
        report["posteriors"] = {
            "probability": np.atleast_1d(probs),
            "reference": (np.atleast_1d(probs) > 0.5).astype(int),
        }
    if trace is not None:
        report["loglik_path"] = trace.loglik_path
    return report, (EXIT_OK if fit.converged else EXIT_NOCONV)


def cmd_rank(cfg: RunConfig):
    families = [FAMILY_LABELS[as_kind(f)] for f in cfg.family]
    if len(set(families)) != len(families):
        raise InputError(f"duplicate families in {cfg.family}")
    data = load_dataset(cfg.input, cfg.response, cfg.covariates, cfg.boundary, cfg.contrasts)
    ok, failed, fits = [], [], {}
    for fam in families:
        try:
            fit, _ = _fit_one(data, fam, cfg)
        except BSMError as exc:
            logger.warning("family %s failed: %s", fam, exc)
            failed.append(fam)
            continue
        fits[fam] = fit
        (ok if fit.converged else failed).append(fam)
    table = rank_models([(f, fits[f].loglik, fits[f].n_params) for f in ok], data.n) if ok else None
    rows = table.to_records() if table else []
    for fam in failed:
        rows.append({"label": fam, "failed": True,
                     "loglik": fits[fam].loglik if fam in fits else None,
                     "k": fits[fam].n_params if fam in fits else None})
    report = {"config": _config_dict(cfg), "n": data.n, "table": rows,
              "estimates": {f: fits[f].natural_estimates for f in fits}}
    return report, (EXIT_NOCONV if failed else EXIT_OK)


def cmd_simulate(cfg: RunConfig):
    ex = cfg.extra
    try:
        scen = ScenarioConfig(replicates=ex["replicates"], n=ex["n"], beta0=ex["beta0"],
                              beta1=ex["beta1"], phi_true=ex["phi"], contamination_rate=ex["rate"],
                              families_to_fit=tuple(cfg.family), seed=cfg.seed,
                              tpb_method="em" if cfg.em else "mle", nodes=cfg.nodes,
                              workers=ex.get("workers", 1))
    except DomainError as exc:
        raise InputError(str(exc)) from exc
    rep = run_sensitivity(scen)
    logger.info("simulation finished in %.1f s", rep.elapsed)
    body = rep.to_dict()
    body.pop("elapsed")
    body.pop("config")
    # Table 1/2 layout: statistic x parameter rows, one column per family
    table = []
    for stat, cells in (("bias", rep.bias), ("mse", rep.mse)):
        for p in ("beta0", "beta1", "phi"):
            table.append({"statistic": stat, "parameter": p,
                          **{fam: cells[fam][p] for fam in scen.families_to_fit}})
    report = {"config": _config_dict(cfg), **body, "table": table}
    return report, (EXIT_NOCONV if rep.failed_families else EXIT_OK)


def _mixing_from_args(family, ex) -> MixingSpec:
    kind = as_kind(family)
    if kind is MixingKind.DEGENERATE:
        return MixingSpec.degenerate()
    if kind is MixingKind.TWO_POINT:
        return MixingSpec.two_point(ex.get("theta1"), ex.get("theta2"))
    return MixingSpec(kind, theta=ex.get("theta"))


def cmd_pdf_table(cfg: RunConfig):
    ex = cfg.extra
    try:
        params = BsmParams.of(ex["mu"], ex["phi"], _mixing_from_args(cfg.family, ex), cfg.nodes)
    except (DomainError, TypeError) as exc:
        raise InputError(f"invalid distribution parameters: {exc}") from exc
    grid = int(ex["grid"])
    if grid < 1:
        raise InputError("--grid must be at least 1")
    y = np.arange(1, grid + 1) / (grid + 1.0)
    dens = np.atleast_1d(bsm_pdf(y, params))
    return {"config": _config_dict(cfg), "y": y, "density": dens}, EXIT_OK


def render_pdf_table(report: dict, fmt: str) -> str:
    if fmt == "json":
        return render(report, "json")
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_clean(report["config"]), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["y", "density"])
    for yi, di in zip(report["y"], report["density"]):
        writer.writerow([_fmt(float(yi)), _fmt(float(di))])
    return buf.getvalue()


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsmreg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, data=True):
        p.add_argument("--nodes", type=int, default=64, help="quadrature nodes (default 64)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("-o", "--output", help="write the report here instead of stdout")
        if data:
            p.add_argument("input", nargs="?", help="CSV file with a header row (last argument)")
            p.add_argument("--response", required=True)
            p.add_argument("--covariates", nargs="*", default=[])
            p.add_argument("--boundary", choices=("reject", "squeeze"), default="reject")
            p.add_argument("--contrasts", choices=("treatment", "sum"), default="treatment",
                           help="coding for non-numeric covariates (levels sorted)")
            p.add_argument("--em", action="store_true", help="fit tpb by EM")

    p_fit = sub.add_parser("fit", help="fit one family")
    p_fit.add_argument("--family", choices=FAMILIES, required=True)
    common(p_fit)

    p_rank = sub.add_parser("rank", help="fit several families and rank by AIC/BIC")
    p_rank.add_argument("--family", "--families", dest="family", nargs="+",
                        choices=FAMILIES, default=list(FAMILIES))
    common(p_rank)

    p_sim = sub.add_parser("simulate", help="contamination sensitivity study")
    p_sim.add_argument("--family", "--families", dest="family", nargs="+",
                       choices=FAMILIES, default=list(FAMILIES))
    p_sim.add_argument("--replicates", type=int, default=500)
    p_sim.add_argument("--n", type=int, default=500)
    p_sim.add_argument("--rate", type=float, default=0.01)
    p_sim.add_argument("--beta0", type=float, default=0.5)
    p_sim.add_argument("--beta1", type=float, default=1.0)
    p_sim.add_argument("--phi", type=float, default=0.25)
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--em", action="store_true", help="fit tpb by EM instead of direct ML")
    common(p_sim, data=False)

    p_pdf = sub.add_parser("pdf-table", help="tabulate a BSM density on a grid")
    p_pdf.add_argument("--family", choices=FAMILIES, required=True)
    p_pdf.add_argument("--mu", type=float, required=True)
    p_pdf.add_argument("--phi", type=float, required=True)
    p_pdf.add_argument("--theta", type=float)
    p_pdf.add_argument("--theta1", type=float)
    p_pdf.add_argument("--theta2", type=float)
    p_pdf.add_argument("--grid", type=int, default=99)
    common(p_pdf, data=False)
    p_pdf.set_defaults(format="csv")
    return parser


COMMANDS = {"fit": cmd_fit, "rank": cmd_rank, "simulate": cmd_simulate, "pdf-table": cmd_pdf_table}
_BASE_KEYS = {"subcommand", "input", "response", "covariates", "family", "nodes", "seed",
              "format", "boundary", "em", "contrasts"}


def config_from_args(args) -> RunConfig:
    ns = vars(args)
    if "input" in ns and ns["input"] is None:
        # ``--covariates a b data.csv``: the greedy list swallowed the file name
        if ns.get("covariates"):
            ns["input"] = ns["covariates"].pop()
        else:
            raise InputError("missing input CSV file")
    base = {k: ns[k] for k in _BASE_KEYS if k in ns}
    extra = {k: v for k, v in ns.items() if k not in _BASE_KEYS and k not in ("output", "verbose")}
    return RunConfig(**base, extra=extra)


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        report, status = COMMANDS[cfg.subcommand](cfg)
    except (InputError, DomainError) as exc:
        print(f"bsmreg: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = (render_pdf_table(report, cfg.format) if cfg.subcommand == "pdf-table"
            else render(report, cfg.format))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        (stdout or sys.stdout).write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
