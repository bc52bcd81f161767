"""``xcreg`` command-line interface.

Exit codes: 0 success, 2 parse/config error, 3 data invariant violation,
4 registration failure. Failures print one JSON line on stderr.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import experiments as exp
from . import io
from .errors import (
    ConfigError,
    DegenerateWindow,
    EmptyInput,
    GridMismatch,
    InsufficientData,
    NoMinimum,
    NonFinite,
    ParseError,
    RangeDegenerate,
    ShiftOutOfRange,
    XcregError,
    ZeroArea,
)
from .fcurve import Interp, SubintervalSpec, derivative_sample, normalize_sample
from .global_xcr import apply_shifts, register, xd_per_subject
from .pairwise import MinimizerOpts, Quadrature
from .simgen import RNG_NAME, SimConfig, generate_contaminated, generate_pure_shift

log = logging.getLogger("xcreg")

EXIT_CODES = [
    ((ParseError, ConfigError, EmptyInput), 2),
    ((GridMismatch, InsufficientData, NonFinite, ZeroArea), 3),
    ((RangeDegenerate, NoMinimum, ShiftOutOfRange, DegenerateWindow), 4),
]

SIM_KEYS = {
    "model": None, "n": None, "p": None, "theta": None, "sigma2_eta": None,
    "sigma2_zeta": None, "sigma2_e": None, "grid": None, "window": None,
    "seed": None, "subject_shift_var": None,
}
MINIMIZER_KEYS = {"coarse_step": None, "tol": None}
QUADRATURE_KEYS = {"rule": None, "nodes_per_interval": None}
REGISTER_KEYS = {
    "input": None, "out": None, "window": None, "group_by": None, "extend_to": None, "interp": None,
    "seed": None, "figures": None,
    "preprocessing": {"derivative": None, "bandwidth": None, "normalize_auc": None, "normalize_window": None},
    "minimizer": MINIMIZER_KEYS, "quadrature": QUADRATURE_KEYS,
}
_SIM_SUB = {k: None for k in SIM_KEYS if k not in ("model", "seed", "subject_shift_var")}
EXPERIMENT_KEYS = {
    "imse": {"sigma2_eta": None, "sigma2_zeta": None, "B": None, "n": None, "seed": None,
             "K": None, "target": None, "sim": _SIM_SUB, "minimizer": MINIMIZER_KEYS},
    "rates": {"n_list": None, "B": None, "seed": None, "interp": None, "sim": _SIM_SUB,
              "minimizer": MINIMIZER_KEYS},
    "xd": {"runs": None, "seed": None, "input": None, "window": None, "sim": _SIM_SUB,
           "minimizer": MINIMIZER_KEYS},
}


def exit_code(exc: BaseException) -> int:
    for kinds, code in EXIT_CODES:
        if isinstance(exc, kinds):
            return code
    return 4 if isinstance(exc, XcregError) else 1


def fail(exc: BaseException, code: int) -> None:
    line = {"error": type(exc).__name__, "exit": code, "reason": str(exc).splitlines()[0] if str(exc) else ""}
    click.echo(json.dumps(line), err=True)


def _pair(text: str, what: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in str(text).split(","))
    except ValueError:
        raise ParseError(f"{what} must look like 'a,b', got {text!r}") from None
    return a, b


def _window(value) -> Optional[tuple[float, float]]:
    if value is None:
        return None
    if isinstance(value, str):
        return _pair(value, "window")
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return float(value[0]), float(value[1])
    raise ConfigError(f"window must be [r1, r2], got {value!r}")


def _interp(value) -> Interp:
    try:
        return Interp(value)
    except ValueError:
        raise ConfigError(f"interp must be 'linear' or 'cubic', got {value!r}") from None


def _minimizer(cfg: dict) -> MinimizerOpts:
    return MinimizerOpts(**{k: float(v) for k, v in cfg.items()})


def _sim_config(cfg: dict, **override) -> SimConfig:
    merged = {k: v for k, v in {**cfg, **override}.items() if k not in ("model", "subject_shift_var")}
    for key in ("grid", "window", "theta"):
        if key in merged:
            merged[key] = tuple(merged[key])
    try:
        return SimConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Cross-component registration of multivariate functional data."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


# -- register -----------------------------------------------------------------


@cli.command("register")
@click.argument("input_path", required=False, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), help="TOML pipeline config.")
@click.option("--window", help="Integration window r1,r2.")
@click.option("--coarse-step", type=float, help="Coarse scan step (default: grid spacing).")
@click.option("--tol", type=float, help="Golden-section tolerance in time units.")
@click.option("--derivative/--no-derivative", default=None, help="Register estimated first derivatives.")
@click.option("--bandwidth", type=float, help="Derivative smoothing bandwidth.")
@click.option("--normalize-auc/--no-normalize-auc", default=None, help="Divide each curve by its area.")
@click.option("--interp", type=click.Choice(["linear", "cubic"]), help="Interpolation between grid points.")
@click.option("--extend-to", type=float, help="Extend curves rightward as constant up to this time.")
@click.option("--group-by", help="Keep rows whose COLUMN equals VALUE, given as COLUMN=VALUE.")
@click.option("--out", "out_dir", type=click.Path(), help="Output directory.")
@click.option("--figures/--no-figures", default=None, help="Render PNG figures next to the CSVs.")
def register_cmd(input_path, config_path, window, coarse_step, tol, derivative, bandwidth,
                 normalize_auc, interp, extend_to, group_by, out_dir, figures):
    """Estimate global shifts for a long-format CSV and write reports."""
    cfg = io.load_toml(config_path) if config_path else {}
    io.check_keys(cfg, REGISTER_KEYS)
    pre = dict(cfg.get("preprocessing", {}))
    mini = dict(cfg.get("minimizer", {}))
    quad = dict(cfg.get("quadrature", {}))
    flags = {"derivative": derivative, "bandwidth": bandwidth, "normalize_auc": normalize_auc}
    pre.update({k: v for k, v in flags.items() if v is not None})
    mini.update({k: v for k, v in {"coarse_step": coarse_step, "tol": tol}.items() if v is not None})
    input_path = input_path or cfg.get("input")
    out_dir = Path(out_dir or cfg.get("out") or "xcreg_out")
    win = _window(window) or _window(cfg.get("window"))
    extend_to = extend_to if extend_to is not None else cfg.get("extend_to")
    group_by = group_by or cfg.get("group_by")
    figures = cfg.get("figures", True) if figures is None else figures
    if not input_path:
        raise ParseError("no input file given")
    group = None
    if group_by:
        col, sep, val = str(group_by).partition("=")
        if not sep:
            raise ParseError(f"--group-by must be COLUMN=VALUE, got {group_by!r}")
        group = (col, val)

    interp = _interp(interp or cfg.get("interp", "linear"))
    raw = io.read_long_csv(input_path, group).replace(interp=interp)
    if extend_to is not None:
        raw = raw.extend_right(float(extend_to))
    data = raw
    if pre.get("derivative", False):
        data = derivative_sample(data, pre.get("bandwidth"))
    window_spec = SubintervalSpec.on(data.grid, *(win or (data.grid.first, data.grid.last)))
    if pre.get("normalize_auc", False):
        norm_win = window_spec if pre.get("normalize_window", "full") == "window" else None
        data = normalize_sample(data, norm_win)

    opts = _minimizer(mini)
    quadrature = Quadrature(**quad)
    result = register(data, window_spec, opts, quadrature)
    theta = result.theta_hat
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_shift_table(out_dir / "shifts.csv", data.component_names, theta)

    xd = {"available": False}
    try:
        before = xd_per_subject(data, np.zeros(data.p), window_spec, quadrature)
        after = xd_per_subject(data, theta, window_spec, quadrature)
    except ShiftOutOfRange as exc:
        result.warnings.append(f"XDUnavailable: {exc}")
    else:
        dec = before - after
        xd = {
            "available": True,
            "before_total": float(before.sum()),
            "after_total": float(after.sum()),
            "pct_reduction": float(100 * (before.sum() - after.sum()) / before.sum()) if before.sum() > 0 else 0.0,
            "frac_worsened": float(np.mean(dec < 0)),
        }
        io.write_rows(out_dir / "xd_reduction.csv", ["subject_id", "xd_before", "xd_after", "decrease"],
                      zip(data.subject_ids, before, after, dec))
        x, dens = exp.xd_density(dec)
        io.write_rows(out_dir / "xd_density.csv", ["decrease", "density"], zip(x, dens))

    aligned = apply_shifts(data, theta)
    io.write_long_csv(out_dir / "curves_unaligned.csv", data)
    io.write_long_csv(out_dir / "curves_aligned.csv", aligned)

    names = data.component_names
    report = {
        "components": list(names),
        "theta_hat": theta,
        "tau_hat_stacked": result.global_shifts.tau_hat_stacked,
        "residuals": result.global_shifts.residuals,
        "window": [window_spec.r1, window_spec.r2],
        "shift_range": list(window_spec.shift_range),
        "pairwise": [
            {
                "j": names[s.j], "k": names[s.k], "tau_hat": s.tau_hat,
                "criterion_at_min": s.criterion_at_min, "censored": s.censored,
                "multimodal": s.multimodal, "trace": [list(p) for p in s.search_trace],
            }
            for s in result.pairwise
        ],
        "warnings": result.warnings,
        "xd": xd,
        "config": {
            "input": str(input_path), "group_by": group_by, "extend_to": extend_to, "interp": interp.value,
            "preprocessing": pre, "minimizer": mini, "quadrature": quad,
            "n": data.n, "p": data.p,
        },
    }
    io.dump_json(out_dir / "report.json", report, io.REGISTER_SCHEMA)
    if figures:
        from . import plotting

        plotting.plot_alignment(data.grid.points, data.values, aligned.grid.points, aligned.values,
                                names, out_dir / "alignment.png")
        plotting.plot_criterion_traces(result.pairwise, names, out_dir / "criterion.png")
        if xd["available"]:
            plotting.plot_xd_density(x, dens, out_dir / "xd_density.png")
    for w in result.warnings:
        click.echo(f"warning: {w}", err=True)
    for name, t in zip(names, theta):
        click.echo(f"{name},{t!r}")


# -- simulate -----------------------------------------------------------------


@cli.command("simulate")
@click.option("--config", "config_path", type=click.Path(), help="TOML simulation config.")
@click.option("--out", "out_path", type=click.Path(), required=True, help="Long-format CSV to write.")
@click.option("--seed", type=int, help="Override the config seed.")
def simulate_cmd(config_path, out_path, seed):
    """Generate a synthetic sample plus a truth sidecar (<out>.truth.json)."""
    cfg = io.load_toml(config_path) if config_path else {}
    io.check_keys(cfg, SIM_KEYS)
    if seed is not None:
        cfg["seed"] = seed
    model = cfg.get("model", "contaminated")
    sim_cfg = _sim_config(cfg)
    out_path = Path(out_path)
    truth = {"model": model, "config": sim_cfg.to_dict(), "theta": list(sim_cfg.theta), "rng": RNG_NAME}
    if model == "contaminated":
        sim = generate_contaminated(sim_cfg)
        sample = sim.sample
        truth.update(eta=sim.eta, zeta=sim.zeta)
    elif model == "pure_shift":
        sample = generate_pure_shift(
            sim_cfg.n, sim_cfg.p, sim_cfg.theta, grid=sim_cfg.make_grid(),
            subject_level_shifts=cfg.get("subject_shift_var"), seed=sim_cfg.seed,
        )
        truth["subject_shifts"] = sample.meta["subject_shifts"]
    else:
        raise ConfigError(f"unknown model {model!r}")
    io.write_long_csv(out_path, sample)
    io.dump_json(out_path.with_suffix(".truth.json"), truth)
    click.echo(str(out_path))


# -- experiments --------------------------------------------------------------


@cli.group("experiment")
def experiment():
    """Monte Carlo studies (imse, rates, xd)."""


def _exp_setup(kind, config_path):
    cfg = io.load_toml(config_path) if config_path else {}
    io.check_keys(cfg, EXPERIMENT_KEYS[kind])
    return cfg, _minimizer(cfg.get("minimizer", {}))


def _write_report(report, out_path, figures, extra):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    io.dump_json(out_path, report.to_dict(), io.EXPERIMENT_SCHEMA)
    stem = out_path.with_suffix("")
    extra(stem, figures)
    click.echo(str(out_path))


@experiment.command("imse")
@click.option("--config", "config_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default="imse_report.json")
@click.option("--figures/--no-figures", default=True)
def imse_cmd(config_path, out_path, figures):
    """Percent IMSE decrease of registered over naive pooled FPCA."""
    cfg, opts = _exp_setup("imse", config_path)
    report = exp.run_imse_study(
        sigma2_eta=cfg.get("sigma2_eta", [0.1, 0.25, 0.5, 1.0, 2.0]),
        sigma2_zeta=cfg.get("sigma2_zeta", [25.0]),
        B=int(cfg.get("B", 100)), n=int(cfg.get("n", 100)), seed=int(cfg.get("seed", 0)),
        K=int(cfg.get("K", 2)), target=cfg.get("target", "observed"),
        base=_sim_config(cfg.get("sim", {})), opts=opts,
    )

    def extra(stem, figures):
        table = exp.imse_table(report)
        io.write_rows(f"{stem}.table.csv", table[0], table[1:])
        if figures:
            from . import plotting

            plotting.plot_imse_table(table, f"{stem}.imse.png")

    _write_report(report, out_path, figures, extra)


@experiment.command("rates")
@click.option("--config", "config_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default="rates_report.json")
@click.option("--figures/--no-figures", default=True)
def rates_cmd(config_path, out_path, figures):
    """RMSE of shift estimates against n with log-log slopes."""
    cfg, opts = _exp_setup("rates", config_path)
    base = _sim_config({**exp.RATE_BASE.to_dict(), **cfg.get("sim", {})})
    report = exp.run_rate_study(
        n_list=cfg.get("n_list", [50, 100, 200, 400, 800]), B=int(cfg.get("B", 200)),
        config=base, seed=int(cfg.get("seed", 0)), opts=opts, interp=_interp(cfg.get("interp", "cubic")),
    )

    def extra(stem, figures):
        s = report.summary
        p = len(base.theta)
        header = ["n"] + [f"tau_{j}{k}" for j, k in s["pairs"]] + [f"theta_{j + 1}" for j in range(p)]
        rows = [[r["n"], *r["tau_rmse"], *r["theta_rmse"]] for r in s["per_n"]]
        io.write_rows(f"{stem}.rmse.csv", header, rows)
        if figures:
            from . import plotting

            plotting.plot_rates([r["n"] for r in s["per_n"]], [r["tau_rmse"][0] for r in s["per_n"]],
                                [r["theta_rmse"] for r in s["per_n"]], f"{stem}.rates.png")

    _write_report(report, out_path, figures, extra)


@experiment.command("xd")
@click.option("--config", "config_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default="xd_report.json")
@click.option("--figures/--no-figures", default=True)
def xd_cmd(config_path, out_path, figures):
    """Per-subject decrease in total cross-component distance."""
    cfg, opts = _exp_setup("xd", config_path)
    if "input" in cfg:
        sample = io.read_long_csv(cfg["input"])
        win = _window(cfg.get("window")) or (sample.grid.first, sample.grid.last)
        report = exp.run_xd_study(sample, SubintervalSpec.on(sample.grid, *win), opts=opts)
    else:
        report = exp.run_xd_runs(
            _sim_config(cfg.get("sim", {})), runs=int(cfg.get("runs", 20)),
            seed=int(cfg.get("seed", 0)), opts=opts,
        )

    def extra(stem, figures):
        dec = [r["decrease"] for r in report.records]
        x, dens = exp.xd_density(dec)
        io.write_rows(f"{stem}.density.csv", ["decrease", "density"], zip(x, dens))
        if figures:
            from . import plotting

            plotting.plot_xd_density(x, dens, f"{stem}.xd.png")

    _write_report(report, out_path, figures, extra)


# -- overlap window -----------------------------------------------------------


def overlap_window(intervals, enclose: Optional[tuple[float, float]] = None) -> tuple[float, float]:
    """Smallest interval containing every subject interval, optionally widened to ``enclose``.

    Despite its name the overlapping interval is the span of the union of
    the per-subject landmark intervals.
    """
    intervals = list(intervals)
    if not intervals:
        raise EmptyInput("no intervals")
    for a, b in intervals:
        if not a < b:
            raise ParseError(f"interval [{a}, {b}] is empty")
    lo = min(a for a, _ in intervals)
    hi = max(b for _, b in intervals)
    if enclose is not None:
        if not (enclose[0] <= lo and hi <= enclose[1]):
            raise ConfigError(f"[{enclose[0]}, {enclose[1]}] does not contain [{lo}, {hi}]")
        return enclose
    return lo, hi


@cli.command("overlap-window")
@click.argument("intervals_path", type=click.Path())
@click.option("--enclose", help="Enclosing window r1,r2 that must contain the span.")
@click.option("--domain", help="Domain t0,tmax; prints the admissible shift range too.")
def overlap_window_cmd(intervals_path, enclose, domain):
    """Integration window spanning all per-subject landmark intervals (CSV a,b)."""
    r1, r2 = overlap_window(io.read_intervals(intervals_path), _pair(enclose, "enclose") if enclose else None)
    click.echo(f"{r1!r},{r2!r}")
    if domain:
        t0, tmax = _pair(domain, "domain")
        lo, hi = SubintervalSpec(r1, r2, t0, tmax).shift_range
        click.echo(f"shift_range={lo!r},{hi!r}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="xcreg", standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.UsageError as exc:
        fail(exc, 2)
        return 2
    except XcregError as exc:
        code = exit_code(exc)
        fail(exc, code)
        return code
    return 0


def entry() -> None:
    sys.exit(main())
