"""Monte Carlo harnesses: IMSE benefit of registration, convergence rates, XD reduction.

Every report keeps its per-replication records; :func:`summarize` rebuilds the
summary block from those records alone.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import XcregError
from .fcurve import Grid, Interp, MultiCurveSample, SubintervalSpec, interp_rows
from .fpca import fit_fpca, imse
from .global_xcr import apply_shifts, pair_index, register, xd_per_subject
from .pairwise import MinimizerOpts, Quadrature
from .simgen import SimConfig, generate_contaminated

log = logging.getLogger(__name__)

TARGETS = ("observed", "signal", "truth")


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    seeds: list = field(default_factory=list)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "kind": self.kind,
            "config": self.config,
            "summary": self.summary,
            "records": self.records,
            "seeds": self.seeds,
        }
        if timing:
            d["wall_clock"] = self.wall_clock
        return d


def replication_seed(seed: int, b: int) -> int:
    """Seed of replication ``b``; shared by all cells (common random numbers)."""
    return int(np.random.SeedSequence(seed, spawn_key=(b,)).generate_state(1)[0])


def _quantiles(x) -> dict:
    q = np.quantile(x, [0.05, 0.25, 0.5, 0.75, 0.95])
    return dict(zip(["q05", "q25", "q50", "q75", "q95"], q.tolist()))


# -- IMSE study ---------------------------------------------------------------


def _pooled_fit(values: np.ndarray, grid: Grid, K: int) -> np.ndarray:
    n, p, m = values.shape
    flat = values.reshape(n * p, m)
    return fit_fpca((grid, flat), K).reconstruct_values(flat, K).reshape(n, p, m)


def imse_replication(
    config: SimConfig,
    K: int = 2,
    target: str = "observed",
    opts: MinimizerOpts = MinimizerOpts(),
) -> dict:
    """One draw of the naive-versus-registered FPCA comparison.

    Naive arm: pooled FPCA of all ``n * p`` raw curves. Registered arm: shift
    components by the estimated global shifts, pooled FPCA on the aligned
    domain, shift fits back. Both arms are scored on the same window, the
    intersection of the back-shifted aligned domains.
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    sim = generate_contaminated(config)
    sample = sim.sample
    t = sample.grid.points
    theta = register(sample, config.make_window(), opts).theta_hat

    aligned = apply_shifts(sample, theta)
    fit_aligned = _pooled_fit(aligned.values, aligned.grid, K)
    a = aligned.grid.first + theta.max()
    b = aligned.grid.last + theta.min()
    eps = 1e-9 * max(1.0, t[-1] - t[0])
    keep = (t >= a - eps) & (t <= b + eps)
    tw = t[keep]
    fit_back = np.stack(
        [interp_rows(aligned.grid.points, fit_aligned[:, j], tw - theta[j]) for j in range(sample.p)],
        axis=1,
    )
    fit_naive = _pooled_fit(sample.values, sample.grid, K)[..., keep]

    ref = {"observed": sample.values, "signal": sim.extra["signal"], "truth": sim.truth}[target]
    ref = ref[..., keep].reshape(-1, tw.size)
    grid = Grid(tw)
    i_naive = imse(ref, fit_naive.reshape(-1, tw.size), grid=grid)
    i_xcr = imse(ref, fit_back.reshape(-1, tw.size), grid=grid)
    return {
        "imse_naive": i_naive,
        "imse_xcr": i_xcr,
        "pct_decrease": 100.0 * (i_naive - i_xcr) / i_naive if i_naive > 0 else 0.0,
        "theta_hat": theta.tolist(),
        "theta_sum": float(theta.sum()),
        "window": [float(tw[0]), float(tw[-1])],
    }


def run_imse_study(
    sigma2_eta: Sequence[float] = (0.1, 0.25, 0.5, 1.0, 2.0),
    sigma2_zeta: Sequence[float] = (25.0,),
    B: int = 100,
    n: int = 100,
    seed: int = 0,
    K: int = 2,
    target: str = "observed",
    base: Optional[SimConfig] = None,
    opts: MinimizerOpts = MinimizerOpts(),
) -> ExperimentReport:
    """Percent IMSE decrease from registering before FPCA, per noise cell."""
    if B < 1:
        raise ValueError("B must be >= 1")
    base = base or SimConfig()
    start = time.perf_counter()
    records, seeds = [], [replication_seed(seed, b) for b in range(B)]
    for zeta in sigma2_zeta:
        for eta in sigma2_eta:
            for b, s in enumerate(seeds):
                cfg = replace(base, n=n, sigma2_eta=eta, sigma2_zeta=zeta, seed=s)
                rec = {"sigma2_eta": eta, "sigma2_zeta": zeta, "replication": b, "seed": s}
                try:
                    rec.update(imse_replication(cfg, K, target, opts))
                except XcregError as exc:
                    log.warning("replication %d (eta=%s, zeta=%s) failed: %s", b, eta, zeta, exc)
                    rec["error"] = f"{type(exc).__name__}: {exc}"
                records.append(rec)
    report = ExperimentReport(
        "imse",
        {
            "sigma2_eta": list(sigma2_eta),
            "sigma2_zeta": list(sigma2_zeta),
            "B": B,
            "n": n,
            "seed": seed,
            "K": K,
            "target": target,
            "base": base.to_dict(),
        },
        records,
        seeds=seeds,
    )
    report.summary = summarize(report)
    report.wall_clock = time.perf_counter() - start
    return report


def _summarize_imse(report: ExperimentReport) -> dict:
    cells = []
    for zeta in report.config["sigma2_zeta"]:
        for eta in report.config["sigma2_eta"]:
            recs = [
                r for r in report.records
                if r["sigma2_eta"] == eta and r["sigma2_zeta"] == zeta and "error" not in r
            ]
            pct = np.array([r["pct_decrease"] for r in recs])
            failed = sum(
                1 for r in report.records
                if r["sigma2_eta"] == eta and r["sigma2_zeta"] == zeta and "error" in r
            )
            cell = {"sigma2_eta": eta, "sigma2_zeta": zeta, "ok": len(recs), "failed": failed}
            if pct.size:
                cell.update(
                    mean_pct_decrease=float(pct.mean()),
                    sd_pct_decrease=float(pct.std(ddof=1)) if pct.size > 1 else 0.0,
                    frac_improved=float(np.mean([r["imse_xcr"] < r["imse_naive"] for r in recs])),
                    mean_imse_naive=float(np.mean([r["imse_naive"] for r in recs])),
                    mean_imse_xcr=float(np.mean([r["imse_xcr"] for r in recs])),
                    **_quantiles(pct),
                )
            cells.append(cell)
    return {"cells": cells}


def imse_table(report: ExperimentReport) -> list[list]:
    """Rows ``sigma2_zeta``, columns ``sigma2_eta``, entries mean percent decrease."""
    etas = report.config["sigma2_eta"]
    lookup = {(c["sigma2_eta"], c["sigma2_zeta"]): c.get("mean_pct_decrease") for c in report.summary["cells"]}
    rows = [["sigma2_zeta"] + [f"sigma2_eta={e:g}" for e in etas]]
    for zeta in report.config["sigma2_zeta"]:
        rows.append([zeta] + [lookup[(e, zeta)] for e in etas])
    return rows


# -- rate study ---------------------------------------------------------------

RATE_BASE = SimConfig(sigma2_eta=0.0, sigma2_zeta=25.0, sigma2_e=1.0)


def run_rate_study(
    n_list: Sequence[int] = (50, 100, 200, 400, 800),
    B: int = 200,
    config: SimConfig = RATE_BASE,
    seed: int = 0,
    opts: MinimizerOpts = MinimizerOpts(),
    interp: Interp = Interp.CUBIC,
) -> ExperimentReport:
    """RMSE of pairwise and global shift estimates as the sample size grows.

    Curves are interpolated with ``interp`` (cubic by default). Linear
    interpolation of noisy samples makes the criterion kink at every shift
    that is a multiple of the quadrature spacing, which pulls estimates off
    the truth by a fixed amount and leaves a bimodal error distribution.
    """
    interp = Interp(interp)
    n_list = list(n_list)
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing with at least 3 entries")
    theta0 = np.asarray(config.theta)
    tau0 = np.array([theta0[j] - theta0[k] for j, k in pair_index(config.p)])
    start = time.perf_counter()
    seeds = [replication_seed(seed, b) for b in range(B)]
    records = []
    for n in n_list:
        for b, s in enumerate(seeds):
            cfg = replace(config, n=n, seed=s)
            rec = {"n": n, "replication": b, "seed": s}
            try:
                sample = generate_contaminated(cfg).sample.replace(interp=interp)
                res = register(sample, cfg.make_window(), opts)
                rec["tau_err"] = (res.tau_pairs - tau0).tolist()
                rec["theta_err"] = (res.theta_hat - theta0).tolist()
                rec["theta_err_sum"] = float(np.sum(res.theta_hat - theta0))
            except XcregError as exc:
                rec["error"] = f"{type(exc).__name__}: {exc}"
            records.append(rec)
    report = ExperimentReport(
        "rates",
        {"n_list": n_list, "B": B, "seed": seed, "interp": interp.value, "base": config.to_dict()},
        records,
        seeds=seeds,
    )
    report.summary = summarize(report)
    report.wall_clock = time.perf_counter() - start
    return report


def _slope(n_list, rmse) -> Optional[float]:
    rmse = np.asarray(rmse)
    # noise-free runs sit at solver tolerance, and a zero cannot be logged
    if np.all(rmse < 1e-6) or np.any(rmse <= 0):
        return None
    return float(np.polyfit(np.log(n_list), np.log(rmse), 1)[0])


def _summarize_rates(report: ExperimentReport) -> dict:
    n_list = report.config["n_list"]
    p = len(report.config["base"]["theta"])
    pairs = pair_index(p)
    per_n = []
    tau_rmse, theta_rmse = [], []
    for n in n_list:
        recs = [r for r in report.records if r["n"] == n and "error" not in r]
        te = np.array([r["tau_err"] for r in recs])
        he = np.array([r["theta_err"] for r in recs])
        tau_rmse.append(np.sqrt(np.mean(te**2, axis=0)))
        theta_rmse.append(np.sqrt(np.mean(he**2, axis=0)))
        per_n.append(
            {
                "n": n,
                "ok": len(recs),
                "tau_rmse": tau_rmse[-1].tolist(),
                "theta_rmse": theta_rmse[-1].tolist(),
                "tau_bias": te.mean(axis=0).tolist(),
                "theta_bias": he.mean(axis=0).tolist(),
                "max_abs_theta_err_sum": float(np.max(np.abs([r["theta_err_sum"] for r in recs]))),
            }
        )
    tau_rmse, theta_rmse = np.array(tau_rmse), np.array(theta_rmse)
    n_max = n_list[-1]
    last = [r for r in report.records if r["n"] == n_max and "error" not in r]
    scaled_tau = np.sqrt(n_max) * np.array([r["tau_err"] for r in last])
    scaled_theta = np.sqrt(n_max) * np.array([r["theta_err"] for r in last])

    def shape(x):
        # moments are meaningless when every replication hits the same value
        if np.ptp(x) <= 1e-9 * max(1.0, float(np.max(np.abs(x)))):
            return {"skewness": None, "excess_kurtosis": None}
        return {
            "skewness": float(stats.skew(x)),
            "excess_kurtosis": float(stats.kurtosis(x, fisher=True)),
        }

    return {
        "per_n": per_n,
        "pairs": [[j + 1, k + 1] for j, k in pairs],
        "tau_slope": [_slope(n_list, tau_rmse[:, r]) for r in range(len(pairs))],
        "theta_slope": [_slope(n_list, theta_rmse[:, j]) for j in range(p)],
        "normality_at_n": n_max,
        "tau_normality": [shape(scaled_tau[:, r]) for r in range(len(pairs))],
        "theta_normality": [shape(scaled_theta[:, j]) for j in range(p)],
    }


# -- XD study -----------------------------------------------------------------


def run_xd_study(
    sample: MultiCurveSample,
    window: SubintervalSpec,
    theta_hat=None,
    opts: MinimizerOpts = MinimizerOpts(),
    quadrature: Quadrature = Quadrature(),
    density_points: int = 256,
) -> ExperimentReport:
    """Per-subject change in total cross-component distance after registration."""
    start = time.perf_counter()
    if theta_hat is None:
        theta_hat = register(sample, window, opts, quadrature).theta_hat
    theta_hat = np.asarray(theta_hat, dtype=float)
    before = xd_per_subject(sample, np.zeros(sample.p), window, quadrature)
    after = xd_per_subject(sample, theta_hat, window, quadrature)
    records = [
        {"subject_id": sid, "xd_before": float(x0), "xd_after": float(x1), "decrease": float(x0 - x1)}
        for sid, x0, x1 in zip(sample.subject_ids, before, after)
    ]
    report = ExperimentReport(
        "xd",
        {
            "theta_hat": theta_hat.tolist(),
            "window": [window.r1, window.r2],
            "n": sample.n,
            "p": sample.p,
            "density_points": density_points,
        },
        records,
    )
    report.summary = summarize(report)
    report.wall_clock = time.perf_counter() - start
    return report


def xd_density(decrease, points: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density of the per-subject decreases on an even grid."""
    decrease = np.asarray(decrease, dtype=float)
    spread = decrease.std()
    if decrease.size < 2 or spread == 0:
        return decrease[:1].copy(), np.ones(min(1, decrease.size))
    kde = stats.gaussian_kde(decrease)
    pad = 3 * kde.factor * spread
    x = np.linspace(decrease.min() - pad, decrease.max() + pad, points)
    return x, kde(x)


def run_xd_runs(
    config: SimConfig, runs: int = 20, seed: int = 0, opts: MinimizerOpts = MinimizerOpts()
) -> ExperimentReport:
    """XD study repeated on independently seeded contaminated samples."""
    start = time.perf_counter()
    seeds = [replication_seed(seed, r) for r in range(runs)]
    records = []
    for r, s in enumerate(seeds):
        cfg = replace(config, seed=s)
        one = run_xd_study(generate_contaminated(cfg).sample, cfg.make_window(), opts=opts)
        for rec in one.records:
            rec["run"] = r
        records.extend(one.records)
    report = ExperimentReport(
        "xd", {"runs": runs, "seed": seed, "base": config.to_dict()}, records, seeds=seeds
    )
    report.summary = summarize(report)
    report.wall_clock = time.perf_counter() - start
    return report


def _xd_block(records) -> dict:
    before = np.array([r["xd_before"] for r in records])
    after = np.array([r["xd_after"] for r in records])
    dec = before - after
    total = before.sum()
    return {
        "xd_before_total": float(total),
        "xd_after_total": float(after.sum()),
        "pct_reduction": float(100.0 * (total - after.sum()) / total) if total > 0 else 0.0,
        "frac_worsened": float(np.mean(dec < 0)),
        "mean_decrease": float(dec.mean()),
        **_quantiles(dec),
    }


def _summarize_xd(report: ExperimentReport) -> dict:
    out = _xd_block(report.records)
    runs = sorted({r["run"] for r in report.records if "run" in r})
    if runs:
        out["per_run"] = [_xd_block([r for r in report.records if r.get("run") == k]) for k in runs]
    return out


def summarize(report: ExperimentReport) -> dict:
    return {
        "imse": _summarize_imse,
        "rates": _summarize_rates,
        "xd": _summarize_xd,
    }[report.kind](report)
