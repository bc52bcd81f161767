"""Global cross-component registration.

Pairwise shifts ``tau_jk = theta_j - theta_k`` are stacked with a trailing 0
and regressed on the contrast matrix whose last row is all ones, which pins
``sum(theta) = 0``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import NonFinite, ShiftOutOfRange
from .fcurve import Grid, MultiCurveSample, SubintervalSpec, interp_rows, quadrature_nodes
from .pairwise import (
    MinimizerOpts,
    PairwiseCriterion,
    PairwiseShift,
    Quadrature,
    estimate_pairwise_shift,
)


def pair_index(p: int) -> list[tuple[int, int]]:
    """Pairs ``(j, k)``, ``j < k``, in lexicographic order."""
    return list(combinations(range(p), 2))


@dataclass(frozen=True, eq=False)
class ContrastMatrix:
    p: int
    rows: np.ndarray

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return pair_index(self.p)


def build_contrast_matrix(p: int) -> ContrastMatrix:
    if p < 2:
        raise ValueError("p must be at least 2")
    pairs = pair_index(p)
    a = np.zeros((len(pairs) + 1, p))
    for r, (j, k) in enumerate(pairs):
        a[r, j], a[r, k] = 1.0, -1.0
    a[-1] = 1.0
    assert np.linalg.matrix_rank(a) == p
    a.flags.writeable = False
    return ContrastMatrix(p, a)


@dataclass
class GlobalShiftResult:
    theta_hat: np.ndarray
    tau_hat_stacked: np.ndarray
    residuals: np.ndarray
    component_names: tuple = ()


def solve_global_shifts(
    tau_pairs: Sequence[float], p: int, component_names: Sequence[str] = ()
) -> GlobalShiftResult:
    """Least-squares global shifts from lexicographically ordered pairwise shifts."""
    tau = np.asarray(tau_pairs, dtype=float)
    a = build_contrast_matrix(p).rows
    if tau.shape != (a.shape[0] - 1,):
        raise ValueError(f"expected {a.shape[0] - 1} pairwise shifts for p={p}, got {tau.size}")
    if not np.all(np.isfinite(tau)):
        raise NonFinite("pairwise shifts must be finite")
    stacked = np.append(tau, 0.0)
    theta, *_ = np.linalg.lstsq(a, stacked, rcond=None)
    names = tuple(component_names) or tuple(f"c{j + 1}" for j in range(p))
    return GlobalShiftResult(theta, stacked, stacked - a @ theta, names)


def aligned_domain(grid: Grid, theta) -> tuple[float, float]:
    """Points ``t`` where every ``t + theta_j`` stays on the grid."""
    theta = np.asarray(theta, dtype=float)
    return grid.first - theta.min(), grid.last - theta.max()


def apply_shifts(
    sample: MultiCurveSample, theta, window: Optional[SubintervalSpec] = None
) -> MultiCurveSample:
    """Component ``j`` becomes ``t -> X_ij(t + theta_j)`` on the common aligned domain.

    The output grid is the input grid translated to start at the aligned
    domain's left end and cut at its right end, so spacing is preserved.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (sample.p,):
        raise ValueError(f"theta must have {sample.p} entries")
    lo, hi = aligned_domain(sample.grid, theta)
    if sample.extension.value == "constant_right":
        hi = sample.grid.last - theta.min()
    pts = sample.grid.points + (lo - sample.grid.first)
    pts = pts[pts <= hi + 1e-9 * max(1.0, hi - lo)]
    if pts.size < 2:
        raise ShiftOutOfRange(f"shifts {theta.tolist()} leave no common domain")
    if window is not None and (window.r1 < pts[0] - 1e-9 or window.r2 > pts[-1] + 1e-9):
        j = int(np.argmax(np.abs(theta)))
        raise ShiftOutOfRange(
            f"component {sample.component_names[j]} shifted by {theta[j]:.6g} "
            f"does not cover window [{window.r1}, {window.r2}]"
        )
    grid = Grid(pts)
    vals = np.stack(
        [sample.evaluate_component(j, pts + theta[j]) for j in range(sample.p)], axis=1
    )
    return sample.replace(values=vals, grid=grid)


def _shifted_at_nodes(grid, values, theta, nodes, interp, extension):
    try:
        return np.stack(
            [
                interp_rows(grid.points, values[..., j, :], nodes + theta[j], interp, extension)
                for j in range(values.shape[-2])
            ],
            axis=-2,
        )
    except ValueError as exc:
        raise ShiftOutOfRange(str(exc)) from exc


def xd_per_subject(
    sample: MultiCurveSample, theta, window: SubintervalSpec, quadrature: Quadrature = Quadrature()
) -> np.ndarray:
    """Total cross-component distance ``XD_i(theta)`` for every subject."""
    theta = np.asarray(theta, dtype=float)
    panels = max(2, int(round(quadrature.nodes_per_interval * window.length / sample.grid.spacing)))
    nodes, w = quadrature_nodes(window.r1, window.r2, quadrature.rule, panels)
    shifted = _shifted_at_nodes(
        sample.grid, sample.values, theta, nodes, sample.interp, sample.extension
    )
    total = np.zeros(sample.n)
    for j, k in pair_index(sample.p):
        total += ((shifted[:, j] - shifted[:, k]) ** 2) @ w
    return total


def cross_component_distance(
    subject_curves, theta, window: SubintervalSpec, quadrature: Quadrature = Quadrature()
) -> float:
    """``XD(theta)`` for one subject given its ``p`` curves (a list of Curve)."""
    curves = list(subject_curves)
    grid = curves[0].grid
    if any(c.grid != grid for c in curves):
        raise ValueError("subject curves must share a grid")
    one = MultiCurveSample(
        grid,
        np.stack([c.values for c in curves])[None],
        interp=curves[0].interp,
        extension=curves[0].extension,
    )
    return float(xd_per_subject(one, theta, window, quadrature)[0])


@dataclass
class XcrResult:
    """Everything a full registration run produces."""

    pairwise: list[PairwiseShift]
    global_shifts: GlobalShiftResult
    window: SubintervalSpec
    warnings: list = field(default_factory=list)

    @property
    def theta_hat(self) -> np.ndarray:
        return self.global_shifts.theta_hat

    @property
    def tau_pairs(self) -> np.ndarray:
        return np.array([s.tau_hat for s in self.pairwise])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("XCREG_THREADS", "1")))
    except ValueError:
        return 1


def register(
    sample: MultiCurveSample,
    window: SubintervalSpec,
    opts: MinimizerOpts = MinimizerOpts(),
    quadrature: Quadrature = Quadrature(),
    reference: Optional[MultiCurveSample] = None,
) -> XcrResult:
    """Estimate every pairwise shift and combine them into global shifts.

    ``reference`` optionally supplies the curves used for estimation (for
    instance a smoothed copy); the result always refers to ``sample``'s
    components.
    """
    data = sample if reference is None else reference

    def one(pair):
        j, k = pair
        return estimate_pairwise_shift(PairwiseCriterion(data, j, k, window, quadrature), opts)

    pairs = pair_index(sample.p)
    workers = min(_threads(), len(pairs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            shifts = list(pool.map(one, pairs))
    else:
        shifts = [one(pr) for pr in pairs]
    names = sample.component_names
    warnings = []
    for s in shifts:
        tag = f"{names[s.j]}-{names[s.k]}"
        if s.censored:
            warnings.append(f"Censored: tau[{tag}]={s.tau_hat:.6g} at range edge [{s.lo:.6g}, {s.hi:.6g}]")
        if s.multimodal:
            warnings.append(f"MultiModal: tau[{tag}] near-equal minima at {s.multimodal}")
    result = solve_global_shifts([s.tau_hat for s in shifts], sample.p, names)
    return XcrResult(shifts, result, window, warnings)
