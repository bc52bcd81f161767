"""Bivariate cross-component registration.

The shift between components ``j`` and ``k`` minimizes the mean squared L2
distance ``(1/n) sum_i int_I {X_ij(t) - X_ik(t - tau)}^2 dt`` over the
admissible range implied by the integration window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoMinimum, RangeDegenerate, ShiftOutOfRange
from .fcurve import MultiCurveSample, RowInterpolant, Rule, SubintervalSpec, quadrature_nodes

_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class MinimizerOpts:
    coarse_step: Optional[float] = None  # None: sample grid spacing
    tol: float = 1e-4
    tie_tol: float = 1e-12
    multimodal_tol: float = 1e-6


@dataclass(frozen=True)
class Quadrature:
    rule: Rule = Rule.SIMPSON
    nodes_per_interval: int = 4


class PairwiseCriterion:
    """Sample criterion ``L_n(tau)`` for one ordered pair of components.

    Quadrature nodes are fixed in ``t``; only the second component is
    re-evaluated when ``tau`` changes, so ``L_n`` is continuous in ``tau``.
    """

    def __init__(
        self,
        sample: MultiCurveSample,
        j: int,
        k: int,
        window: SubintervalSpec,
        quadrature: Quadrature = Quadrature(),
    ):
        if j == k:
            raise ValueError("j and k must differ")
        if not (0 <= j < sample.p and 0 <= k < sample.p):
            raise IndexError(f"component index out of range for p={sample.p}")
        if window.t0 < sample.grid.first - 1e-9 or window.tmax > sample.grid.last + 1e-9:
            raise ValueError("window domain exceeds the sample grid")
        self.sample, self.j, self.k, self.window = sample, j, k, window
        self.lo, self.hi = window.shift_range
        panels = max(2, int(round(quadrature.nodes_per_interval * window.length / sample.grid.spacing)))
        self.nodes, self.weights = quadrature_nodes(window.r1, window.r2, quadrature.rule, panels)
        self._xj = sample.evaluate_component(j, self.nodes)
        self._xk = RowInterpolant(
            sample.grid.points, sample.component(k), sample.interp, sample.extension
        )

    def __call__(self, tau: float) -> float:
        return criterion_value(self, tau)

    def per_subject(self, tau: float) -> np.ndarray:
        """Integrated squared distance for every subject at shift ``tau``."""
        slack = 1e-12 * max(1.0, self.hi - self.lo)
        if not (self.lo - slack <= tau <= self.hi + slack):
            raise ShiftOutOfRange(f"tau={tau:.6g} outside [{self.lo:.6g}, {self.hi:.6g}]")
        xk = self._xk(self.nodes - tau)
        return ((self._xj - xk) ** 2) @ self.weights


def criterion_value(c: PairwiseCriterion, tau: float) -> float:
    return float(np.mean(c.per_subject(float(tau))))


@dataclass
class PairwiseShift:
    tau_hat: float
    criterion_at_min: float
    search_trace: list = field(default_factory=list)
    lo: float = -math.inf
    hi: float = math.inf
    censored: bool = False
    multimodal: list = field(default_factory=list)
    j: int = 0
    k: int = 1


def coarse_taus(lo: float, hi: float, step: float) -> np.ndarray:
    """Scan points ``0, +-step, +-2 step, ...`` inside ``[lo, hi]`` plus both ends."""
    right = step * np.arange(0, int(np.floor(hi / step + 1e-9)) + 1)
    left = -step * np.arange(1, int(np.floor(-lo / step + 1e-9)) + 1)
    taus = np.unique(np.concatenate(([lo], left, right, [hi])))
    return taus[(taus >= lo) & (taus <= hi)]


def golden_section(f, a: float, b: float, tol: float, trace: list) -> tuple[float, float]:
    """Golden-section search on ``[a, b]`` down to an interval of width ``tol``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    trace += [(c, fc), (d, fd)]
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
            trace.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
            trace.append((d, fd))
    x = 0.5 * (a + b)
    fx = f(x)
    trace.append((x, fx))
    return x, fx


def estimate_pairwise_shift(
    c: PairwiseCriterion, opts: MinimizerOpts = MinimizerOpts()
) -> PairwiseShift:
    """Global coarse scan followed by golden-section refinement."""
    lo, hi = c.lo, c.hi
    if lo >= hi:
        raise RangeDegenerate(f"empty shift range [{lo}, {hi}]")
    step = opts.coarse_step or c.sample.grid.spacing
    taus = coarse_taus(lo, hi, step)
    vals = np.array([c(t) for t in taus])
    trace = [(float(t), float(v)) for t, v in zip(taus, vals)]
    finite = np.isfinite(vals)
    if not np.any(finite):
        raise NoMinimum("criterion is non-finite over the whole shift range")
    vals = np.where(finite, vals, np.inf)
    best_val = vals.min()
    ties = np.flatnonzero(vals <= best_val + opts.tie_tol * max(1.0, abs(best_val)))
    b = ties[np.argmin(np.abs(taus[ties]))]

    # other coarse local minima nearly as good as the winner
    interior = np.r_[True, vals[1:] <= vals[:-1]] & np.r_[vals[:-1] <= vals[1:], True]
    near = vals <= best_val + opts.multimodal_tol * max(1.0, abs(best_val))
    multimodal = [float(taus[i]) for i in np.flatnonzero(interior & near) if abs(i - b) > 1]

    a_br, b_br = taus[max(b - 1, 0)], taus[min(b + 1, taus.size - 1)]
    tau_hat, val = float(taus[b]), float(vals[b])
    if b_br - a_br > opts.tol:
        tau_g, val_g = golden_section(c, a_br, b_br, opts.tol, trace)
        if val_g < val:
            tau_hat, val = tau_g, val_g
    edge = max(opts.tol, 1e-9)
    return PairwiseShift(
        tau_hat=tau_hat,
        criterion_at_min=max(val, 0.0),
        search_trace=trace,
        lo=lo,
        hi=hi,
        censored=bool(tau_hat - lo <= edge or hi - tau_hat <= edge),
        multimodal=multimodal,
        j=c.j,
        k=c.k,
    )


def antisymmetry_check(
    c_jk: PairwiseCriterion, c_kj: PairwiseCriterion, opts: MinimizerOpts = MinimizerOpts()
) -> tuple[float, float]:
    """Shift estimates for both orderings of a pair; they should sum to ~0."""
    if (c_jk.j, c_jk.k) != (c_kj.k, c_kj.j) or c_jk.sample is not c_kj.sample:
        raise ValueError("criteria must share a sample and swap component roles")
    return (
        estimate_pairwise_shift(c_jk, opts).tau_hat,
        estimate_pairwise_shift(c_kj, opts).tau_hat,
    )
