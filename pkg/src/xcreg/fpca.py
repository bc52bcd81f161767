"""Functional principal component analysis for dense curves on a common grid."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import GridMismatch, InsufficientData
from .fcurve import Curve, Grid, SubintervalSpec, integrate_sampled, trapezoid_weights


@dataclass(frozen=True, eq=False)
class FpcaModel:
    """Mean, leading eigenfunctions and eigenvalues of a sample of curves.

    Eigenfunctions are orthonormal under the trapezoid-weighted inner product
    ``<f, g> = sum_k w_k f(t_k) g(t_k)``.
    """

    grid: Grid
    mean: Curve
    eigenfunctions: np.ndarray  # (K, m)
    eigenvalues: np.ndarray  # (K,)
    quad_weights: np.ndarray  # (m,)
    total_variance: float = 0.0

    @property
    def K(self) -> int:
        return self.eigenvalues.size

    def scores(self, values: np.ndarray, K: Optional[int] = None) -> np.ndarray:
        K = self.K if K is None else K
        return ((values - self.mean.values) * self.quad_weights) @ self.eigenfunctions[:K].T

    def reconstruct_values(self, values: np.ndarray, K: Optional[int] = None) -> np.ndarray:
        """Rank-``K`` fit of each row of ``values`` (shape ``(N, m)``)."""
        K = self.K if K is None else K
        if not 1 <= K <= self.K:
            raise ValueError(f"K must be in [1, {self.K}], got {K}")
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != len(self.grid):
            raise GridMismatch("values do not match the model grid")
        return self.mean.values + self.scores(values, K) @ self.eigenfunctions[:K]

    def to_json(self) -> str:
        return json.dumps(
            {
                "grid": self.grid.points.tolist(),
                "mean": self.mean.values.tolist(),
                "eigenvalues": self.eigenvalues.tolist(),
                "eigenfunctions": self.eigenfunctions.tolist(),
            }
        )


def _as_matrix(curves) -> tuple[Grid, np.ndarray]:
    if isinstance(curves, tuple) and len(curves) == 2 and isinstance(curves[0], Grid):
        return curves[0], np.atleast_2d(np.asarray(curves[1], dtype=float))
    curves = list(curves)
    if not curves:
        raise InsufficientData("no curves")
    grid = curves[0].grid
    for c in curves[1:]:
        if c.grid != grid:
            raise GridMismatch("all curves must share one grid")
    return grid, np.stack([c.values for c in curves])


def fit_fpca(curves: Union[Sequence[Curve], tuple], K: int) -> FpcaModel:
    """Fit FPCA to curves given as a list of Curve or a ``(grid, values)`` pair.

    The covariance operator is discretized as ``W^1/2 C W^1/2`` with
    trapezoid weights ``W`` so that eigenvectors map back to functions that
    are orthonormal in L2.
    """
    grid, x = _as_matrix(curves)
    if x.shape[0] < 2:
        raise InsufficientData("need at least 2 curves")
    if not 1 <= K <= len(grid):
        raise ValueError(f"K must be in [1, {len(grid)}], got {K}")
    mu = x.mean(axis=0)
    resid = x - mu
    cov = resid.T @ resid / (x.shape[0] - 1)
    w = trapezoid_weights(grid.points)
    sw = np.sqrt(w)
    evals, evecs = np.linalg.eigh(sw[:, None] * cov * sw[None, :])
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    total = float(evals.sum())
    evals = evals[:K]
    if np.any(evals < -1e-10 * max(1.0, abs(total))):
        raise np.linalg.LinAlgError("covariance operator is not positive semi-definite")
    evals = np.clip(evals, 0.0, None)
    phi = (evecs[:, :K] / sw[:, None]).T
    flip = np.sign(phi[np.arange(K), np.argmax(np.abs(phi), axis=1)])
    phi = phi * np.where(flip == 0, 1.0, flip)[:, None]
    return FpcaModel(grid, Curve(grid, mu), phi, evals, w, total)


def reconstruct(model: FpcaModel, curve: Curve, K: Optional[int] = None) -> Curve:
    """Mean plus the first ``K`` eigenfunction projections of ``curve``."""
    if curve.grid != model.grid:
        raise GridMismatch("curve is not on the model grid")
    K = model.K if K is None else K
    return Curve(model.grid, model.reconstruct_values(curve.values[None], K)[0], curve.interp)


def imse(
    originals,
    fits,
    grid: Optional[Grid] = None,
    window: Optional[SubintervalSpec] = None,
) -> float:
    """Mean over curves of the integrated squared difference on ``window``.

    Accepts matched lists of Curve or ``(N, m)`` arrays together with ``grid``.
    """
    if grid is None:
        g1, a = _as_matrix(originals)
        g2, b = _as_matrix(fits)
        if g1 != g2:
            raise GridMismatch("originals and fits are on different grids")
        grid = g1
    else:
        a = np.atleast_2d(np.asarray(originals, dtype=float))
        b = np.atleast_2d(np.asarray(fits, dtype=float))
    if a.shape != b.shape or a.shape[-1] != len(grid):
        raise GridMismatch(f"shape mismatch {a.shape} vs {b.shape} on {len(grid)} grid points")
    lo, hi = (grid.first, grid.last) if window is None else (window.r1, window.r2)
    return float(np.mean(integrate_sampled(grid.points, (a - b) ** 2, lo, hi)))
