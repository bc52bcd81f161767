"""Sampled functional data: grids, curves, quadrature and kernel smoothing.

Every curve in a :class:`MultiCurveSample` lives on one shared :class:`Grid`.
Values are stored as a dense ``(n, p, m)`` array so batch evaluation at
arbitrary time points costs one interpolation pass per component.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegenerateWindow,
    GridMismatch,
    InsufficientData,
    NonFinite,
    OutOfDomain,
    RangeDegenerate,
    ZeroArea,
)

# relative slack for domain checks; keeps t0 + tau - tau round-off inside
_DOMAIN_EPS = 1e-9
# kernel weights at or below this carry no information
_KERNEL_FLOOR = 1e-8


class Interp(str, enum.Enum):
    LINEAR = "linear"
    CUBIC = "cubic"


class Rule(str, enum.Enum):
    TRAPEZOID = "trapezoid"
    SIMPSON = "simpson"


class Extension(str, enum.Enum):
    NONE = "none"
    CONSTANT_RIGHT = "constant_right"


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing, finite time grid with at least two points."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(np.ravel(self.points))
        if pts.size < 2:
            raise ValueError("grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise NonFinite("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, start: float, stop: float, step: float) -> "Grid":
        """Grid ``start, start + step, ..., stop`` (``stop`` included when reached)."""
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return cls(start + step * np.arange(count))

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and np.array_equal(self.points, other.points)

    __hash__ = None

    @property
    def first(self) -> float:
        return float(self.points[0])

    @property
    def last(self) -> float:
        return float(self.points[-1])

    @property
    def spacing(self) -> float:
        """Median spacing between consecutive points."""
        return float(np.median(np.diff(self.points)))


@dataclass(frozen=True)
class SubintervalSpec:
    """Integration window ``[r1, r2]`` inside the domain ``[t0, tmax]``."""

    r1: float
    r2: float
    t0: float
    tmax: float

    def __post_init__(self):
        vals = (self.r1, self.r2, self.t0, self.tmax)
        if not all(np.isfinite(v) for v in vals):
            raise NonFinite("window bounds must be finite")
        if not (self.t0 <= self.r1 < self.r2 <= self.tmax):
            raise ValueError(
                f"window [{self.r1}, {self.r2}] must satisfy "
                f"{self.t0} <= r1 < r2 <= {self.tmax}"
            )

    @classmethod
    def on(cls, grid: Grid, r1: float, r2: float) -> "SubintervalSpec":
        return cls(float(r1), float(r2), grid.first, grid.last)

    @property
    def length(self) -> float:
        return self.r2 - self.r1

    @property
    def shift_range(self) -> tuple[float, float]:
        """Admissible ``tau`` for evaluating ``X(t - tau)``, ``t`` in the window."""
        lo, hi = -(self.tmax - self.r2), self.r1 - self.t0
        if not lo < 0 < hi:
            raise RangeDegenerate(
                f"window [{self.r1}, {self.r2}] leaves no room to shift in "
                f"[{self.t0}, {self.tmax}] (range {lo}, {hi})"
            )
        return lo, hi


def _check_domain(x: np.ndarray, t: np.ndarray, extension: Extension) -> np.ndarray:
    lo, hi = x[0], x[-1]
    eps = _DOMAIN_EPS * max(1.0, hi - lo)
    if np.any(~np.isfinite(t)):
        raise NonFinite("evaluation points must be finite")
    below = t < lo - eps
    above = (t > hi + eps) if extension is Extension.NONE else np.zeros_like(below)
    if np.any(below | above):
        bad = t[below | above]
        raise OutOfDomain(
            f"t={bad.min() if np.any(below) else bad.max():.6g} outside [{lo:.6g}, {hi:.6g}]"
        )
    return np.clip(t, lo, hi)


class RowInterpolant:
    """Interpolant for every row of ``values`` on nodes ``x``, built once.

    Cubic splines are fitted at construction, so repeated evaluation (as in a
    shift search) only pays for the evaluation itself.
    """

    def __init__(self, x, values, interp=Interp.LINEAR, extension=Extension.NONE):
        self.x = np.asarray(x, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.interp, self.extension = Interp(interp), Extension(extension)
        self._spline = None
        if self.interp is Interp.CUBIC:
            self._spline = CubicSpline(self.x, self.values, axis=-1, bc_type="natural")

    def __call__(self, t) -> np.ndarray:
        x, values = self.x, self.values
        t_in = np.asarray(t, dtype=float)
        tt = _check_domain(x, np.ravel(t_in), self.extension)
        if self._spline is None:
            idx = np.clip(np.searchsorted(x, tt, side="right") - 1, 0, x.size - 2)
            w = (tt - x[idx]) / (x[idx + 1] - x[idx])
            out = values[..., idx] * (1.0 - w) + values[..., idx + 1] * w
        else:
            out = self._spline(tt)
            node = np.clip(np.searchsorted(x, tt), 0, x.size - 1)
            hit = x[node] == tt
            if np.any(hit):
                out[..., hit] = values[..., node[hit]]
        return out.reshape(values.shape[:-1] + t_in.shape)


def interp_rows(
    x: np.ndarray,
    values: np.ndarray,
    t,
    interp: Union[Interp, str] = Interp.LINEAR,
    extension: Union[Extension, str] = Extension.NONE,
) -> np.ndarray:
    """Interpolate every row of ``values`` (last axis on ``x``) at points ``t``.

    Returns an array of shape ``values.shape[:-1] + np.shape(t)``. Points that
    coincide with a node return the stored value bit-for-bit.
    """
    return RowInterpolant(x, values, interp, extension)(t)


@dataclass(frozen=True, eq=False)
class Curve:
    """One sampled function with an interpolation rule."""

    grid: Grid
    values: np.ndarray
    interp: Interp = Interp.LINEAR
    extension: Extension = Extension.NONE

    def __post_init__(self):
        vals = _frozen(np.ravel(self.values))
        if vals.size != len(self.grid):
            raise GridMismatch(f"{vals.size} values for a grid of {len(self.grid)} points")
        if not np.all(np.isfinite(vals)):
            raise NonFinite("curve values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "interp", Interp(self.interp))
        object.__setattr__(self, "extension", Extension(self.extension))

    def __call__(self, t):
        out = interp_rows(self.grid.points, self.values, t, self.interp, self.extension)
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, a: Optional[float] = None, b: Optional[float] = None) -> float:
        """Exact integral of the interpolant over ``[a, b]`` (default: whole grid)."""
        x = self.grid.points
        a = x[0] if a is None else float(a)
        b = x[-1] if b is None else float(b)
        tail = 0.0
        if b > x[-1] and self.extension is Extension.CONSTANT_RIGHT:
            tail = self.values[-1] * (b - max(a, x[-1]))
            b = x[-1]
            if a >= b:
                return float(tail)
        _check_domain(x, np.array([a, b]), Extension.NONE)
        if self.interp is Interp.CUBIC:
            body = CubicSpline(x, self.values, bc_type="natural").integrate(a, b)
        else:
            body = integrate_sampled(x, self.values, a, b)
        return float(body + tail)


def evaluate(curve: Curve, t):
    """Value of ``curve`` at ``t`` (scalar or array)."""
    return curve(t)


# -- quadrature ---------------------------------------------------------------


def quadrature_nodes(a: float, b: float, rule=Rule.TRAPEZOID, resolution: int = 100):
    """Nodes and weights of a composite rule with ``resolution`` panels on ``[a, b]``.

    Simpson needs an even panel count; odd counts are bumped by one.
    """
    rule = Rule(rule)
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if rule is Rule.SIMPSON and resolution % 2:
        resolution += 1
    nodes = np.linspace(a, b, resolution + 1)
    h = (b - a) / resolution
    if rule is Rule.TRAPEZOID:
        w = np.full(resolution + 1, h)
        w[[0, -1]] = h / 2
    else:
        w = np.where(np.arange(resolution + 1) % 2, 4.0, 2.0) * h / 3
        w[[0, -1]] = h / 3
    return nodes, w


def integrate(
    f: Callable, a: float, b: float, rule=Rule.TRAPEZOID, resolution: int = 100
) -> float:
    """Composite trapezoid or Simpson approximation of the integral of ``f``."""
    nodes, w = quadrature_nodes(a, b, rule, resolution)
    try:
        fx = np.asarray(f(nodes), dtype=float)
        if fx.shape != nodes.shape:
            raise ValueError
    except (TypeError, ValueError):
        fx = np.array([f(float(t)) for t in nodes], dtype=float)
    if not np.all(np.isfinite(fx)):
        raise NonFinite("integrand returned a non-finite value")
    return float(fx @ w)


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    dx = np.diff(x)
    w = np.zeros(x.size)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def integrate_sampled(x: np.ndarray, values: np.ndarray, a: float, b: float) -> np.ndarray:
    """Integral over ``[a, b]`` of the piecewise-linear interpolant of each row."""
    inner = x[(x > a) & (x < b)]
    pts = np.concatenate(([a], inner, [b]))
    vals = interp_rows(x, values, pts)
    return vals @ trapezoid_weights(pts)


# -- kernel smoothing ---------------------------------------------------------


def default_bandwidth(grid: Grid) -> float:
    """Conservative default: ten median grid spacings."""
    return 2 * grid.spacing * 5


def local_poly_operator(
    x: np.ndarray, out: np.ndarray, bandwidth: float, degree: int = 2, deriv: int = 0
) -> np.ndarray:
    """Linear smoother matrix ``H`` so that ``H @ y`` is the local polynomial fit.

    Each row solves a Gaussian-weighted least squares problem of the given
    degree centred at ``out[r]`` and returns ``deriv! * coef[deriv]``.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if deriv > degree:
        raise ValueError("deriv cannot exceed degree")
    u = (x[None, :] - out[:, None]) / bandwidth
    k = np.exp(-0.5 * u**2)
    k[k <= _KERNEL_FLOOR] = 0.0
    active = np.count_nonzero(k, axis=1)
    if np.any(active < degree + 1):
        r = int(np.argmax(active < degree + 1))
        raise DegenerateWindow(
            f"only {active[r]} grid points carry kernel weight at t={out[r]:.6g}"
        )
    design = u[..., None] ** np.arange(degree + 1)  # (q, m, d+1)
    wd = design * k[..., None]
    gram = np.einsum("qmi,qmj->qij", wd, design)
    rows = np.linalg.solve(gram, np.swapaxes(wd, 1, 2))  # (q, d+1, m)
    factorial = float(np.prod(np.arange(1, deriv + 1)))
    return rows[:, deriv, :] * factorial / bandwidth**deriv


def _out_points(curve_grid: Grid, out_grid: Optional[Grid]) -> Grid:
    if out_grid is None:
        return curve_grid
    eps = _DOMAIN_EPS * max(1.0, curve_grid.last - curve_grid.first)
    if out_grid.first < curve_grid.first - eps or out_grid.last > curve_grid.last + eps:
        raise OutOfDomain("output grid extends beyond the curve domain")
    return out_grid


def estimate_derivative(
    curve: Curve, bandwidth: Optional[float] = None, out_grid: Optional[Grid] = None
) -> Curve:
    """First derivative by local quadratic fitting with a Gaussian kernel."""
    bandwidth = default_bandwidth(curve.grid) if bandwidth is None else bandwidth
    out = _out_points(curve.grid, out_grid)
    h = local_poly_operator(curve.grid.points, out.points, bandwidth, degree=2, deriv=1)
    return Curve(out, h @ curve.values, curve.interp)


def smooth(
    curve: Curve, bandwidth: float, out_grid: Optional[Grid] = None, degree: int = 1
) -> Curve:
    """Local polynomial smooth of the curve values (no derivative)."""
    out = _out_points(curve.grid, out_grid)
    h = local_poly_operator(curve.grid.points, out.points, bandwidth, degree=degree)
    return Curve(out, h @ curve.values, curve.interp)


def _window_bounds(grid: Grid, window) -> tuple[float, float]:
    if window is None:
        return grid.first, grid.last
    return window.r1, window.r2


def normalize_auc(curve: Curve, window: Optional[SubintervalSpec] = None) -> Curve:
    """Rescale ``curve`` so its integral over ``window`` (default: full domain) is 1."""
    area = curve.integral(*_window_bounds(curve.grid, window))
    if abs(area) < 1e-12:
        raise ZeroArea(f"area {area:.3g} over the normalization window")
    return Curve(curve.grid, curve.values / area, curve.interp, curve.extension)


# -- multivariate samples -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultiCurveSample:
    """``n`` subjects by ``p`` components, every curve on the same grid."""

    grid: Grid
    values: np.ndarray
    component_names: tuple = ()
    subject_ids: tuple = ()
    interp: Interp = Interp.LINEAR
    extension: Extension = Extension.NONE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 3:
            raise ValueError("values must have shape (n, p, m)")
        n, p, m = vals.shape
        if m != len(self.grid):
            raise GridMismatch(f"values have {m} columns, grid has {len(self.grid)} points")
        if p < 2:
            raise ValueError("need at least 2 components")
        if n < 1:
            raise InsufficientData("need at least 1 subject")
        if not np.all(np.isfinite(vals)):
            raise NonFinite("sample contains non-finite values")
        names = tuple(self.component_names) or tuple(f"c{j + 1}" for j in range(p))
        ids = tuple(self.subject_ids) or tuple(str(i + 1) for i in range(n))
        if len(names) != p or len(ids) != n:
            raise ValueError("label counts do not match the values array")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "component_names", names)
        object.__setattr__(self, "subject_ids", ids)
        object.__setattr__(self, "interp", Interp(self.interp))
        object.__setattr__(self, "extension", Extension(self.extension))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def curve(self, i: int, j: int) -> Curve:
        return Curve(self.grid, self.values[i, j], self.interp, self.extension)

    def component(self, j: int) -> np.ndarray:
        return self.values[:, j, :]

    def evaluate_component(self, j: int, t) -> np.ndarray:
        """Values of component ``j`` for every subject at points ``t``: ``(n, len(t))``."""
        return interp_rows(self.grid.points, self.values[:, j, :], t, self.interp, self.extension)

    def replace(self, values=None, grid: Optional[Grid] = None, **kw) -> "MultiCurveSample":
        return MultiCurveSample(
            grid=self.grid if grid is None else grid,
            values=self.values if values is None else values,
            component_names=kw.get("component_names", self.component_names),
            subject_ids=kw.get("subject_ids", self.subject_ids),
            interp=kw.get("interp", self.interp),
            extension=kw.get("extension", self.extension),
            meta=kw.get("meta", dict(self.meta)),
        )

    def subset(self, subjects: Sequence[int]) -> "MultiCurveSample":
        idx = np.asarray(subjects, dtype=int)
        return self.replace(
            values=self.values[idx], subject_ids=tuple(self.subject_ids[i] for i in idx)
        )

    def extend_right(self, to: float) -> "MultiCurveSample":
        """Append grid points up to ``to`` holding each curve's last value."""
        step = self.grid.spacing
        last = self.grid.last
        extra = last + step * np.arange(1, int(np.floor((to - last) / step + 1e-9)) + 1)
        if extra.size == 0:
            return self
        pad = np.repeat(self.values[..., -1:], extra.size, axis=-1)
        return self.replace(
            values=np.concatenate([self.values, pad], axis=-1),
            grid=Grid(np.concatenate([self.grid.points, extra])),
        )


def smooth_sample(
    sample: MultiCurveSample, bandwidth: float, degree: int = 1
) -> MultiCurveSample:
    """Apply the same local polynomial smoother to every curve of the sample."""
    x = sample.grid.points
    h = local_poly_operator(x, x, bandwidth, degree=degree)
    return sample.replace(values=sample.values @ h.T)


def derivative_sample(
    sample: MultiCurveSample, bandwidth: Optional[float] = None
) -> MultiCurveSample:
    """First-derivative estimates of every curve on the sample grid."""
    bandwidth = default_bandwidth(sample.grid) if bandwidth is None else bandwidth
    x = sample.grid.points
    h = local_poly_operator(x, x, bandwidth, degree=2, deriv=1)
    return sample.replace(values=sample.values @ h.T)


def normalize_sample(
    sample: MultiCurveSample, window: Optional[SubintervalSpec] = None
) -> MultiCurveSample:
    """Divide every curve by its area over ``window`` (default: full domain)."""
    a, b = _window_bounds(sample.grid, window)
    x = sample.grid.points
    if sample.interp is Interp.CUBIC:
        areas = CubicSpline(x, sample.values, axis=-1, bc_type="natural").integrate(a, b)
    else:
        areas = integrate_sampled(x, sample.values, a, b)
    if np.any(np.abs(areas) < 1e-12):
        i, j = np.argwhere(np.abs(areas) < 1e-12)[0]
        raise ZeroArea(f"subject {sample.subject_ids[i]} component {sample.component_names[j]}")
    return sample.replace(values=sample.values / areas[..., None])
