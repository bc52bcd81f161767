"""Synthetic multivariate curves from the shift-warping model.

Random draws use numpy's Philox counter-based bit generator. Subject ``i``
gets its own stream keyed by ``(seed, i)``, so a sample is bit-identical
regardless of the order in which subjects are generated.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fcurve import Grid, MultiCurveSample, SubintervalSpec

RNG_NAME = f"numpy.random.Philox (numpy {np.__version__})"


def latent_curve(t):
    """Base shape: linear decline plus a Gaussian bump peaking at t = 25."""
    t = np.asarray(t, dtype=float)
    out = 20.0 - 0.5 * t + 30.0 * np.exp(-((t - 25.0) ** 2) / 72.0)
    return float(out) if out.ndim == 0 else out


def latent_derivative(t):
    t = np.asarray(t, dtype=float)
    return -0.5 - 30.0 * (t - 25.0) / 36.0 * np.exp(-((t - 25.0) ** 2) / 72.0)


def subject_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(i,))))


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size < 2:
        raise ValueError("theta needs at least 2 entries")
    if abs(theta.sum()) > 1e-10:
        raise ValueError(f"theta must sum to 0, sums to {theta.sum():.3g}")
    return theta


@dataclass
class SimConfig:
    n: int = 100
    p: int = 4
    theta: Sequence[float] = (-5.0, -2.5, 2.5, 5.0)
    sigma2_eta: float = 0.1
    sigma2_zeta: float = 25.0
    sigma2_e: float = 1.0
    grid: tuple = (0.0, 50.0, 0.5)  # start, stop, step
    window: tuple = (10.0, 40.0)
    seed: int = 0

    def __post_init__(self):
        self.theta = tuple(float(v) for v in _check_theta(self.theta))
        if len(self.theta) != self.p:
            raise ValueError(f"theta has {len(self.theta)} entries for p={self.p}")
        if self.n < 1:
            raise ValueError("n must be positive")
        for name in ("sigma2_eta", "sigma2_zeta", "sigma2_e"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        self.grid = tuple(float(v) for v in self.grid)
        self.window = tuple(float(v) for v in self.window)

    def make_grid(self) -> Grid:
        return Grid.uniform(*self.grid)

    def make_window(self) -> SubintervalSpec:
        return SubintervalSpec.on(self.make_grid(), *self.window)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta"], d["grid"], d["window"] = list(self.theta), list(self.grid), list(self.window)
        return d


@dataclass
class SimulatedSample:
    sample: MultiCurveSample
    truth: np.ndarray  # (n, p, m) noise-free Z(t - theta_j)
    eta: np.ndarray  # (n, p)
    zeta: np.ndarray  # (n, p)
    config: Optional[SimConfig] = None
    extra: dict = field(default_factory=dict)


def generate_contaminated(config: SimConfig) -> SimulatedSample:
    """Shifted latent curves with time jitter, random sine amplitude and noise.

    ``X_ij(t_k) = Z(t_k - theta_j + eta_ij) + zeta_ij sin(pi t_k / 5) + e_ijk``
    """
    grid = config.make_grid()
    t = grid.points
    theta = np.asarray(config.theta)
    n, p, m = config.n, config.p, t.size
    sd_eta, sd_zeta, sd_e = np.sqrt([config.sigma2_eta, config.sigma2_zeta, config.sigma2_e])
    eta = np.empty((n, p))
    zeta = np.empty((n, p))
    err = np.empty((n, p, m))
    for i in range(n):
        rng = subject_rng(config.seed, i)
        eta[i] = sd_eta * rng.standard_normal(p)
        zeta[i] = sd_zeta * rng.standard_normal(p)
        err[i] = sd_e * rng.standard_normal((p, m))
    shifted = t[None, None, :] - theta[None, :, None]
    truth = np.broadcast_to(latent_curve(shifted), (n, p, m)).copy()
    signal = latent_curve(shifted + eta[..., None]) + zeta[..., None] * np.sin(np.pi * t / 5.0)
    sample = MultiCurveSample(grid, signal + err, meta={"generator": "contaminated", "rng": RNG_NAME})
    return SimulatedSample(sample, truth, eta, zeta, config, {"signal": signal})


def generate_pure_shift(
    n: int,
    p: int,
    theta,
    latent: Callable = latent_curve,
    grid: Optional[Grid] = None,
    subject_level_shifts: Optional[float] = None,
    seed: int = 0,
) -> MultiCurveSample:
    """Components ``X_ij(t) = Z_i(t - theta_j)`` with optional subject shifts.

    With ``subject_level_shifts=v`` each subject's latent curve is
    ``latent(t - theta_i)``, ``theta_i ~ N(0, v)``.
    """
    theta = _check_theta(theta)
    if theta.size != p:
        raise ValueError(f"theta has {theta.size} entries for p={p}")
    grid = Grid.uniform(0.0, 50.0, 0.5) if grid is None else grid
    t = grid.points
    subj = np.zeros(n)
    if subject_level_shifts:
        subj = np.array(
            [np.sqrt(subject_level_shifts) * subject_rng(seed, i).standard_normal() for i in range(n)]
        )
    args = t[None, None, :] - theta[None, :, None] - subj[:, None, None]
    vals = np.asarray(latent(args), dtype=float)
    return MultiCurveSample(
        grid, vals, meta={"generator": "pure_shift", "subject_shifts": subj.tolist()}
    )
