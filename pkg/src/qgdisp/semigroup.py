"""Linear dispersive-dissipative semigroup and space-time norms of its orbits."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError
from .littlewood_paley import lp_norm
from .oscillatory_kernel import DecayFit, fit_decay
from .spectral_core import BandCutoff, Grid, LinearPropagator, SpectralField, apply_symbol, padded_physical

__all__ = [
    "Trajectory",
    "MixedNormSpec",
    "MixedNormValue",
    "StrichartzRow",
    "StrichartzReport",
    "propagate",
    "propagate_trajectory",
    "default_times",
    "snapshot_norm",
    "time_norm",
    "mixed_norm",
    "band_limited_packet",
    "check_band_support",
    "strichartz_exponent",
    "strichartz_sweep",
]


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    fields: list[SpectralField]

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size == 0 or self.times.size != len(self.fields):
            raise DataError("a trajectory needs one field per sample time and at least one time")
        if np.any(np.diff(self.times) <= 0):
            raise DataError("trajectory times must be strictly increasing")
        if any(f.grid != self.grid for f in self.fields):
            raise DataError("all trajectory fields must share the grid")


@dataclass(frozen=True)
class MixedNormSpec:
    p: float
    q: float
    T: float

    def __post_init__(self) -> None:
        if not 1 <= self.p <= math.inf:
            raise ConfigurationError(f"time exponent p must lie in [1, inf], got {self.p}")
        if not 2 <= self.q <= math.inf:
            raise ConfigurationError(f"space exponent q must lie in [2, inf], got {self.q}")
        if not self.T > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.T}")


@dataclass(frozen=True)
class MixedNormValue:
    value: float
    refinement_change: float
    warning: str | None = None


def propagate(g: SpectralField, t: float, A: float, nu: float, alpha: float) -> SpectralField:
    """Exact solution at time ``t`` of the linear equation started from ``g``."""
    if t < 0:
        raise ConfigurationError(f"propagation time must be nonnegative, got {t}")
    return apply_symbol(g, LinearPropagator(A, nu, alpha, t))


def propagate_trajectory(g: SpectralField, times, A: float, nu: float, alpha: float) -> Trajectory:
    times = np.asarray(times, dtype=float)
    return Trajectory(g.grid, times, [propagate(g, float(t), A, nu, alpha) for t in times])


def default_times(T: float, samples: int = 512) -> np.ndarray:
    """Half geometric (dense near 0, where dispersion acts first), half linear."""
    geo = np.geomspace(T * 1e-6, T, samples // 2)
    lin = np.linspace(0.0, T, samples - samples // 2)
    return np.unique(np.concatenate(([0.0], geo, lin)))


def snapshot_norm(f: SpectralField, q: float) -> float:
    """``L^q`` norm on the twice refined grid; the refinement sharpens the maximum for ``q = inf``."""
    samples = padded_physical(f, 2)
    cell = (f.grid.dx / 2) ** 2
    return lp_norm(samples, q, cell)


def _trapezoid_p(times: np.ndarray, values: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(values.max())
    if times.size == 1:
        return 0.0
    return float(np.trapezoid(values**p, times) ** (1.0 / p))


def time_norm(times: np.ndarray, values: np.ndarray, p: float) -> MixedNormValue:
    """``L^p`` in time by the trapezoid rule, with a halved-sampling refinement check."""
    fine = _trapezoid_p(times, values, p)
    idx = np.unique(np.concatenate((np.arange(0, times.size, 2), [times.size - 1])))
    coarse = _trapezoid_p(times[idx], values[idx], p)
    change = abs(fine - coarse) / fine if fine > 0 else 0.0
    msg = None
    if change >= 0.01:
        msg = f"halving the time sampling changes the norm by {100 * change:.2f}%"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return MixedNormValue(fine, change, msg)


def mixed_norm(traj: Trajectory, spec: MixedNormSpec) -> MixedNormValue:
    if traj.times[0] > 0 or traj.times[-1] < spec.T * (1 - 1e-12):
        raise ConfigurationError(f"trajectory covers [{traj.times[0]}, {traj.times[-1]}], not [0, {spec.T}]")
    keep = traj.times <= spec.T * (1 + 1e-12)
    values = np.array([snapshot_norm(f, spec.q) for f, k in zip(traj.fields, keep) if k])
    return time_norm(traj.times[keep], values, spec.p)


def band_limited_packet(grid: Grid, r: float = 1.0, R: float = 4.0, width: float = 1.0, centre: tuple[float, float] | None = None) -> SpectralField:
    """A Gaussian bump filtered into ``{|xi1| >= r, |xi| <= R}``, normalized in ``L^2``."""
    x1, x2 = grid.coords
    c = centre or (grid.box_length / 2, grid.box_length / 2)
    bump = SpectralField.from_physical(grid, np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2) / (2 * width**2)))
    g = apply_symbol(bump, BandCutoff(r, R / 2))
    return g * (1.0 / g.norm())


def check_band_support(g: SpectralField, r: float, R: float, rel: float = 1e-13) -> None:
    grid = g.grid
    outside = (np.abs(grid.xi1) < r) | (grid.xi_abs > R)
    peak = np.abs(g.coeffs).max()
    leak = np.abs(g.coeffs[outside]).max() if outside.any() else 0.0
    if peak == 0 or leak > rel * peak:
        raise ConfigurationError(f"field is not supported in |xi1| >= {r}, |xi| <= {R} (leak {leak:.3g} of peak {peak:.3g})")


def strichartz_exponent(p: float, q: float) -> float:
    """Predicted decay exponent ``-(1/(8p)) (1 - 2/q)`` of the bound in ``A``."""
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return -(inv_p / 8.0) * (1.0 - 2.0 * inv_q)


@dataclass(frozen=True)
class StrichartzRow:
    A: float
    p: float
    q: float
    T: float
    mixed_norm: float
    normalized_value: float
    refinement_change: float


@dataclass
class StrichartzReport:
    rows: list[StrichartzRow]
    fit: DecayFit
    predicted_exponent: float
    variation: float
    envelope_ok: bool
    warnings: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["A", "p", "q", "T", "mixed_norm", "normalized_value"])
        for r in self.rows:
            w.writerow([repr(r.A), repr(r.p), repr(r.q), repr(r.T), repr(r.mixed_norm), repr(r.normalized_value)])
        return buf.getvalue()


def strichartz_sweep(
    g: SpectralField,
    A_ladder: list[float],
    spec: MixedNormSpec,
    nu: float = 1.0,
    alpha: float = 0.5,
    band: tuple[float, float] = (1.0, 4.0),
    samples: int = 512,
) -> StrichartzReport:
    """Mixed norm of ``G^A(t) g`` for each ``A`` and a log-log fit against ``A``."""
    check_band_support(g, *band)
    if len(A_ladder) < 4 or min(A_ladder) <= 0:
        raise ConfigurationError("the amplitude ladder needs at least 4 positive values")
    times = default_times(spec.T, samples)
    expo = strichartz_exponent(spec.p, spec.q)
    rows, notes = [], []
    for A in A_ladder:
        values = np.array([snapshot_norm(propagate(g, float(t), A, nu, alpha), spec.q) for t in times])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = time_norm(times, values, spec.p)
        if res.warning:
            notes.append(f"A={A:g}: {res.warning}")
        rows.append(StrichartzRow(A, spec.p, spec.q, spec.T, res.value, res.value * A ** (-expo), res.refinement_change))
    fit = fit_decay([(r.A, r.mixed_norm) for r in rows])
    normalized = np.array([r.normalized_value for r in rows])
    c_emp = 3 * rows[int(np.argmin([r.A for r in rows]))].normalized_value
    envelope_ok = bool(np.all(normalized <= c_emp))
    return StrichartzReport(rows, fit, expo, float(normalized.max() / normalized.min()), envelope_ok, notes)
