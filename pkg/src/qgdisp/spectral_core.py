"""Periodic grid, spectral transforms and Fourier multipliers.

Coefficient convention: a field ``f`` sampled on the ``n x n`` grid of the box
``[0, L)^2`` is stored through its Fourier-series coefficients
``c(k) = fft2(f)(k) / n**2`` on the integer lattice ``k in [-n/2, n/2)^2``,
with physical frequency ``xi = 2*pi*k / L``.  With this choice

    integral |f|^2 dx = (L/n)^2 * sum |f_j|^2 = L^2 * sum |c(k)|^2,

which is the Parseval identity used by every norm in the package.  Array axis 0
is the ``x1`` direction and axis 1 is ``x2``.

Odd symbols (Riesz, Hilbert, the dispersive phase) vanish at ``xi = 0`` and on
the Nyquist row or column of the relevant axis.  That row has no distinct
conjugate partner, so zeroing it keeps every multiplier conjugate-symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, DataError

__all__ = [
    "Grid",
    "SpectralField",
    "FractionalLaplacian",
    "Riesz",
    "Hilbert1D",
    "BandCutoff",
    "BallProjection",
    "DispersivePhase",
    "LinearPropagator",
    "Symbol",
    "smooth_cutoff",
    "grid_create",
    "apply_symbol",
    "perp_velocity",
    "dealias",
    "inner_product",
    "padded_physical",
    "dealiased_product",
    "random_field",
]


def _transition(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s, dtype=float)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_cutoff(x: np.ndarray | float) -> np.ndarray:
    """C-infinity cutoff: 1 for ``|x| <= 1``, 0 for ``|x| >= 2``.

    Built from ``h(s) = exp(-1/s)`` as ``h(2-|x|) / (h(2-|x|) + h(|x|-1))``,
    which is smooth at both ends of the transition.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    a = _transition(2.0 - ax)
    b = _transition(ax - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n`` points per axis on a box of side ``box_length``."""

    n: int
    box_length: float = 32.0 * math.pi

    def __post_init__(self) -> None:
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise ConfigurationError(f"grid size must be an integer, got {n!r}")
        if n < 8 or n & (n - 1):
            raise ConfigurationError(f"grid size must be a power of two >= 8, got {n}")
        if not (math.isfinite(self.box_length) and self.box_length > 0):
            raise ConfigurationError(f"box length must be positive, got {self.box_length}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def dk(self) -> float:
        """Spacing of the frequency lattice, ``2*pi/L``."""
        return 2.0 * math.pi / self.box_length

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers per axis in FFT order, covering ``[-n/2, n/2)``."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.wavenumbers[:, None], self.shape)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.wavenumbers[None, :], self.shape)

    @cached_property
    def xi1(self) -> np.ndarray:
        return self.dk * self.k1

    @cached_property
    def xi2(self) -> np.ndarray:
        return self.dk * self.k2

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.hypot(self.xi1, self.xi2)

    @cached_property
    def xi1_odd(self) -> np.ndarray:
        """``xi1`` with the unpaired Nyquist row set to zero."""
        return np.where(self.k1 == -self.n // 2, 0.0, self.xi1)

    @cached_property
    def xi2_odd(self) -> np.ndarray:
        return np.where(self.k2 == -self.n // 2, 0.0, self.xi2)

    @cached_property
    def phase_a(self) -> np.ndarray:
        """Dispersive phase ``xi1/|xi|``; zero at the origin and on the Nyquist row."""
        out = np.zeros(self.shape)
        nz = self.xi_abs > 0
        out[nz] = self.xi1_odd[nz] / self.xi_abs[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask of modes kept by the 2/3 rule."""
        lim = self.n / 3.0
        return (np.abs(self.k1) <= lim) & (np.abs(self.k2) <= lim)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.dx * np.arange(self.n)
        return np.meshgrid(x, x, indexing="ij")

    @property
    def min_nonzero_xi(self) -> float:
        return self.dk

    @property
    def max_xi(self) -> float:
        return float(self.xi_abs.max())


def grid_create(n: int, box_length: float) -> Grid:
    return Grid(n=n, box_length=box_length)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real scalar field stored as conjugate-symmetric Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise DataError(f"coefficient array has shape {c.shape}, expected {self.grid.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_physical(cls, grid: Grid, samples: np.ndarray) -> "SpectralField":
        f = np.asarray(samples)
        if f.shape != grid.shape:
            raise DataError(f"samples have shape {f.shape}, expected {grid.shape}")
        if np.iscomplexobj(f):
            if np.any(f.imag != 0):
                raise DataError("samples must be real-valued")
            f = f.real
        f = f.astype(float)
        if not np.all(np.isfinite(f)):
            raise DataError("samples contain NaN or Inf")
        return cls(grid, sfft.fft2(f) / grid.n**2)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    def to_physical(self) -> np.ndarray:
        return (sfft.ifft2(self.coeffs) * self.grid.n**2).real

    def imag_residual(self) -> float:
        """Largest imaginary part of the inverse transform (zero for a real field)."""
        return float(np.abs((sfft.ifft2(self.coeffs) * self.grid.n**2).imag).max())

    def conjugate_symmetry_defect(self) -> float:
        c = self.coeffs
        mirrored = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
        return float(np.abs(c - mirrored.conj()).max())

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def norm_sq(self) -> float:
        """Squared L2 norm over the box."""
        return float(self.grid.box_length**2 * np.sum(np.abs(self.coeffs) ** 2))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def sobolev_norm_sq(self, s: float, homogeneous: bool = False) -> float:
        """Weighted Parseval sum with ``(1+|xi|^2)^s`` or ``|xi|^(2s)``."""
        xi = self.grid.xi_abs
        if homogeneous:
            w = np.zeros_like(xi)
            nz = xi > 0
            w[nz] = xi[nz] ** (2 * s)
        else:
            w = (1.0 + xi**2) ** s
        return float(self.grid.box_length**2 * np.sum(w * np.abs(self.coeffs) ** 2))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


def _same_grid(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid:
        raise DataError("fields live on different grids")


def inner_product(f: SpectralField, g: SpectralField) -> float:
    """Real L2 inner product over the box."""
    _same_grid(f, g)
    return float(f.grid.box_length**2 * np.sum((f.coeffs.conj() * g.coeffs).real))


# --- symbols -----------------------------------------------------------------


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigurationError(msg)


@dataclass(frozen=True)
class FractionalLaplacian:
    alpha: float

    def __post_init__(self) -> None:
        _check(0 < self.alpha <= 2, f"alpha must lie in (0, 2], got {self.alpha}")

    def multiplier(self, grid: Grid) -> np.ndarray:
        return grid.xi_abs**self.alpha


@dataclass(frozen=True)
class Riesz:
    """``R_j`` with symbol ``-i xi_j/|xi|``; ``axis`` is 1 or 2."""

    axis: int

    def __post_init__(self) -> None:
        _check(self.axis in (1, 2), f"Riesz axis must be 1 or 2, got {self.axis}")

    def multiplier(self, grid: Grid) -> np.ndarray:
        xi = grid.xi1_odd if self.axis == 1 else grid.xi2_odd
        out = np.zeros(grid.shape, dtype=np.complex128)
        nz = grid.xi_abs > 0
        out[nz] = -1j * xi[nz] / grid.xi_abs[nz]
        return out


@dataclass(frozen=True)
class Hilbert1D:
    """One-dimensional Hilbert transform ``-i sgn(xi_axis)`` acting along ``axis``."""

    axis: int

    def __post_init__(self) -> None:
        _check(self.axis in (1, 2), f"Hilbert axis must be 1 or 2, got {self.axis}")

    def multiplier(self, grid: Grid) -> np.ndarray:
        xi = grid.xi1_odd if self.axis == 1 else grid.xi2_odd
        return -1j * np.sign(xi)


@dataclass(frozen=True)
class BandCutoff:
    """``chi(|D|/R) (1 - chi(|D1|/r))``: keeps ``|xi| <~ R`` and removes ``|xi1| <~ r``."""

    r: float
    R: float

    def __post_init__(self) -> None:
        _check(0 < self.r < self.R, f"band requires 0 < r < R, got r={self.r}, R={self.R}")

    def multiplier(self, grid: Grid) -> np.ndarray:
        return smooth_cutoff(grid.xi_abs / self.R) * (1.0 - smooth_cutoff(grid.xi1 / self.r))


@dataclass(frozen=True)
class BallProjection:
    """Sharp projection onto ``|xi| <= k`` (Friedrichs truncation)."""

    k: float

    def __post_init__(self) -> None:
        _check(self.k > 0, f"ball radius must be positive, got {self.k}")

    def multiplier(self, grid: Grid) -> np.ndarray:
        return (grid.xi_abs <= self.k).astype(float)


_TWO_PI_LONG = 2 * np.arccos(np.longdouble(-1))


def _unit_phase(A: float, t: float, a: np.ndarray) -> np.ndarray:
    # phases reach A t ~ 1e5; reducing in extended precision keeps exp(iAs)exp(iAt) = exp(iA(s+t)) to ~1e-16
    theta = np.longdouble(A) * np.longdouble(t) * a.astype(np.longdouble)
    return np.exp(1j * np.fmod(theta, _TWO_PI_LONG).astype(float))


@dataclass(frozen=True)
class DispersivePhase:
    """``exp(i A t xi1/|xi|)``."""

    A: float
    t: float

    def __post_init__(self) -> None:
        _check(self.A >= 0 and self.t >= 0, "dispersive phase needs A >= 0 and t >= 0")

    def multiplier(self, grid: Grid) -> np.ndarray:
        return _unit_phase(self.A, self.t, grid.phase_a)


@dataclass(frozen=True)
class LinearPropagator:
    """``exp(i A t xi1/|xi| - nu t |xi|^alpha)``."""

    A: float
    nu: float
    alpha: float
    t: float

    def __post_init__(self) -> None:
        _check(self.A >= 0 and self.nu >= 0 and self.t >= 0, "propagator needs A, nu, t >= 0")
        _check(0 < self.alpha <= 2, f"alpha must lie in (0, 2], got {self.alpha}")

    def multiplier(self, grid: Grid) -> np.ndarray:
        return _unit_phase(self.A, self.t, grid.phase_a) * np.exp(-self.nu * self.t * grid.xi_abs**self.alpha)


Symbol = Union[
    FractionalLaplacian,
    Riesz,
    Hilbert1D,
    BandCutoff,
    BallProjection,
    DispersivePhase,
    LinearPropagator,
]


def apply_symbol(f: SpectralField, s: Symbol) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * s.multiplier(f.grid))


def perp_velocity(theta: SpectralField) -> tuple[SpectralField, SpectralField]:
    """``u = (-R2 theta, R1 theta)``."""
    g = theta.grid
    u1 = -theta.coeffs * Riesz(2).multiplier(g)
    u2 = theta.coeffs * Riesz(1).multiplier(g)
    return SpectralField(g, u1), SpectralField(g, u2)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def padded_physical(f: SpectralField, factor: int = 2) -> np.ndarray:
    """Samples of the trigonometric interpolant on a grid refined by ``factor``.

    The Nyquist row and column are split evenly between ``+n/2`` and ``-n/2`` so
    the interpolant stays real.
    """
    n = f.grid.n
    m = n * factor
    c = f.coeffs
    big = np.zeros((m, m), dtype=np.complex128)
    h = n // 2
    idx = np.r_[0:h, m - h : m]
    src = np.r_[0:h, n - h : n]
    big[np.ix_(idx, idx)] = c[np.ix_(src, src)]
    # c(-n/2, k2) = conj c(-n/2, -k2), so copying half of it to +n/2 keeps symmetry
    big[m - h, :] *= 0.5
    big[h, :] = big[m - h, :]
    big[:, m - h] *= 0.5
    big[:, h] = big[:, m - h]
    return (sfft.ifft2(big) * m * m).real


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product of the 2/3-truncated fields, truncated again.

    For inputs supported in ``max|k| <= n/3`` the result equals the exact
    Galerkin truncation of the convolution.
    """
    _same_grid(f, g)
    a = dealias(f).to_physical()
    b = dealias(g).to_physical()
    return dealias(SpectralField.from_physical(f.grid, a * b))


def random_field(
    grid: Grid,
    seed: int,
    gamma: float = 2.0,
    band: tuple[float, float] | None = None,
    dealiased: bool = True,
) -> SpectralField:
    """Seeded real random field with spectral envelope ``|xi|^-gamma``.

    White noise is transformed and shaped, so conjugate symmetry holds by
    construction.  ``band = (lo, hi)`` restricts the support to ``lo <= |xi| <= hi``.
    The mean and the Nyquist lines are removed.
    """
    rng = np.random.default_rng(seed)
    noise = SpectralField.from_physical(grid, rng.standard_normal(grid.shape))
    xi = grid.xi_abs
    env = np.zeros_like(xi)
    nz = xi > 0
    env[nz] = xi[nz] ** (-gamma)
    if band is not None:
        lo, hi = band
        env[(xi < lo) | (xi > hi)] = 0.0
    nyq = -grid.n // 2
    env[(grid.k1 == nyq) | (grid.k2 == nyq)] = 0.0
    if dealiased:
        env[~grid.dealias_mask] = 0.0
    return SpectralField(grid, noise.coeffs * env)
