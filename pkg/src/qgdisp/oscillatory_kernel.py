"""Oscillatory kernel of the dispersive semigroup and related integrals.

The kernel is

    K(t, mu, z) = int Psi(xi) exp(i mu xi1/|xi| + i z.xi - nu t |xi|^alpha) dxi,
    Psi(xi)     = chi(|xi|/R) (1 - chi(2|xi1|/r)),

with ``chi`` the smooth cutoff of :mod:`qgdisp.spectral_core`.

Three evaluation routes are used.

*Polar trapezoid.*  The amplitude vanishes to all orders at ``rho = r/2`` and
``rho = 2R`` and is periodic in the angle, so the trapezoid rule in both polar
variables converges spectrally.  Its half-step subsets give the error estimate.

*Bessel route.*  In polar coordinates ``xi = rho (cos w, sin w)`` the amplitude
depends on ``w`` only through ``|cos w|``, so it has a cosine series in ``2w``.
The phase is ``M cos(w - b)`` with ``M e^{ib} = mu + rho (z1 + i z2)``, and each
angular harmonic integrates to a Bessel function:

    K = 2 pi int sum_m w_m(rho) (-1)^m J_{2m}(M(rho)) cos(2 m b(rho)) drho.

At ``z = 0`` the radial integral collapses onto the coefficients and the cost
is a few thousand Bessel values for every ``mu``.

*Integration by parts.*  For large ``|z|`` and no stationary points the value
is far below the tolerance.  With ``L = grad(Phi).grad / (i |grad Phi|^2)``,
``|K| <= int |(L^T)^N amp|`` for every ``N``; that integral has no oscillation
and is evaluated on a Cartesian grid.  The route returns ``0`` with this bound.

Accuracy is measured against the envelope mass
``int Psi exp(-nu t |xi|^alpha)``, which bounds ``|K|`` for every ``mu`` and ``z``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from numpy.polynomial.legendre import leggauss
from scipy.special import jv

from .errors import AccuracyError, ConfigurationError, FitError
from .spectral_core import smooth_cutoff

__all__ = [
    "KernelParams",
    "KernelEstimate",
    "DecayFit",
    "ZSampling",
    "SupSample",
    "NODE_BUDGET",
    "envelope_mass",
    "kernel_estimate",
    "eval_kernel_K",
    "sweep_kernel_sup",
    "eval_htilde",
    "eval_h_aniso",
    "fit_decay",
    "kernel_csv",
    "fit_csv",
]

NODE_BUDGET = 2**26
_ORDER = 20


@dataclass(frozen=True)
class KernelParams:
    t: float
    mu: float
    z: tuple[float, float] = (0.0, 0.0)
    r: float = 1.0
    R: float = 4.0
    alpha: float = 0.5
    nu: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", (float(self.z[0]), float(self.z[1])))
        if not (self.t >= 0 and self.mu >= 0 and self.nu >= 0):
            raise ConfigurationError(f"need t >= 0, mu >= 0, nu >= 0; got t={self.t}, mu={self.mu}, nu={self.nu}")
        if not 0 < self.r < self.R:
            raise ConfigurationError(f"band requires 0 < r < R, got r={self.r}, R={self.R}")
        if not 0 < self.alpha <= 2:
            raise ConfigurationError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not all(math.isfinite(c) for c in (*self.z, self.t, self.mu)):
            raise ConfigurationError("kernel parameters must be finite")

    def replace(self, **changes) -> "KernelParams":
        values = {k: getattr(self, k) for k in ("t", "mu", "z", "r", "R", "alpha", "nu")}
        values.update(changes)
        return KernelParams(**values)


@dataclass(frozen=True)
class KernelEstimate:
    params: KernelParams
    value: complex
    error: float
    method: str
    evaluations: int


def _check_tol(tol: float) -> None:
    if not 1e-10 <= tol <= 1e-3:
        raise ConfigurationError(f"tol must lie in [1e-10, 1e-3], got {tol}")


def _gauss_panels(a: float, b: float, panels: int, order: int = _ORDER) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _radial_weight(p: KernelParams, rho: np.ndarray) -> np.ndarray:
    # polar Jacobian included
    return smooth_cutoff(rho / p.R) * np.exp(-p.nu * p.t * rho**p.alpha) * rho


def _angular_coefficients(p: KernelParams, rho: np.ndarray, n_angle: int) -> np.ndarray:
    """Coefficients ``w_m(rho)`` of the amplitude in ``cos(2 m w)``, ``m < n_angle/2``."""
    w = np.pi * np.arange(n_angle) / n_angle
    inner = 1.0 - smooth_cutoff(2.0 * rho[:, None] * np.abs(np.cos(w))[None, :] / p.r)
    c = sfft.rfft(_radial_weight(p, rho)[:, None] * inner, axis=1).real / n_angle
    c[:, 1:] *= 2.0
    return c[:, : n_angle // 2]


def _radial_nodes(p: KernelParams, count: int) -> tuple[np.ndarray, float]:
    # the amplitude vanishes to all orders at both ends, so the trapezoid rule is spectral
    h = (2 * p.R - p.r / 2) / count
    return p.r / 2 + h * np.arange(1, count), h


def _harmonic_count(p: KernelParams, rho: np.ndarray, h: float, budget: float) -> tuple[np.ndarray, float]:
    """Angular coefficients truncated where the dropped tail is ``<= budget``."""
    n_angle = 1024
    while True:
        c = _angular_coefficients(p, rho, n_angle)
        col = 2 * np.pi * h * np.abs(c).sum(axis=0)
        tail = np.cumsum(col[::-1])[::-1]
        if tail[n_angle // 4] <= budget or n_angle >= 2**15:
            cut = int(np.searchsorted(-tail, -budget))
            dropped = float(tail[cut]) if cut < tail.size else 0.0
            return c[:, : max(cut, 1)], dropped
        n_angle *= 2


def _bessel_sum(p: KernelParams, count: int, tail_budget: float) -> tuple[complex, complex, float, int]:
    rho, h = _radial_nodes(p, count)
    coeffs, dropped = _harmonic_count(p, rho, h, tail_budget)
    m = coeffs.shape[1]
    orders = 2 * np.arange(m)
    sign = (-1.0) ** np.arange(m)
    if p.z == (0.0, 0.0):
        radial = coeffs.sum(axis=0)
        coarse = coeffs[1::2].sum(axis=0)
        bes = sign * jv(orders, p.mu)
        return 2 * np.pi * h * complex(radial @ bes), 4 * np.pi * h * complex(coarse @ bes), dropped, rho.size + m
    centre = p.mu + rho * complex(*p.z)
    terms = np.empty(rho.size)
    chunk = max(1, 1_000_000 // m)
    for s in range(0, rho.size, chunk):
        sl = slice(s, s + chunk)
        arg = np.abs(centre[sl])[:, None]
        terms[sl] = np.sum(coeffs[sl] * sign * jv(orders[None, :], arg) * np.cos(orders[None, :] * np.angle(centre[sl])[:, None]), axis=1)
    return 2 * np.pi * h * complex(terms.sum()), 4 * np.pi * h * complex(terms[1::2].sum()), dropped, rho.size * m


def _bessel_route(p: KernelParams, tol: float, mass: float) -> KernelEstimate:
    count = _radial_start(p)
    used = 0
    while True:
        val, coarse, dropped, cost = _bessel_sum(p, count, tol * mass / 4)
        used += cost
        err = abs(val - coarse) + dropped
        if err <= tol * mass:
            return KernelEstimate(p, val, err, "bessel", used)
        if used > NODE_BUDGET or count >= 2**16:
            raise AccuracyError(f"kernel series did not converge within {NODE_BUDGET} evaluations", val, err)
        count *= 2


def _radial_start(p: KernelParams) -> int:
    # the amplitude spectrum in rho is below 1e-12 of its peak beyond ~300
    need = (2 * p.R - p.r / 2) * (math.hypot(*p.z) + 300.0) / (2 * np.pi)
    return 1 << max(6, math.ceil(math.log2(need)))


def _angle_start(p: KernelParams) -> int:
    need = p.mu + 2 * p.R * math.hypot(*p.z) + 2048
    return 1 << math.ceil(math.log2(need))


def _trapezoid_sums(p: KernelParams, count: int, n_angle: int) -> tuple[complex, complex, complex]:
    rho, h = _radial_nodes(p, count)
    w = 2 * np.pi * np.arange(n_angle) / n_angle
    cw, sw = np.cos(w), np.sin(w)
    acw = np.abs(cw)
    weight = _radial_weight(p, rho)
    rows = np.empty(rho.size, dtype=complex)
    rows_half = np.empty(rho.size, dtype=complex)
    chunk = max(1, 4_000_000 // n_angle)
    for s in range(0, rho.size, chunk):
        r_ = rho[s : s + chunk, None]
        amp = weight[s : s + chunk, None] * (1.0 - smooth_cutoff(2.0 * r_ * acw / p.r))
        vals = amp * np.exp(1j * (p.mu * cw + r_ * (p.z[0] * cw + p.z[1] * sw)))
        rows[s : s + chunk] = vals.sum(axis=1)
        rows_half[s : s + chunk] = vals[:, ::2].sum(axis=1)
    dw = 2 * np.pi / n_angle
    full = h * dw * rows.sum()
    coarse_radial = 2 * h * dw * rows[1::2].sum()
    coarse_angle = 2 * h * dw * rows_half.sum()
    return complex(full), complex(coarse_radial), complex(coarse_angle)


def _trapezoid_route(p: KernelParams, tol: float, mass: float) -> KernelEstimate:
    count, n_angle = _radial_start(p), _angle_start(p)
    used = 0
    while True:
        val, c_rad, c_ang = _trapezoid_sums(p, count, n_angle)
        used += count * n_angle
        e_rad, e_ang = abs(val - c_rad), abs(val - c_ang)
        if e_rad + e_ang <= tol * mass:
            return KernelEstimate(p, val, e_rad + e_ang, "polar-trapezoid", used)
        if e_rad > tol * mass / 2:
            count *= 2
        if e_ang > tol * mass / 2:
            n_angle *= 2
        if used + count * n_angle > NODE_BUDGET:
            raise AccuracyError(f"kernel quadrature exceeded {NODE_BUDGET} evaluations", val, e_rad + e_ang)


@lru_cache(maxsize=64)
def _mass(t: float, r: float, R: float, alpha: float, nu: float) -> float:
    p = KernelParams(t, 0.0, (0.0, 0.0), r, R, alpha, nu)
    rho, wts = _gauss_panels(r / 2, 2 * R, 256)
    return float(2 * np.pi * np.dot(wts, _angular_coefficients(p, rho, 4096)[:, 0]))


def envelope_mass(p: KernelParams) -> float:
    """``int Psi exp(-nu t |xi|^alpha) dxi``; bounds ``|K|`` for all ``mu`` and ``z``."""
    return _mass(p.t, p.r, p.R, p.alpha, p.nu)


def _ibp_bound(p: KernelParams, max_order: int = 6, n: int = 1024) -> tuple[float, int]:
    half = 2.5 * p.R
    h = 2 * half / n
    x = -half + h * np.arange(n)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    rho = np.hypot(x1, x2)
    amp = smooth_cutoff(rho / p.R) * (1 - smooth_cutoff(2 * np.abs(x1) / p.r)) * np.exp(-p.nu * p.t * rho**p.alpha)
    inside = np.abs(x1) >= p.r / 4
    rs = np.where(inside, rho, 1.0)
    g1 = p.mu * x2**2 / rs**3 + p.z[0]
    g2 = -p.mu * x1 * x2 / rs**3 + p.z[1]
    g = g1 * g1 + g2 * g2
    ok = inside & (g > 0)
    v1 = np.where(ok, g1 / np.where(ok, g, 1.0), 0.0)
    v2 = np.where(ok, g2 / np.where(ok, g, 1.0), 0.0)
    k = 2 * np.pi * sfft.fftfreq(n, h)
    k1, k2 = k[:, None], k[None, :]
    f = amp.astype(complex)
    best = float(np.abs(f).sum() * h * h)
    for _ in range(max_order):
        f = 1j * sfft.ifft2(1j * k1 * sfft.fft2(f * v1) + 1j * k2 * sfft.fft2(f * v2))
        best = min(best, float(np.abs(f).sum() * h * h))
    return best, n * n * max_order


def kernel_estimate(p: KernelParams, tol: float = 1e-8) -> KernelEstimate:
    """Value of ``K`` with an absolute error bound ``<= tol * envelope_mass(p)``."""
    _check_tol(tol)
    mass = envelope_mass(p)
    if p.z == (0.0, 0.0):
        return _bessel_route(p, tol, mass)
    trapezoid = _radial_start(p) * _angle_start(p)
    # a Bessel value costs roughly a hundred complex exponentials
    bessel = 100 * _radial_start(p) * 2048
    if min(trapezoid, bessel) * 5 <= NODE_BUDGET:
        if trapezoid <= bessel:
            return _trapezoid_route(p, tol, mass)
        return _bessel_route(p, tol, mass)
    bound, used = _ibp_bound(p)
    if bound <= tol * mass:
        return KernelEstimate(p, 0j, bound, "ibp-bound", used)
    raise AccuracyError(
        f"kernel at |z|={math.hypot(*p.z):.3g} needs more than {NODE_BUDGET} evaluations "
        f"and the integration-by-parts bound {bound:.3g} exceeds the tolerance",
        0j,
        bound,
    )


def eval_kernel_K(p: KernelParams, tol: float = 1e-8) -> complex:
    return kernel_estimate(p, tol).value


@dataclass(frozen=True)
class ZSampling:
    """Offsets ``z = ratio * mu * (cos phi, sin phi)``."""

    ratios: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0, 2.0)
    angles: tuple[float, ...] = tuple(k * math.pi / 8 for k in range(5))

    def offsets(self, mu: float) -> list[tuple[float, float]]:
        out: list[tuple[float, float]] = []
        for lam in self.ratios:
            for phi in self.angles if lam > 0 else (0.0,):
                out.append((lam * mu * math.cos(phi), lam * mu * math.sin(phi)))
        return out


@dataclass
class SupSample:
    mu: float
    sup_abs: float
    argmax: tuple[float, float]
    max_error: float
    estimates: list[KernelEstimate] = field(default_factory=list)
    failures: list[tuple[tuple[float, float], str]] = field(default_factory=list)


def sweep_kernel_sup(
    p_base: KernelParams,
    mu_ladder: list[float],
    z_samples: ZSampling | None = None,
    tol: float = 1e-6,
) -> list[SupSample]:
    """``max |K|`` over the z sample set for each ``mu``; accuracy errors are recorded, not raised."""
    z_samples = z_samples or ZSampling()
    out = []
    for mu in mu_ladder:
        ests, fails = [], []
        for z in z_samples.offsets(mu):
            try:
                ests.append(kernel_estimate(p_base.replace(mu=mu, z=z), tol))
            except AccuracyError as exc:
                fails.append((z, str(exc)))
                ests.append(KernelEstimate(p_base.replace(mu=mu, z=z), exc.best_estimate, exc.error_bound, "failed", 0))
        top = max(ests, key=lambda e: abs(e.value))
        out.append(SupSample(mu, abs(top.value), top.params.z, max(e.error for e in ests), ests, fails))
    return out


def _atan_diff(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # arctan(u) - arctan(v) without cancellation when u and v are close
    uv = u * v
    safe = uv > -1
    den = np.where(safe, 1 + uv, 1.0)
    return np.where(safe, np.arctan((u - v) / den), np.arctan(u) - np.arctan(v))


def _htilde_inner(xi2: np.ndarray, mu: float, phi: float, r: float, R: float) -> np.ndarray:
    lo, hi = r / 2, 2 * R
    c, s = math.cos(phi), math.sin(phi)
    k = mu * xi2**2 / (8 * R**3)
    if abs(c) < 1e-15:
        return (hi - lo) / (1 + k * xi2**2)
    sk = np.sqrt(k)
    small = sk * abs(c) * (hi - lo) < 1e-8
    sk_safe = np.where(small, 1.0, sk)
    exact = _atan_diff(sk_safe * (hi * c - xi2 * s), sk_safe * (lo * c - xi2 * s)) / (sk_safe * c)
    return np.where(small, hi - lo, exact)


def _graded_panels(top: float, points: list[float], scale: float, per_decade: int) -> np.ndarray:
    """Breakpoints on ``[0, top]`` refined geometrically towards each of ``points``."""
    scale = min(scale, top)
    geo = scale * np.logspace(-12, 0, 12 * per_decade + 1)
    parts = [np.linspace(0.0, top, 4 * per_decade + 1)]
    for p in points:
        parts += [p - geo, p + geo]
    edges = np.concatenate(parts)
    return np.unique(edges[(edges >= 0) & (edges <= top)])


def eval_htilde(mu: float, phi: float, r: float = 1.0, R: float = 4.0, tol: float = 1e-10) -> float:
    """``int_0^{2R} int_{r/2}^{2R} [1 + mu xi2^2 (xi1 cos phi - xi2 sin phi)^2/(8R^3)]^{-1} dxi1 dxi2``.

    The inner integral is done in closed form; the outer one with Gauss panels
    graded towards ``xi2 = 0``, where the integrand concentrates as ``mu`` grows.
    """
    _check_tol(tol)
    if not 0 <= phi <= math.pi / 2 + 1e-15:
        raise ConfigurationError(f"phi must lie in [0, pi/2], got {phi}")
    if mu < 0 or not 0 < r < R:
        raise ConfigurationError("need mu >= 0 and 0 < r < R")
    if mu == 0:
        return 2 * R * (2 * R - r / 2)
    x, w = leggauss(_ORDER)
    scale = min(2 * R, (8 * R**3 / mu) ** 0.25 * 4)
    # the integrand concentrates at xi2 = 0 and where the line xi1 cos = xi2 sin leaves the strip
    points = [0.0]
    if phi > 0:
        points += [r / 2 / math.tan(phi), 2 * R / math.tan(phi)]
    prev = None
    for per_decade in (2, 4, 8, 16, 32):
        edges = _graded_panels(2 * R, points, scale, per_decade)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes = (mid[:, None] + half[:, None] * x).ravel()
        val = float(np.dot((half[:, None] * w).ravel(), _htilde_inner(nodes, mu, phi, r, R)))
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return val
        prev = val
    raise AccuracyError("case integral did not converge", prev, abs(val - prev))


def eval_h_aniso(t: float, mu: float, z2: float, xi1: float, params: KernelParams | None = None, tol: float = 1e-8) -> complex:
    """``int Psi(xi) exp(i mu xi1/|xi| + i z2 xi2 - nu t |xi|^alpha) dxi2`` at fixed ``xi1``.

    Exploratory: no decay law is known for this integral.  Only ``r``, ``R``,
    ``alpha`` and ``nu`` are read from ``params``.
    """
    _check_tol(tol)
    p = params or KernelParams(t, mu)
    if not p.r / 2 <= abs(xi1) <= 2 * p.R:
        raise ConfigurationError(f"|xi1| must lie in [r/2, 2R] = [{p.r / 2}, {2 * p.R}], got {xi1}")
    if t < 0 or mu < 0:
        raise ConfigurationError("need t >= 0 and mu >= 0")
    top = math.sqrt(max(4 * p.R**2 - xi1**2, 0.0))
    if top == 0.0:
        return 0j
    side = 1.0 - float(smooth_cutoff(2 * abs(xi1) / p.r))

    def level(panels: int) -> complex:
        xi2, wts = _gauss_panels(-top, top, panels)
        mod = np.hypot(xi1, xi2)
        amp = smooth_cutoff(mod / p.R) * side * np.exp(-p.nu * t * mod**p.alpha)
        return complex(np.dot(wts, amp * np.exp(1j * (mu * xi1 / mod + z2 * xi2))))

    # the phase varies by at most mu |a| range + |z2| * 2 top over the line
    panels = 16 + math.ceil((2 * mu + 2 * top * abs(z2)) / 8.0)
    scale = 2 * np.pi * p.R * top
    prev = level(panels)
    while panels * _ORDER <= NODE_BUDGET:
        panels *= 2
        val = level(panels)
        if abs(val - prev) <= tol * scale:
            return val
        prev = val
    raise AccuracyError("anisotropic kernel quadrature exceeded its budget", prev, abs(val - prev))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    residual: float
    sample_range: tuple[float, float]
    n_samples: int

    def predict(self, x: float) -> float:
        return math.exp(self.intercept) * x**self.slope


def fit_decay(samples: list[tuple[float, float]], min_decades: float = 2.0) -> DecayFit:
    """Least-squares fit of ``log y = intercept + slope log x``."""
    if len(samples) < 4:
        raise FitError(f"need at least 4 samples, got {len(samples)}")
    x = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise FitError("fit samples must be positive and finite")
    if math.log10(x.max() / x.min()) < min_decades - 1e-12:
        raise FitError(f"samples span {math.log10(x.max() / x.min()):.2f} decades, need {min_decades}")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    res = ly - design @ np.array([slope, intercept])
    return DecayFit(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))), (float(x.min()), float(x.max())), len(samples))


def kernel_csv(estimates: list[KernelEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mu", "z1", "z2", "re_K", "im_K", "abs_K", "est_err"])
    for e in estimates:
        p = e.params
        w.writerow([repr(p.t), repr(p.mu), repr(p.z[0]), repr(p.z[1]), repr(e.value.real), repr(e.value.imag), repr(abs(e.value)), repr(e.error)])
    return buf.getvalue()


def fit_csv(fits: dict[str, DecayFit]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sweep_id", "slope", "intercept", "residual", "range_lo", "range_hi"])
    for name, f in fits.items():
        w.writerow([name, repr(f.slope), repr(f.intercept), repr(f.residual), repr(f.sample_range[0]), repr(f.sample_range[1])])
    return buf.getvalue()
