"""Littlewood-Paley blocks, Besov norms and randomized audits of the block estimates.

The low-frequency profile ``zeta`` equals 1 on ``|xi| <= 3/4`` and vanishes for
``|xi| >= 4/3``.  The shell profile is ``psi(xi) = zeta(xi/2) - zeta(xi)``, so the
partition telescopes and reconstruction is exact up to roundoff.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import BlockRangeError, ConfigurationError
from .spectral_core import Grid, SpectralField, perp_velocity, random_field, smooth_cutoff

ZETA_INNER = 0.75
ZETA_OUTER = 4.0 / 3.0


def zeta(rho: np.ndarray | float) -> np.ndarray:
    """Radial low-frequency profile."""
    rho = np.abs(np.asarray(rho, dtype=float))
    return smooth_cutoff(1.0 + (rho - ZETA_INNER) / (ZETA_OUTER - ZETA_INNER))


def psi(rho: np.ndarray | float) -> np.ndarray:
    """Radial shell profile supported in ``3/4 <= |xi| <= 8/3``."""
    rho = np.asarray(rho, dtype=float)
    return zeta(rho / 2.0) - zeta(rho)


@lru_cache(maxsize=None)
def partition_constant(samples: int = 200_001) -> float:
    """``min over xi`` of the sum of squared partition functions (dense 1D scan).

    Bounds the equivalence ``c <= ||f||_{B^0_{2,2}}^2 / ||f||_2^2 <= 1``.
    """
    rho = np.linspace(1.0, 2.0, samples)
    total = np.zeros_like(rho)
    for j in range(-3, 4):
        total += psi(rho * 2.0**-j) ** 2
    low = np.linspace(0.0, 4.0, samples)
    inhom = zeta(low) ** 2
    for j in range(0, 5):
        inhom += psi(low * 2.0**-j) ** 2
    return float(min(total.min(), inhom.min()))


@dataclass(frozen=True)
class DyadicPartition:
    """Block index ranges resolvable on a grid."""

    grid: Grid

    @property
    def q_min(self) -> int:
        # largest q with zeta(2^-q xi) = 0 at every nonzero lattice frequency
        return math.floor(math.log2(self.grid.min_nonzero_xi / ZETA_OUTER))

    @property
    def q_max(self) -> int:
        # first q with zeta(2^-(q+1) xi) = 1 on the whole lattice
        return max(0, math.ceil(math.log2(self.grid.max_xi / ZETA_INNER)) - 1)

    def indices(self, homogeneous: bool) -> range:
        if homogeneous:
            return range(self.q_min, self.q_max + 1)
        return range(-1, self.q_max + 1)

    def multiplier(self, q: int, homogeneous: bool) -> np.ndarray:
        idx = self.indices(homogeneous)
        if q not in idx:
            kind = "homogeneous" if homogeneous else "inhomogeneous"
            raise BlockRangeError(f"{kind} block {q} outside resolvable range [{idx.start}, {idx.stop - 1}]")
        xi = self.grid.xi_abs
        if not homogeneous and q == -1:
            return zeta(xi)
        return psi(xi * 2.0**-q)


def dyadic_block(f: SpectralField, q: int, homogeneous: bool = False) -> SpectralField:
    """``Delta_q f`` (inhomogeneous, ``q >= -1``) or the homogeneous block."""
    m = DyadicPartition(f.grid).multiplier(q, homogeneous)
    return SpectralField(f.grid, f.coeffs * m)


def all_blocks(f: SpectralField, homogeneous: bool = False) -> dict[int, SpectralField]:
    part = DyadicPartition(f.grid)
    return {q: SpectralField(f.grid, f.coeffs * part.multiplier(q, homogeneous)) for q in part.indices(homogeneous)}


def lp_norm(samples: np.ndarray, p: float, cell_area: float) -> float:
    """Grid quadrature of the ``L^p`` norm; ``p = inf`` is the exact grid maximum."""
    a = np.abs(samples)
    if math.isinf(p):
        return float(a.max())
    return float((cell_area * np.sum(a**p)) ** (1.0 / p))


def field_lp_norm(f: SpectralField, p: float) -> float:
    if p == 2:
        return f.norm()
    return lp_norm(f.to_physical(), p, f.grid.dx**2)


@dataclass(frozen=True)
class BesovNormSpec:
    s: float
    p: float = 2.0
    r: float = 2.0
    homogeneous: bool = False

    def __post_init__(self) -> None:
        for name in ("p", "r"):
            v = getattr(self, name)
            if not (v >= 1):
                raise ConfigurationError(f"Besov exponent {name} must be in [1, inf], got {v}")
        if not math.isfinite(self.s):
            raise ConfigurationError("Besov regularity must be finite")


def _lr(values: np.ndarray, r: float) -> float:
    if values.size == 0:
        return 0.0
    if math.isinf(r):
        return float(values.max())
    return float(np.sum(values**r) ** (1.0 / r))


def besov_norm(f: SpectralField, spec: BesovNormSpec) -> float:
    """l^r over blocks of ``2^(qs) ||Delta_q f||_p``."""
    vals = []
    for q, block in all_blocks(f, spec.homogeneous).items():
        vals.append(2.0 ** (q * spec.s) * field_lp_norm(block, spec.p))
    return _lr(np.asarray(vals), spec.r)


# --- audits ------------------------------------------------------------------


@dataclass
class AuditRow:
    audit_name: str
    index: int
    params: str
    empirical_ratio: float
    ensemble_median: float
    ensemble_max: float

    def as_tuple(self) -> tuple:
        return (self.audit_name, self.index, self.params, self.empirical_ratio, self.ensemble_median, self.ensemble_max)


@dataclass
class AuditReport:
    name: str
    rows: list[AuditRow] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)
    member_constants: dict[str, list[float]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["audit_name", "index", "params", "empirical_ratio", "ensemble_median", "ensemble_max"])
        for row in self.rows:
            w.writerow([row.audit_name, row.index, row.params] + [repr(float(v)) for v in row.as_tuple()[3:]])
        return buf.getvalue()


def _summary_row(name: str, index: int, params: str, vals: np.ndarray) -> AuditRow:
    return AuditRow(name, index, params, float(np.mean(vals)), float(np.median(vals)), float(np.max(vals)))


def _embed(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Copy an ``n x n`` coefficient array into the centre of an ``m x m`` lattice."""
    n = coeffs.shape[0]
    h = n // 2
    out = np.zeros((m, m), dtype=np.complex128)
    idx = np.r_[0:h, m - h : m]
    out[np.ix_(idx, idx)] = coeffs
    return out


def exact_advection(v1: SpectralField, v2: SpectralField, f: SpectralField) -> SpectralField:
    """``v . grad f`` computed without aliasing on a lattice of twice the size.

    Inputs must have no Nyquist content; the result lives on the refined grid.
    """
    g = f.grid
    big = Grid(2 * g.n, g.box_length)
    m = big.n

    def phys(c: np.ndarray) -> np.ndarray:
        return (sfft.ifft2(_embed(c, m)) * m * m).real

    d1 = phys(1j * g.xi1_odd * f.coeffs)
    d2 = phys(1j * g.xi2_odd * f.coeffs)
    prod = phys(v1.coeffs) * d1 + phys(v2.coeffs) * d2
    return SpectralField(big, sfft.fft2(prod) / m**2)


def coherent_shell_field(grid: Grid, lam: float, seed: int, a: float = 1.0, b: float = 2.0) -> SpectralField:
    """Random field supported in ``a lam <= |xi| <= b lam`` with phases aligned at a random point.

    Moduli are Rayleigh distributed; the common focus makes the sup norm of
    each member comparable to the extremal value allowed by its spectrum.
    """
    rng = np.random.default_rng(seed)
    xi = grid.xi_abs
    shell = (xi >= a * lam) & (xi <= b * lam)
    nyq = -grid.n // 2
    shell &= (grid.k1 != nyq) & (grid.k2 != nyq)
    mod = np.abs(rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    x0 = rng.uniform(0, grid.box_length, size=2)
    c = np.where(shell, mod * np.exp(-1j * (grid.xi1 * x0[0] + grid.xi2 * x0[1])), 0.0)
    mirrored = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
    return SpectralField(grid, 0.5 * (c + mirrored.conj()))


BERNSTEIN_LAMBDAS = (4, 8, 16, 32)
BERNSTEIN_POWERS = (0.5, 1.0)
BERNSTEIN_PAIRS = ((2.0, 2.0), (2.0, math.inf))


def bernstein_ratio(f: SpectralField, lam: float, k: float, p: float, q: float) -> float:
    """``|| |D|^k f ||_q / (lam^(k + 2(1/p - 1/q)) ||f||_p)``."""
    from .spectral_core import padded_physical

    g = f.grid
    dk = SpectralField(g, f.coeffs * g.xi_abs**k)
    if math.isinf(q):
        num = float(np.abs(padded_physical(dk, 2)).max())
    else:
        num = field_lp_norm(dk, q)
    den = field_lp_norm(f, p)
    expo = k + 2.0 * (1.0 / p - (0.0 if math.isinf(q) else 1.0 / q))
    return num / (lam**expo * den)


def bernstein_audit(ensemble_size: int, seed: int, grid: Grid | None = None) -> AuditReport:
    """Empirical constants of Bernstein's inequality on coherent shell ensembles.

    ``constants`` holds, per ``(k, p, q)``, the lambda-stability factor
    ``max_lambda C / min_lambda C`` of the ensemble-maximum ratio, and for
    ``p = q`` the same factor for the ensemble-minimum ratio.
    """
    if ensemble_size < 1:
        raise ConfigurationError("ensemble size must be at least 1")
    grid = grid or Grid(256, 2 * math.pi)
    report = AuditReport("bernstein")
    for k in BERNSTEIN_POWERS:
        for p, q in BERNSTEIN_PAIRS:
            upper, lower = [], []
            params = f"k={k};p={p:g};q={q:g}"
            for lam in BERNSTEIN_LAMBDAS:
                vals = np.array(
                    [
                        bernstein_ratio(coherent_shell_field(grid, lam, seed + i), lam, k, p, q)
                        for i in range(ensemble_size)
                    ]
                )
                report.rows.append(_summary_row("bernstein", lam, params, vals))
                upper.append(vals.max())
                lower.append(vals.min())
            report.constants[f"upper_stability[{params}]"] = max(upper) / min(upper)
            if p == q:
                report.constants[f"lower_stability[{params}]"] = max(lower) / min(lower)
    report.constants["stability"] = max(report.constants.values())
    return report


def _check_commutator_params(s: float, beta: float) -> None:
    if not 0 < beta < 2:
        raise ConfigurationError(f"commutator audit needs beta in (0, 2), got {beta}")
    if not beta - 2 < s < 2:
        raise ConfigurationError(f"commutator audit needs s in (beta-2, 2) = ({beta - 2}, 2), got {s}")


def commutator_terms(f: SpectralField, s: float, beta: float, q_range: range | None = None) -> dict[int, float]:
    """``2^(q(s-beta)) ||[Delta_q, R^perp f] . grad f||_2`` for each block ``q >= 0``."""
    _check_commutator_params(s, beta)
    v1, v2 = perp_velocity(f)
    big = Grid(2 * f.grid.n, f.grid.box_length)
    full = exact_advection(v1, v2, f)
    part_big = DyadicPartition(big)
    part = DyadicPartition(f.grid)
    qs = q_range if q_range is not None else range(0, part_big.q_max + 1)
    out = {}
    for q in qs:
        first = full.coeffs * part_big.multiplier(q, False)
        fq = SpectralField(f.grid, f.coeffs * part.multiplier(q, False)) if q <= part.q_max else None
        if fq is None:
            second = 0.0
        else:
            second = exact_advection(v1, v2, fq).coeffs
        diff = SpectralField(big, first - second)
        out[q] = 2.0 ** (q * (s - beta)) * diff.norm()
    return out


def commutator_member(f: SpectralField, s: float, beta: float, q_range: range | None = None) -> tuple[float, dict[int, float]]:
    terms = commutator_terms(f, s, beta, q_range)
    rhs = besov_norm(f, BesovNormSpec(2.0 - beta, 2, 2, True)) * besov_norm(f, BesovNormSpec(s, 2, 2, False))
    ratios = {q: v / rhs for q, v in terms.items()}
    return math.sqrt(sum(r * r for r in ratios.values())), ratios


def commutator_audit(
    ensemble_size: int,
    q_range: range | None,
    s: float,
    beta: float,
    seed: int,
    grid: Grid | None = None,
    band: tuple[float, float] = (1.0, 40.0),
    gamma: float = 1.0,
) -> AuditReport:
    """Ensemble statistics of the commutator ratio for ``v = R^perp f``.

    ``constants['ensemble_max']`` is the largest ``(sum_q ratio_q^2)^(1/2)`` over
    the ensemble and ``constants['max_over_median']`` the boundedness check.
    """
    _check_commutator_params(s, beta)
    if ensemble_size < 1:
        raise ConfigurationError("ensemble size must be at least 1")
    grid = grid or Grid(128, 2 * math.pi)
    report = AuditReport("commutator")
    per_q: dict[int, list[float]] = {}
    totals = []
    for i in range(ensemble_size):
        f = random_field(grid, seed + i, gamma=gamma, band=band)
        total, ratios = commutator_member(f, s, beta, q_range)
        totals.append(total)
        for q, r in ratios.items():
            per_q.setdefault(q, []).append(r)
    params = f"s={s};beta={beta};n={grid.n}"
    for q in sorted(per_q):
        report.rows.append(_summary_row("commutator", q, params, np.asarray(per_q[q])))
    t = np.asarray(totals)
    report.member_constants["total"] = totals
    report.constants.update(
        ensemble_max=float(t.max()),
        ensemble_median=float(np.median(t)),
        max_over_median=float(t.max() / np.median(t)),
    )
    return report


def product_member(f: SpectralField, R_band: float, s: float, beta: float) -> tuple[float, float, float]:
    """Return (high-block constant, unnormalized high-block sum, low-block constant) for one field."""
    v1, v2 = perp_velocity(f)
    big = Grid(2 * f.grid.n, f.grid.box_length)
    adv = exact_advection(v1, v2, f)
    part = DyadicPartition(big)
    high = []
    for q in range(0, part.q_max + 1):
        blk = SpectralField(big, adv.coeffs * part.multiplier(q, False))
        high.append(2.0 ** (q * (s - beta)) * blk.norm())
    high_sum = math.sqrt(sum(h * h for h in high))
    f_inf = float(np.abs(f.to_physical()).max())
    scale = f.norm() * f_inf
    if scale == 0:
        return 0.0, 0.0, 0.0
    const_high = high_sum / (R_band ** (1.0 + s - beta) * scale)
    xi = f.grid.xi_abs
    dbv = math.sqrt(
        SpectralField(f.grid, v1.coeffs * xi**beta).norm_sq() + SpectralField(f.grid, v2.coeffs * xi**beta).norm_sq()
    )
    low = []
    if dbv > 0:
        for q in range(part.q_min, 1):
            blk = SpectralField(big, adv.coeffs * part.multiplier(q, True))
            low.append(blk.norm() / (2.0 ** (q * (2.0 - beta)) * dbv * f.norm()))
    return const_high, high_sum / scale, max(low) if low else 0.0


def product_audit(
    ensemble_size: int,
    R_band: float,
    beta: float,
    s: float,
    seed: int,
    grid: Grid | None = None,
    gamma: float = 0.0,
) -> AuditReport:
    """Empirical constants of the band-limited product bound and its low-block form.

    Fields are band-limited white noise (``gamma = 0``) so that the band edge
    carries energy; the audit is repeated at ``2 R_band`` to track stability and
    the fitted ``R_band`` scaling exponent.
    """
    if not 0 < beta < 1:
        raise ConfigurationError(f"product audit needs beta in (0, 1), got {beta}")
    if not s + 1 - beta > 0:
        raise ConfigurationError("product audit needs s + 1 - beta > 0")
    if ensemble_size < 1:
        raise ConfigurationError("ensemble size must be at least 1")
    grid = grid or Grid(128, 8 * math.pi)
    if 2 * R_band > grid.n / 3 * grid.dk:
        raise ConfigurationError("2 * R_band exceeds the dealiased range of the grid")
    report = AuditReport("product")
    stats = {}
    for R in (R_band, 2 * R_band):
        highs, raws, lows = [], [], []
        for i in range(ensemble_size):
            f = random_field(grid, seed + i, gamma=gamma, band=(grid.dk, R))
            h, raw, lo = product_member(f, R, s, beta)
            highs.append(h)
            raws.append(raw)
            lows.append(lo)
        params = f"s={s};beta={beta};R={R:g};n={grid.n}"
        report.rows.append(_summary_row("product_high", 0, params, np.asarray(highs)))
        report.rows.append(_summary_row("product_low", 0, params, np.asarray(lows)))
        stats[R] = (np.asarray(highs), np.asarray(raws), np.asarray(lows))
    h1, r1, l1 = stats[R_band]
    h2, r2, l2 = stats[2 * R_band]
    report.constants.update(
        high_max=float(h1.max()),
        low_max=float(l1.max()),
        high_doubling_factor=float(max(h1.max(), h2.max()) / min(h1.max(), h2.max())),
        low_doubling_factor=float(max(l1.max(), l2.max()) / min(l1.max(), l2.max())),
        scaling_exponent=float(math.log(np.median(r2) / np.median(r1)) / math.log(2.0)),
        predicted_exponent=1.0 + s - beta,
    )
    return report
