"""The six experiments, each producing named output files and a summary.

Every experiment is a pure function of an ``ExperimentConfig``: identical
configs give identical bytes.  Ladder points run in a process pool when
``output.workers > 1`` and are gathered in ladder order; a point that fails
numerically becomes a CSV row with its error class and the sweep goes on.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel

from . import __version__
from .config import ExperimentConfig, Experiment
from .errors import AccuracyError, AuditFailure, BlowUpError, ConfigurationError, FitError, QGError
from .littlewood_paley import bernstein_audit, commutator_audit, product_audit
from .oscillatory_kernel import KernelParams, eval_htilde, fit_csv, fit_decay, kernel_csv, sweep_kernel_sup
from .qg_solver import (
    Profile1D,
    SolverConfig,
    check_budget,
    energy_report,
    solve_full,
    solve_limit_1d,
    solve_perturbation_eta,
    vortex_pair,
    write_trajectory,
)
from .semigroup import MixedNormSpec, Trajectory, band_limited_packet, mixed_norm, propagate, strichartz_sweep
from .spectral_core import Grid, SpectralField

__all__ = ["RunResult", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_AUDIT", "run_experiment", "build_manifest", "dump_config_text"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_AUDIT = 0, 1, 2, 3


@dataclass
class RunResult:
    experiment: str
    files: dict[str, bytes] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    failures: list[dict[str, str]] = field(default_factory=list)
    exit_code: int = EXIT_OK
    message: str = ""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, AuditFailure):
        return EXIT_AUDIT
    return EXIT_NUMERICAL


def _csv(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode()


def _binary(traj: Trajectory, cfg: SolverConfig, dt: float | None = None) -> bytes:
    buf = io.BytesIO()
    write_trajectory(buf, traj, cfg, dt)
    return buf.getvalue()


def _map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _guarded(fn: Callable, *args) -> tuple[Any, dict | None]:
    """Run one ladder point; numerical errors become a failure record."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return fn(*args), None
    except (BlowUpError, AccuracyError, FitError) as exc:
        return None, {"error": type(exc).__name__, "message": str(exc)}


def _solver_config(cfg: ExperimentConfig, **changes) -> SolverConfig:
    s = cfg.solver
    base = dict(n=s.n, box_length=s.box_length, nu=s.nu, alpha=s.alpha, dt=s.dt, T=s.horizon(), samples=s.samples, dealias=s.dealias)
    base.update(changes)
    return SolverConfig(**base)


def _ends(traj: Trajectory) -> Trajectory:
    return Trajectory(traj.grid, traj.times[[0, -1]], [traj.fields[0], traj.fields[-1]])


# ---------------------------------------------------------------- energy


def _energy(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("energy")
    sc = _solver_config(cfg, A=cfg.energy.A)
    worst = 0.0
    for i in range(cfg.energy.members):
        seed = cfg.seed + i
        theta0 = vortex_pair(sc.grid, seed, sc.alpha, cfg.solver.hs_norm, cfg.solver.width)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            traj = solve_full(theta0, sc)
        rep = energy_report(traj, sc, sobolev=cfg.energy.sobolev)
        res.files[f"energy_seed{seed}.csv"] = rep.to_csv().encode()
        if cfg.output.trajectories:
            res.files[f"trajectory_seed{seed}.bin"] = _binary(traj, sc)
        excess = float((rep.budget / rep.l2_sq[0] - 1).max())
        worst = max(worst, excess)
        res.summary[f"seed{seed}"] = dict(max_relative_excess=excess, steps=traj.steps, dt=traj.dt, cfl_max=traj.cfl_max)
        for w in caught:
            res.failures.append({"point": f"seed={seed}", "error": "StabilityWarning", "message": str(w.message)})
        try:
            check_budget(rep, cfg.energy.tolerance)
        except AuditFailure as exc:
            res.exit_code = EXIT_AUDIT
            res.message = f"seed {seed}: {exc} (t = {exc.time:g})"
    res.summary["max_relative_excess"] = worst
    return res


# ---------------------------------------------------------------- kernel


def _kernel_point(args):
    p, mu, tol = args
    return sweep_kernel_sup(p, [mu], tol=tol)[0]


def _htilde_point(args):
    mu, phi, r, R = args
    return eval_htilde(mu, phi, r, R)


def _kernel(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("kernel")
    k = cfg.kernel
    p = KernelParams(t=k.t, mu=k.mu_ladder[0], r=k.r, R=k.R, alpha=cfg.solver.alpha, nu=cfg.solver.nu)
    sups = _map(_kernel_point, [(p, mu, k.tolerance) for mu in k.mu_ladder], cfg.output.workers)
    estimates = [e for s in sups for e in s.estimates]
    res.files["kernel.csv"] = kernel_csv(estimates).encode()
    for s in sups:
        for z, msg in s.failures:
            res.failures.append({"point": f"mu={s.mu:g},z=({z[0]:g},{z[1]:g})", "error": "AccuracyError", "message": msg})
    decay = math.exp(k.r**cfg.solver.alpha * cfg.solver.nu * k.t / 4)
    normalized = [s.sup_abs * max(1.0, s.mu**0.25) * decay for s in sups]
    zero = [abs(next(e.value for e in s.estimates if e.params.z == (0.0, 0.0))) for s in sups]
    fits = {}
    for name, data in (("sup_z", [(s.mu, s.sup_abs) for s in sups]), ("z_zero", list(zip(k.mu_ladder, zero)))):
        fit, fail = _guarded(fit_decay, data)
        if fit is not None:
            fits[name] = fit
        else:
            res.failures.append({"point": name, **fail})
    rows = []
    for phi_name, phi in (("phi_0", 0.0), ("phi_half_pi", math.pi / 2)):
        vals = _map(_htilde_point, [(mu, phi, k.r, k.R) for mu in k.htilde_ladder], cfg.output.workers)
        rows += [[mu, phi, v] for mu, v in zip(k.htilde_ladder, vals)]
        fit, fail = _guarded(fit_decay, list(zip(k.htilde_ladder, vals)))
        if fit is not None:
            fits[f"htilde_{phi_name}"] = fit
        else:
            res.failures.append({"point": f"htilde_{phi_name}", **fail})
    res.files["kernel_fit.csv"] = fit_csv(fits).encode()
    res.files["kernel_sup.csv"] = _csv(
        ["mu", "sup_abs_K", "argmax_z1", "argmax_z2", "max_est_err", "normalized"],
        [[s.mu, s.sup_abs, s.argmax[0], s.argmax[1], s.max_error, v] for s, v in zip(sups, normalized)],
    )
    res.files["htilde.csv"] = _csv(["mu", "phi", "htilde"], rows)
    res.summary = dict(
        normalized_sup=normalized,
        normalized_variation=max(normalized) / min(normalized),
        slopes={name: f.slope for name, f in fits.items()},
    )
    return res


# ---------------------------------------------------------------- strichartz


def _strichartz(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("strichartz")
    s = cfg.strichartz
    grid = Grid(s.n, s.box_length)
    g = band_limited_packet(grid, s.r, s.R, s.width)
    header, rows, fits = None, [], {}
    for q in s.q_values:
        rep = strichartz_sweep(g, s.A_ladder, MixedNormSpec(s.p, q, s.T), cfg.solver.nu, cfg.solver.alpha, (s.r, s.R), s.samples)
        lines = rep.to_csv().splitlines()
        header = lines[0]
        rows += lines[1:]
        key = f"p={s.p:g},q={q:g}"
        fits[key] = rep.fit
        res.summary[key] = dict(
            slope=rep.fit.slope, predicted=rep.predicted_exponent, variation=rep.variation, envelope_ok=rep.envelope_ok
        )
        res.failures += [{"point": key, "error": "SamplingWarning", "message": w} for w in rep.warnings]
    res.files["strichartz.csv"] = ("\n".join([header] + rows) + "\n").encode()
    res.files["strichartz_fit.csv"] = fit_csv(fits).encode()
    if cfg.output.trajectories:
        sc = SolverConfig(n=s.n, box_length=s.box_length, nu=cfg.solver.nu, alpha=cfg.solver.alpha, T=s.T)
        res.files["packet.bin"] = _binary(Trajectory(grid, [0.0], [g]), sc, dt=0.0)
    return res


# ---------------------------------------------------------------- convergence


def _converge_point(args):
    cfg, A = args
    c = cfg.converge
    sc = _solver_config(cfg, n=c.n, box_length=c.box_length, A=A)
    bar0, theta0 = _converge_data(cfg, sc.grid)

    def run():
        traj = solve_full(theta0, sc)
        diffs = [f - solve_limit_1d(bar0, float(t), sc.nu, sc.alpha).to_field() for t, f in zip(traj.times, traj.fields)]
        val = mixed_norm(Trajectory(sc.grid, traj.times, diffs), MixedNormSpec(2, c.sigma, sc.T))
        return traj, val.value**2, val.refinement_change

    return _guarded(run)


def _converge_data(cfg: ExperimentConfig, grid: Grid) -> tuple[Profile1D, SpectralField]:
    c = cfg.converge
    x2 = grid.coords[1][0]
    bar0 = Profile1D.from_samples(grid, c.profile_amplitude * np.sin(2 * math.pi * x2 / grid.box_length))
    tilde = vortex_pair(grid, cfg.seed, cfg.solver.alpha, cfg.solver.hs_norm, cfg.solver.width) if c.include_tilde else SpectralField.zeros(grid)
    return bar0, bar0.to_field() + tilde


def _converge(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("converge")
    c = cfg.converge
    out = _map(_converge_point, [(cfg, A) for A in c.A_ladder], cfg.output.workers)
    rows, values = [], []
    for A, (val, fail) in zip(c.A_ladder, out):
        if fail:
            rows.append([A, math.nan, math.nan, fail["error"]])
            res.failures.append({"point": f"A={A:g}", **fail})
            continue
        traj, E, change = val
        rows.append([A, E, change, "ok"])
        values.append(E)
        if cfg.output.trajectories:
            res.files[f"converge_A{A:g}.bin"] = _binary(_ends(traj), traj.config, traj.dt)
    res.files["converge.csv"] = _csv(["A", "E", "refinement_change", "status"], rows)
    res.summary = dict(
        E=values,
        strictly_decreasing=bool(len(values) == len(rows) and all(b < a for a, b in zip(values, values[1:]))),
        ratio_last_first=values[-1] / values[0] if len(values) > 1 and values[0] > 0 else math.nan,
    )
    if not values:
        res.exit_code, res.message = EXIT_NUMERICAL, "every ladder point failed"
    return res


# ---------------------------------------------------------------- stability


def _stability_point(args):
    cfg, A = args
    st = cfg.stability
    sc = _solver_config(cfg, A=A, band=(st.r, st.R), nonlinear=st.nonlinear)
    theta0 = vortex_pair(sc.grid, cfg.seed, sc.alpha, cfg.solver.hs_norm, cfg.solver.width)

    def run():
        full = solve_full(theta0, sc)
        s_hi, s_dot = 2 - sc.alpha, 2 - sc.alpha / 2
        diffs = [f - propagate(theta0, float(t), A, sc.nu, sc.alpha) for t, f in zip(full.times, full.fields)]
        d_inf = max(math.sqrt(d.sobolev_norm_sq(s_hi)) for d in diffs)
        dot = np.array([d.sobolev_norm_sq(s_dot, homogeneous=True) for d in diffs])
        d_2 = math.sqrt(float(np.trapezoid(dot, full.times)))
        eta, free = solve_perturbation_eta(theta0, sc)
        eta_sup = max(math.sqrt(e.sobolev_norm_sq(s_hi)) for e in eta.fields)
        recon = np.array([((e + m) - f).norm() for e, m, f in zip(eta.fields, free.fields, full.fields)])
        if st.halving_check:
            span = sc.T / sc.samples
            step = span / math.ceil(span / full.dt * (1 - 1e-12))
            fine = solve_full(theta0, sc.replace(dt=step / 2))
            halving = np.array([(f - g).norm() for f, g in zip(full.fields, fine.fields)])
            floor = 1e-13 * np.array([f.norm() for f in full.fields])
            ok = bool(np.all(recon <= 10 * halving + floor))
        else:
            halving, ok = np.full(recon.shape, math.nan), True
        return full, dict(D_inf=d_inf, D_2=d_2, eta_sup=eta_sup, recon=float(recon.max()), halving=float(np.nanmax(halving)) if st.halving_check else math.nan, ok=ok)

    return _guarded(run)


def _stability(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("stability")
    st = cfg.stability
    out = _map(_stability_point, [(cfg, A) for A in st.A_ladder], cfg.output.workers)
    rows, d_inf, recon_ok = [], [], True
    for A, (val, fail) in zip(st.A_ladder, out):
        if fail:
            rows.append([A] + [math.nan] * 5 + ["", fail["error"]])
            res.failures.append({"point": f"A={A:g}", **fail})
            continue
        full, m = val
        rows.append([A, m["D_inf"], m["D_2"], m["eta_sup"], m["recon"], m["halving"], str(m["ok"]).lower(), "ok"])
        d_inf.append(m["D_inf"])
        recon_ok &= m["ok"]
        if cfg.output.trajectories:
            res.files[f"stability_A{A:g}.bin"] = _binary(_ends(full), full.config, full.dt)
    res.files["stability.csv"] = _csv(["A", "D_inf", "D_2", "eta_sup", "recon_err", "halving_err", "recon_ok", "status"], rows)
    res.summary = dict(
        D_inf=d_inf,
        strictly_decreasing=bool(len(d_inf) == len(rows) and all(b < a for a, b in zip(d_inf, d_inf[1:]))),
        ratio_last_first=d_inf[-1] / d_inf[0] if len(d_inf) > 1 and d_inf[0] > 0 else math.nan,
        reconstruction_ok=recon_ok,
    )
    if not d_inf:
        res.exit_code, res.message = EXIT_NUMERICAL, "every ladder point failed"
    return res


# ---------------------------------------------------------------- Littlewood-Paley audits


def _lp_audit(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("lp_audit")
    a = cfg.audit
    rows, consts, comm, prod = [], [], {}, {}
    for n in a.grids:
        c = commutator_audit(a.ensemble_size, None, a.commutator_s, a.commutator_beta, cfg.seed, grid=Grid(n, 2 * math.pi))
        p = product_audit(a.ensemble_size, a.product_R, a.product_beta, a.product_s, cfg.seed, grid=Grid(n, 8 * math.pi))
        comm[n], prod[n] = c.constants, p.constants
        for rep in (c, p):
            rows += rep.to_csv().splitlines()[1:]
            consts += [[rep.name, n, k, v] for k, v in rep.constants.items()]
    b = bernstein_audit(a.ensemble_size, cfg.seed)
    rows += b.to_csv().splitlines()[1:]
    consts += [[b.name, 256, k, v] for k, v in b.constants.items()]

    def spread(d: dict, key: str) -> float:
        vals = [v[key] for v in d.values()]
        return max(vals) / min(vals)

    factors = dict(
        commutator_grid_factor=spread(comm, "ensemble_max"),
        product_high_grid_factor=spread(prod, "high_max"),
        product_low_grid_factor=spread(prod, "low_max"),
        bernstein_stability=b.constants["stability"],
    )
    consts += [["summary", 0, k, v] for k, v in factors.items()]
    header = "audit_name,index,params,empirical_ratio,ensemble_median,ensemble_max"
    res.files["lp_audit.csv"] = ("\n".join([header] + rows) + "\n").encode()
    res.files["lp_audit_constants.csv"] = _csv(["audit", "n", "constant", "value"], consts)
    res.summary = factors
    return res


_RUNNERS = {
    Experiment.energy: _energy,
    Experiment.kernel: _kernel,
    Experiment.strichartz: _strichartz,
    Experiment.converge: _converge,
    Experiment.stability: _stability,
    Experiment.lp_audit: _lp_audit,
}

_PLOTS = {
    Experiment.energy: ("energy_seed{seed}.csv", "1:4", "t", "budget"),
    Experiment.kernel: ("kernel_sup.csv", "1:2", "mu", "sup |K|"),
    Experiment.strichartz: ("strichartz.csv", "1:5", "A", "mixed norm"),
    Experiment.converge: ("converge.csv", "1:2", "A", "E(A)"),
    Experiment.stability: ("stability.csv", "1:2", "A", "D_inf"),
    Experiment.lp_audit: ("lp_audit.csv", "2:6", "index", "ensemble max"),
}


def _gnuplot(cfg: ExperimentConfig) -> bytes:
    name, cols, xl, yl = _PLOTS[cfg.experiment]
    name = name.format(seed=cfg.seed)
    logs = "set logscale xy\n" if cfg.experiment in (Experiment.kernel, Experiment.strichartz, Experiment.converge, Experiment.stability) else ""
    return (
        "set datafile separator ','\nset key autotitle columnhead\n"
        f"{logs}set xlabel '{xl}'\nset ylabel '{yl}'\n"
        f"set terminal pngcairo\nset output '{cfg.experiment.value}.png'\n"
        f"plot '{name}' using {cols} with linespoints\n"
    ).encode()


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Dispatch to the configured experiment; package errors become exit codes."""
    try:
        res = _RUNNERS[cfg.experiment](cfg)
    except QGError as exc:
        return RunResult(cfg.experiment.value, exit_code=exit_code_for(exc), message=f"{type(exc).__name__}: {exc}")
    if cfg.output.gnuplot:
        res.files[f"{cfg.experiment.value}.gp"] = _gnuplot(cfg)
    return res


# ---------------------------------------------------------------- manifest


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, list):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return str(getattr(v, "value", v))


def dump_config_text(cfg: ExperimentConfig) -> str:
    """The config in the ``key = value`` format; parsing it back gives an equal config."""
    lines = [f"experiment = {cfg.experiment.value}", f"seed = {cfg.seed}"]
    for name in ExperimentConfig.model_fields:
        sub = getattr(cfg, name)
        if isinstance(sub, BaseModel):
            lines.append(f"[{name}]")
            lines += [f"{key} = {_fmt(getattr(sub, key))}" for key in type(sub).model_fields]
    return "\n".join(lines) + "\n"


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def build_manifest(cfg: ExperimentConfig, res: RunResult, started: float, finished: float) -> str:
    """JSON manifest: config echo, version, timestamps, seed, SHA-256 of every output."""
    stamp = lambda t: datetime.fromtimestamp(t, timezone.utc).isoformat()  # noqa: E731
    doc = dict(
        artifact="qgdisp",
        version=__version__,
        experiment=cfg.experiment.value,
        seed=cfg.seed,
        started=stamp(started),
        finished=stamp(finished),
        exit_code=res.exit_code,
        message=res.message,
        config=dump_config_text(cfg),
        outputs={name: hashlib.sha256(data).hexdigest() for name, data in sorted(res.files.items())},
        failures=res.failures,
        summary=_jsonable(res.summary),
    )
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def timed_run(cfg: ExperimentConfig) -> tuple[RunResult, str]:
    started = time.time()
    res = run_experiment(cfg)
    return res, build_manifest(cfg, res, started, time.time())
