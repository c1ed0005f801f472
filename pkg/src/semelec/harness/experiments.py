"""Experiment orchestration: transient, stationary, I-V sweep, Schottky comparison.

Each ``run_*`` function turns an :class:`ExperimentSpec` into a
:class:`RunOutput` (profiles, tables, figures, summary, failures); nothing
is written here.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .. import __version__, schottky
from ..errors import StepFailure
from ..kernels import BACKEND
from ..stationary import solve_steady
from ..transport import TransportSystem
from .config import ExperimentSpec, validate
from .outputs import (
    CONVERGENCE_COLUMNS,
    IV_COLUMNS,
    Figure,
    RunOutput,
    Table,
    profile_from_reduced,
    profile_from_state,
)
from .presets import FREE_CHOICES, merge

log = logging.getLogger(__name__)


def _states(spec: ExperimentSpec):
    """``(label, illuminated flag)`` for every requested illumination state."""
    return [(label, label == "illuminated") for label in spec.illumination_states]


def _time_tag(t):
    return f"{t:.6g}".replace("-", "m")


def _system(spec: ExperimentSpec, illuminated):
    return TransportSystem(spec.device(illuminated), spec.mesh(), spec.config["solver"]["safety"])


def _initial(system, spec: ExperimentSpec):
    e = spec.config["experiment"]
    return system.initial_state(e["rho_n0"], e["rho_p0"])


def _convergence_table(name, report):
    return Table(name, CONVERGENCE_COLUMNS, report.rows())


def _flux_spread(system, state):
    J = system.fluxes(state).total
    return float(np.ptp(J)), float(np.mean(J))


# transient


def run_transient(spec: ExperimentSpec) -> RunOutput:
    """Snapshots at the requested times plus a time series of boundary fluxes."""
    out = RunOutput("transient")
    e = spec.config["experiment"]
    t_end = float(e["t_end"])
    snaps = sorted({float(t) for t in e["snapshot_times"] if t <= t_end} | {0.0})
    if t_end > 0:
        grid = np.linspace(0.0, t_end, int(e["series_points"]) + 1)
    else:
        grid = np.zeros(1)
    times = sorted(set(grid.tolist()) | set(snaps))
    max_steps = spec.config["solver"]["max_steps"]
    for label, ill in _states(spec):
        system = _system(spec, ill)
        state = _initial(system, spec)
        rows, steps, failed = [], 0, None
        for t in times:
            if t > state.t:
                try:
                    state, stats = system.advance(state, t, max_steps=max_steps - steps)
                except StepFailure as exc:
                    failed = f"{label}: {exc}"
                    break
                steps += stats.steps
                if not stats.reached_end:
                    failed = f"{label}: step cap {max_steps} reached at t'={state.t:.6g}"
                    break
            fx = system.fluxes(state)
            rows.append((state.t, fx.interface_S, fx.interface_E, fx.total[0], fx.total[-1]))
            if t in snaps:
                out.profiles[f"transient_{label}_t{_time_tag(t)}"] = profile_from_state(system, state)
        if failed:
            out.failures.append(failed)
            out.profiles[f"transient_{label}_partial_t{_time_tag(state.t)}"] = profile_from_state(system, state)
        out.tables.append(
            Table(
                f"timeseries_{label}",
                ("t_prime", "interface_flux_S", "interface_flux_E", "collector_flux", "electrode_flux"),
                rows,
            )
        )
        out.summary[label] = {"steps": steps, "t_reached": state.t, "failed": bool(failed)}
    return out


# stationary


def run_stationary(spec: ExperimentSpec) -> RunOutput:
    out = RunOutput("stationary")
    control = spec.control()
    for label, ill in _states(spec):
        system = _system(spec, ill)
        state, report = solve_steady(system, _initial(system, spec), control)
        out.profiles[f"stationary_{label}"] = profile_from_state(system, state)
        out.tables.append(_convergence_table(f"convergence_{label}", report))
        spread, mean = _flux_spread(system, state)
        fx = system.fluxes(state)
        out.summary[label] = {
            "converged": report.converged,
            "message": report.message,
            "iterations": report.iterations,
            "warm_start_time": report.warm_start_time,
            "warm_start_steps": report.warm_start_steps,
            "total_flux": mean,
            "total_flux_spread": spread,
            "interface_flux_S": fx.interface_S,
            "interface_flux_E": fx.interface_E,
        }
        if not report.converged:
            out.failures.append(f"{label}: {report.message}")
    return out


# I-V sweep


@dataclass(frozen=True)
class IVPoint:
    phi_app: float
    total_flux: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class FiguresOfMerit:
    """Curve features; ``None`` where the curve does not define them."""

    phi_oc: float | None
    j_sc: float | None
    phi_mp: float | None
    j_mp: float | None
    power_mp: float | None


def sweep_point(config, illuminated, bias):
    """Steady flux at one counter-electrode bias (module level so workers can pickle it)."""
    spec = ExperimentSpec(validate(merge(config, {"contacts": {"phi_app_A": float(bias)}})))
    system = _system(spec, illuminated)
    state, report = solve_steady(system, _initial(system, spec), spec.control())
    J = float(np.mean(system.fluxes(state).total)) if state.is_finite() else float("nan")
    return IVPoint(float(bias), J, bool(report.converged and np.isfinite(J)), report.iterations)


def _sweep_worker(args):
    return sweep_point(*args)


def sweep(spec: ExperimentSpec, illuminated, threads=1):
    """All bias points in grid order; ``threads > 1`` uses a process pool."""
    jobs = [(spec.config, illuminated, b) for b in spec.bias_grid]
    if threads <= 1 or len(jobs) <= 1:
        return [_sweep_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_sweep_worker, jobs))


def _sign_changes(phi, J):
    return [i for i in range(len(J) - 1) if J[i] == 0.0 or J[i] * J[i + 1] < 0.0]


def figures_of_merit(points) -> FiguresOfMerit:
    """Open-circuit bias, short-circuit flux and maximum-power point.

    Only converged points enter. The open-circuit bias is the sign change of
    the flux closest to zero bias, located by bisection on the piecewise
    linear curve. The maximum of ``phi * J`` over the grid is refined by a
    quadratic through the neighbouring points.
    """
    pts = sorted((p for p in points if p.converged and np.isfinite(p.total_flux)), key=lambda p: p.phi_app)
    if len(pts) < 2:
        return FiguresOfMerit(None, None, None, None, None)
    phi = np.array([p.phi_app for p in pts])
    J = np.array([p.total_flux for p in pts])
    j_sc = float(np.interp(0.0, phi, J)) if phi[0] <= 0.0 <= phi[-1] else None

    phi_oc = None
    changes = _sign_changes(phi, J)
    if changes:
        roots = []
        for i in changes:
            if J[i] == 0.0:
                roots.append(float(phi[i]))
                continue
            lo, hi = phi[i], phi[i + 1]
            roots.append(float(brentq(lambda v: np.interp(v, phi, J), lo, hi, xtol=1e-12)))
        phi_oc = min(roots, key=abs)

    power = phi * J
    k = int(np.argmax(power))
    phi_mp, p_mp = float(phi[k]), float(power[k])
    if 0 < k < len(phi) - 1:
        a, b, c = np.polyfit(phi[k - 1 : k + 2], power[k - 1 : k + 2], 2)
        if a < 0:
            v = float(np.clip(-b / (2 * a), phi[k - 1], phi[k + 1]))
            phi_mp, p_mp = v, float(np.polyval((a, b, c), v))
    j_mp = p_mp / phi_mp if phi_mp != 0 else None
    return FiguresOfMerit(phi_oc, j_sc, phi_mp, j_mp, p_mp)


def run_iv_sweep(spec: ExperimentSpec, threads=1) -> RunOutput:
    out = RunOutput("iv_sweep")
    series = {}
    for label, ill in _states(spec):
        points = sweep(spec, ill, threads)
        out.tables.append(
            Table(f"iv_{label}", IV_COLUMNS, [(p.phi_app, p.total_flux, p.converged, p.iterations) for p in points])
        )
        merit = figures_of_merit(points)
        out.summary[label] = {"figures_of_merit": asdict(merit), "points": len(points)}
        bad = [p.phi_app for p in points if not p.converged]
        if bad:
            out.failures.append(f"{label}: no convergence at biases {bad}")
        ok = [p for p in points if p.converged]
        series[label] = (np.array([p.phi_app for p in ok]), np.array([p.total_flux for p in ok]))
    merit_rows = [
        (label, *(v for v in asdict(FiguresOfMerit(**out.summary[label]["figures_of_merit"])).values()))
        for label, _ in _states(spec)
    ]
    out.tables.append(Table("iv_figures_of_merit", ("curve", *FiguresOfMerit.__dataclass_fields__), merit_rows))
    out.figures.append(Figure("iv_curves", "I-V curves", "applied bias", "total flux", series, logy=True))
    return out


# Schottky comparison


def run_schottky_compare(spec: ExperimentSpec) -> RunOutput:
    out = RunOutput("schottky_compare")
    control = spec.control()
    e = spec.config["experiment"]
    for label, ill in _states(spec):
        system = _system(spec, ill)
        state, report = solve_steady(system, _initial(system, spec), control)
        reduced_sys = schottky.ReducedSystem(schottky.reduce(system.device, system.mesh))
        reduced = schottky.solve_reduced(reduced_sys, e["rho_n0"], e["rho_p0"], control)
        disc = schottky.compare(schottky.full_profile(system, state), reduced.profile)
        out.profiles[f"full_{label}"] = profile_from_state(system, state)
        out.profiles[f"schottky_{label}"] = profile_from_reduced(reduced_sys, reduced)
        out.tables.append(_convergence_table(f"convergence_full_{label}", report))
        out.tables.append(_convergence_table(f"convergence_schottky_{label}", reduced.report))
        out.tables.append(Table(f"discrepancy_{label}", ("field", "rel_l2", "rel_max"), disc.rows()))
        out.summary[label] = {
            "full_converged": report.converged,
            "schottky_converged": reduced.report.converged,
            "rel_l2": disc.rel_l2,
            "rel_max": disc.rel_max,
            "collector_flux_rel": disc.flux_rel,
            **disc.tags,
        }
        for name, rep in (("full", report), ("schottky", reduced.report)):
            if not rep.converged:
                out.failures.append(f"{label} ({name}): {rep.message}")
    return out


RUNNERS = {
    "transient": run_transient,
    "stationary": run_stationary,
    "iv_sweep": run_iv_sweep,
    "schottky_compare": run_schottky_compare,
}


def run(spec: ExperimentSpec, threads=1) -> RunOutput:
    if spec.mode == "iv_sweep":
        return run_iv_sweep(spec, threads)
    return RUNNERS[spec.mode](spec)


# manifest


def scaled_parameters(spec: ExperimentSpec):
    """Derived scaled values for the manifest (dark device)."""
    system = _system(spec, False)
    dev = system.device
    itf = dev.interface
    return {
        "D": {sp.name: sp.D for sp in dev.species},
        "mu": {sp.name: sp.mu for sp in dev.species},
        "alpha": {sp.name: sp.alpha for sp in dev.species},
        "bulk": {sp.name: sp.bulk_density for sp in dev.electrolyte_species},
        "lambda_S_sq": dev.lambda_S_sq,
        "lambda_E_sq": dev.lambda_E_sq,
        "rho_isc": dev.recomb.rho_isc,
        "A_n": dev.recomb.A_n,
        "A_p": dev.recomb.A_p,
        "k_et": itf.k_et,
        "k_ht": itf.k_ht,
        "interface_normal": itf.normal,
        "v_n": dev.contacts.v_n,
        "v_p": dev.contacts.v_p,
        "G0": dev.illumination.G0,
        "sigma": dev.illumination.sigma,
        "phi_bi": system.phi_bi,
        "phi_C": system.phi_C,
        "phi_A": system.phi_A,
        "n_nodes": system.n_nodes,
        "smallest_cell": float(system.mesh.spacings.min()),
    }


def manifest(spec: ExperimentSpec, threads=1):
    return {
        "package_version": __version__,
        "kernel_backend": BACKEND,
        "preset": spec.preset,
        "source": spec.source,
        "mode": spec.mode,
        "threads": threads,
        "config": spec.config,
        "solver_settings": asdict(spec.control()),
        "scaled_parameters": scaled_parameters(spec),
        "free_choices": FREE_CHOICES,
    }


__all__ = [
    "FiguresOfMerit",
    "IVPoint",
    "RUNNERS",
    "figures_of_merit",
    "manifest",
    "run",
    "run_iv_sweep",
    "run_schottky_compare",
    "run_stationary",
    "run_transient",
    "scaled_parameters",
    "sweep",
    "sweep_point",
]
