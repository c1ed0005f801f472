"""CSV, SVG and manifest writers.

Floats are written with Python's shortest round-trip representation, so
identical results give byte-identical CSV files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..poisson import electric_field

SPATIAL_COLUMNS = ("x_prime", "rho_n", "rho_p", "rho_r", "rho_o", "phi", "e_field", "total_flux")
IV_COLUMNS = ("phi_app", "total_flux", "converged", "iterations")
CONVERGENCE_COLUMNS = ("iteration", "update_norm")


class OutputError(OSError):
    """The output directory cannot be created or written."""


@dataclass
class Profile:
    """Nodal columns for one spatial CSV; NaN marks a missing region value."""

    x: np.ndarray
    columns: dict

    def rows(self):
        cols = [self.columns[name] for name in SPATIAL_COLUMNS[1:]]
        for i, x in enumerate(self.x):
            yield [x] + [c[i] for c in cols]


def nodal_flux(face_flux):
    """Face fluxes moved to nodes: mean of the two adjacent faces, one-sided at the ends."""
    J = np.asarray(face_flux, dtype=float)
    out = np.empty(J.size + 1)
    out[0], out[-1] = J[0], J[-1]
    out[1:-1] = 0.5 * (J[:-1] + J[1:])
    return out


def profile_from_state(system, state) -> Profile:
    """Spatial profile of a full-model state (extra species are not written)."""
    mesh = system.mesh
    s, N = system.s, mesh.n_nodes

    def place(values, lo):
        col = np.full(N, np.nan)
        col[lo : lo + len(values)] = values
        return col

    return Profile(
        x=mesh.nodes.copy(),
        columns={
            "rho_n": place(state.rho_n, 0),
            "rho_p": place(state.rho_p, 0),
            "rho_r": place(state.rho_r, s),
            "rho_o": place(state.rho_o, s),
            "phi": state.phi.copy(),
            "e_field": electric_field(state.phi, mesh),
            "total_flux": nodal_flux(system.fluxes(state).total),
        },
    )


def profile_from_reduced(system, result) -> Profile:
    """Spatial profile of a Schottky-reduced solution (electrolyte columns empty)."""
    x = system.reduced.nodes.copy()
    empty = np.full(x.size, np.nan)
    return Profile(
        x=x,
        columns={
            "rho_n": result.rho_S[0].copy(),
            "rho_p": result.rho_S[1].copy(),
            "rho_r": empty,
            "rho_o": empty.copy(),
            "phi": result.phi.copy(),
            "e_field": -np.gradient(result.phi, x),
            "total_flux": nodal_flux(system.total_flux(result.rho_S, result.phi)),
        },
    )


@dataclass
class Table:
    name: str
    header: tuple
    rows: list


@dataclass
class Figure:
    """A line plot: ``series`` maps a label to ``(x, y)``."""

    name: str
    title: str
    xlabel: str
    ylabel: str
    series: dict
    logy: bool = False


@dataclass
class RunOutput:
    """Everything an experiment produced, ready to be written."""

    mode: str
    profiles: dict = field(default_factory=dict)
    tables: list = field(default_factory=list)
    figures: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if np.isnan(v) else repr(v)
    if v is None:
        return ""
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def preflight(out_dir):
    """Create ``out_dir`` and prove it is writable, before any solve starts."""
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc.strerror or exc}") from None
    return path


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def _profile_figure(name, profile: Profile):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(4, 1, figsize=(6.5, 9.0), sharex=True)
    c = profile.columns
    for label in ("rho_n", "rho_p", "rho_r", "rho_o"):
        y = c[label]
        ok = np.isfinite(y) & (y > 0)
        if ok.any():
            axes[0].semilogy(profile.x[ok], y[ok], label=label)
    axes[0].set_ylabel("density")
    axes[0].legend(fontsize="small")
    axes[1].plot(profile.x, c["phi"])
    axes[1].set_ylabel("potential")
    axes[2].plot(profile.x, c["e_field"])
    axes[2].set_ylabel("electric field")
    axes[3].plot(profile.x, c["total_flux"])
    axes[3].set_ylabel("total flux")
    axes[3].set_xlabel("x'")
    for ax in axes:
        ax.axvline(0.0, color="0.6", lw=0.8)
    axes[0].set_title(name)
    fig.tight_layout()
    return fig


def _line_figure(spec: Figure):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    styles = {"dark": dict(color="k", marker="o"), "illuminated": dict(color="tab:red", marker="s")}
    for label, (x, y) in spec.series.items():
        ax.plot(x, y, label=label, ms=3, **styles.get(label, {}))
    if spec.logy:
        ax.set_yscale("symlog", linthresh=1e-12)
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    ax.set_title(spec.title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def _save_svg(fig, path: Path):
    import matplotlib
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "semelec", "svg.fonttype": "none"}):
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write(path, buf.getvalue())


def write_outputs(result: RunOutput, out_dir, manifest: dict, plots=True):
    """Write every CSV, SVG and the manifest; returns the list of file names."""
    path = preflight(out_dir)
    files = {}
    for name, profile in result.profiles.items():
        fname = f"{name}.csv"
        text = csv_text(SPATIAL_COLUMNS, profile.rows())
        _write(path / fname, text)
        files[fname] = text
    for table in result.tables:
        fname = f"{table.name}.csv"
        text = csv_text(table.header, table.rows)
        _write(path / fname, text)
        files[fname] = text
    svgs = []
    if plots:
        for name, profile in result.profiles.items():
            _save_svg(_profile_figure(name, profile), path / f"{name}.svg")
            svgs.append(f"{name}.svg")
        for spec in result.figures:
            _save_svg(_line_figure(spec), path / f"{spec.name}.svg")
            svgs.append(f"{spec.name}.svg")
    manifest = dict(manifest)
    manifest["files"] = {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(files.items())}
    manifest["figures"] = sorted(svgs)
    manifest["summary"] = result.summary
    manifest["failures"] = list(result.failures)
    _write(path / "manifest.json", json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return sorted(files) + sorted(svgs) + ["manifest.json"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


__all__ = [
    "CONVERGENCE_COLUMNS",
    "Figure",
    "IV_COLUMNS",
    "OutputError",
    "Profile",
    "RunOutput",
    "SPATIAL_COLUMNS",
    "Table",
    "csv_text",
    "nodal_flux",
    "preflight",
    "profile_from_reduced",
    "profile_from_state",
    "write_outputs",
]
