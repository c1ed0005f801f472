"""Config loading, validation and device construction.

Config files are JSON documents with the sections ``device``, ``contacts``,
``interface``, ``illumination``, ``solver`` and ``experiment``, plus an
optional top-level ``preset`` naming the base they override. Unknown keys
are rejected with their full path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..mesh import build_mesh
from ..scales import CharacteristicScales, DeviceSI, PhysicalConstants, SpeciesSI, nondimensionalize
from ..stationary import IterationControl
from .presets import BASE, get_preset, merge

MODES = ("transient", "stationary", "iv_sweep", "schottky_compare")

_NUMBER = (int, float)
_SCHEMA = {
    "device": {
        "x_left": _NUMBER,
        "x_right": _NUMBER,
        "eps_r_S": _NUMBER,
        "eps_r_E": _NUMBER,
        "doping": (int, float, list),
        "mu_n": _NUMBER,
        "mu_p": _NUMBER,
        "mu_r": _NUMBER,
        "mu_o": _NUMBER,
        "alpha_r": int,
        "alpha_o": int,
        "rho_r_bulk": _NUMBER,
        "rho_o_bulk": _NUMBER,
        "A_n": _NUMBER,
        "A_p": _NUMBER,
        "N_c": _NUMBER,
        "N_v": _NUMBER,
        "E_g0_eV": _NUMBER,
        "bandgap_alpha_eV": _NUMBER,
        "bandgap_beta": _NUMBER,
        "T": _NUMBER,
        "q": _NUMBER,
        "k_B_eV": _NUMBER,
        "eps0": _NUMBER,
        "extra_species": list,
    },
    "contacts": {
        "kind": str,
        "phi_app": _NUMBER,
        "phi_app_A": _NUMBER,
        "v_n": _NUMBER,
        "v_p": _NUMBER,
        "Phi_m": _NUMBER,
        "chi": _NUMBER,
        "semiconductor_type": str,
    },
    "interface": {
        "model": str,
        "k_et": _NUMBER,
        "k_ht": _NUMBER,
        "bv_k0": _NUMBER,
        "normal": str,
        "bv_alpha": _NUMBER,
        "bv_phi_e": _NUMBER,
    },
    "illumination": {"gamma": int, "G0": _NUMBER, "sigma": _NUMBER},
    "solver": {
        "n_per_region": int,
        "grading_ratio": _NUMBER,
        "safety": _NUMBER,
        "gummel_tol": _NUMBER,
        "schwarz_tol": _NUMBER,
        "max_gummel": int,
        "max_schwarz": int,
        "damping": _NUMBER,
        "poisson_step": str,
        "pseudo_time": _NUMBER,
        "pseudo_growth": _NUMBER,
        "warm_start_time": _NUMBER,
        "max_steps": int,
    },
    "experiment": {
        "mode": str,
        "rho_n0": _NUMBER,
        "rho_p0": _NUMBER,
        "t_end": _NUMBER,
        "snapshot_times": list,
        "series_points": int,
        "bias_grid": (list, dict),
        "illumination_states": list,
        "output_dir": str,
    },
}
_EXTRA_KEYS = {"name": str, "alpha": int, "mu": _NUMBER, "bulk": _NUMBER}


@dataclass
class ExperimentSpec:
    """A fully resolved and validated run description."""

    config: dict
    preset: str | None = None
    source: str | None = None
    notes: list = field(default_factory=list)

    @property
    def mode(self):
        return self.config["experiment"]["mode"]

    @property
    def output_dir(self):
        return Path(self.config["experiment"]["output_dir"])

    @property
    def bias_grid(self):
        return expand_bias_grid(self.config["experiment"]["bias_grid"])

    @property
    def illumination_states(self):
        return list(self.config["experiment"]["illumination_states"])

    def control(self):
        s = self.config["solver"]
        return IterationControl(
            gummel_tol=s["gummel_tol"],
            schwarz_tol=s["schwarz_tol"],
            max_gummel=s["max_gummel"],
            max_schwarz=s["max_schwarz"],
            damping=s["damping"],
            warm_start_time=s["warm_start_time"],
            poisson_step=s["poisson_step"],
            max_steps=s["max_steps"],
            pseudo_time=s["pseudo_time"],
            pseudo_growth=s["pseudo_growth"],
        )

    def mesh(self):
        d, s = self.config["device"], self.config["solver"]
        return build_mesh(d["x_left"], d["x_right"], s["n_per_region"], s["grading_ratio"])

    def device(self, illuminated=None):
        cfg = self.config
        if illuminated is not None:
            cfg = merge(cfg, {"illumination": {"gamma": int(bool(illuminated))}})
        return build_device(cfg)

    def with_overrides(self, over):
        return ExperimentSpec(validate(merge(self.config, over)), self.preset, self.source, list(self.notes))


def expand_bias_grid(grid):
    """A list of biases, or ``{"start", "stop", "num"}`` for an even grid."""
    if isinstance(grid, dict):
        unknown = set(grid) - {"start", "stop", "num"}
        if unknown:
            raise ConfigError(f"experiment.bias_grid: unknown keys {sorted(unknown)}")
        try:
            start, stop, num = float(grid["start"]), float(grid["stop"]), int(grid["num"])
        except KeyError as exc:
            raise ConfigError(f"experiment.bias_grid: missing {exc.args[0]!r}") from None
        if num < 2:
            raise ConfigError("experiment.bias_grid: num must be >= 2")
        return [start + i * (stop - start) / (num - 1) for i in range(num)]
    return [float(v) for v in grid]


def _check_types(cfg, schema, path):
    for key, val in cfg.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key {where!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where} must be a section (object)")
            _check_types(val, expected, where)
        elif isinstance(val, bool) or not isinstance(val, expected):
            raise ConfigError(f"{where} has the wrong type ({type(val).__name__})")


def validate(cfg):
    """Check a merged config in place-free fashion; returns it unchanged."""
    _check_types(cfg, _SCHEMA, "")
    missing = [
        f"{sec}.{key}" for sec, keys in _SCHEMA.items() for key in keys if key not in cfg.get(sec, {})
    ]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")
    for i, extra in enumerate(cfg["device"]["extra_species"]):
        if not isinstance(extra, dict):
            raise ConfigError(f"device.extra_species[{i}] must be an object")
        _check_types(extra, _EXTRA_KEYS, f"device.extra_species[{i}]")
        if set(extra) != set(_EXTRA_KEYS):
            raise ConfigError(f"device.extra_species[{i}] needs keys {sorted(_EXTRA_KEYS)}")
        if extra["name"] in ("n", "p", "r", "o"):
            raise ConfigError(f"device.extra_species[{i}]: name {extra['name']!r} is reserved")
    exp = cfg["experiment"]
    if exp["mode"] not in MODES:
        raise ConfigError(f"experiment.mode must be one of {MODES}")
    for st in exp["illumination_states"]:
        if st not in ("dark", "illuminated"):
            raise ConfigError("experiment.illumination_states entries must be 'dark' or 'illuminated'")
    if not exp["illumination_states"]:
        raise ConfigError("experiment.illumination_states must not be empty")
    grid = expand_bias_grid(exp["bias_grid"])
    if exp["mode"] == "iv_sweep" and not grid:
        raise ConfigError("experiment.bias_grid must be nonempty for iv_sweep")
    if exp["series_points"] < 1:
        raise ConfigError("experiment.series_points must be >= 1")
    if exp["t_end"] < 0:
        raise ConfigError("experiment.t_end must be >= 0")
    if any(not isinstance(t, _NUMBER) or t < 0 for t in exp["snapshot_times"]):
        raise ConfigError("experiment.snapshot_times must be nonnegative numbers")
    if cfg["solver"]["poisson_step"] not in ("nonlinear", "newton", "linear"):
        raise ConfigError("solver.poisson_step must be 'nonlinear', 'newton' or 'linear'")
    # building the device and solver settings runs the remaining range checks
    build_device(cfg)
    ExperimentSpec(cfg).control()
    ExperimentSpec(cfg).mesh()
    return cfg


def _doping_segments(doping, x_left_cm):
    if isinstance(doping, _NUMBER):
        return ((x_left_cm, 0.0, float(doping) * 1e16),)
    segs = []
    for seg in doping:
        if not (isinstance(seg, list) and len(seg) == 3 and all(isinstance(v, _NUMBER) for v in seg)):
            raise ConfigError("device.doping segments must be [x_lo, x_hi, C'] triples")
        segs.append(tuple(float(v) for v in seg))
    return tuple(segs)


def build_device(cfg, scales: CharacteristicScales | None = None):
    """Build the scaled device for a validated config."""
    d, c, i, il = cfg["device"], cfg["contacts"], cfg["interface"], cfg["illumination"]
    q = d["q"]
    constants = PhysicalConstants(q=q, k_B=d["k_B_eV"] * q, eps0=d["eps0"], T=d["T"])
    scales = scales or CharacteristicScales.default(constants)
    l, C, V = scales.l_star, scales.C_star, scales.Phi_star
    if isinstance(d["doping"], list):
        doping = tuple((lo * l, hi * l, val * C) for lo, hi, val in _doping_segments(d["doping"], 0))
    else:
        doping = ((d["x_left"] * l, 0.0, float(d["doping"]) * C),)
    extras = tuple(
        SpeciesSI(e["name"], e["alpha"], e["mu"], e["bulk"] * C) for e in d["extra_species"]
    )
    try:
        si = DeviceSI(
            x_left=d["x_left"] * l,
            x_right=d["x_right"] * l,
            eps_r_S=d["eps_r_S"],
            eps_r_E=d["eps_r_E"],
            electron=SpeciesSI("n", -1, d["mu_n"]),
            hole=SpeciesSI("p", 1, d["mu_p"]),
            reductant=SpeciesSI("r", d["alpha_r"], d["mu_r"], d["rho_r_bulk"] * C),
            oxidant=SpeciesSI("o", d["alpha_o"], d["mu_o"], d["rho_o_bulk"] * C),
            doping=doping,
            A_n=d["A_n"],
            A_p=d["A_p"],
            N_c=d["N_c"],
            N_v=d["N_v"],
            E_g0=d["E_g0_eV"] * q,
            alpha_bg=d["bandgap_alpha_eV"] * q,
            beta_bg=d["bandgap_beta"],
            contact_kind=c["kind"],
            phi_app=c["phi_app"] * V,
            phi_app_A=c["phi_app_A"] * V,
            v_n=c["v_n"],
            v_p=c["v_p"],
            Phi_m=c["Phi_m"],
            chi=c["chi"],
            semiconductor_type=c["semiconductor_type"],
            k_et=i["k_et"],
            k_ht=i["k_ht"],
            gamma=il["gamma"],
            G0=il["G0"],
            sigma=il["sigma"],
            x0=d["x_left"] * l,
            theta0=1,
            extra_species=extras,
            constants=constants,
        )
        dev = nondimensionalize(si, scales)
        return dev.with_interface(
            model=i["model"],
            bv_k0=i["bv_k0"],
            bv_alpha=i["bv_alpha"],
            bv_phi_e=i["bv_phi_e"],
            normal=i["normal"],
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_document(text, source="<config>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    return doc


def resolve(doc, preset=None, source=None) -> ExperimentSpec:
    """Merge a parsed document onto its preset (CLI ``--preset`` wins) and validate."""
    doc = dict(doc)
    name = preset or doc.pop("preset", None)
    doc.pop("preset", None)
    base = get_preset(name) if name else BASE
    unknown = set(doc) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    cfg = validate(merge(base, doc))
    return ExperimentSpec(cfg, preset=name, source=source)


def load_config(path, preset=None) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return resolve(parse_document(text, str(path)), preset=preset, source=str(path))


def from_preset(name, **section_overrides) -> ExperimentSpec:
    return resolve(section_overrides, preset=name, source=f"preset:{name}")
