"""Named device/case presets expressed in the config schema.

Physical constants and material parameters are in cm / s / V units;
geometry, bulk densities, initial densities and potentials are scaled.
Every preset starts from :data:`BASE` and overrides a few keys.
"""

from __future__ import annotations

import copy
import math

# Uniform absorption coefficient giving 90% absorption across the 1-unit
# semiconductor of Device I: exp(-sigma' * 1) = 0.1.
SIGMA_90 = math.log(10.0) / 1e-4  # cm^-1

BASE = {
    "device": {
        "x_left": -1.0,
        "x_right": 1.0,
        "eps_r_S": 11.9,
        "eps_r_E": 1000.0,
        "doping": 1.0,
        "mu_n": 1500.0,
        "mu_p": 450.0,
        "mu_r": 0.05,
        "mu_o": 0.2,
        "alpha_r": -1,
        "alpha_o": 0,
        "rho_r_bulk": 30.0,
        "rho_o_bulk": 29.0,
        "A_n": 2.8e-31,
        "A_p": 9.9e-32,
        "N_c": 2.8e19,
        "N_v": 1.04e19,
        "E_g0_eV": 1.17,
        "bandgap_alpha_eV": 4.73e-4,
        "bandgap_beta": 636.0,
        "T": 300.0,
        "q": 1.6e-19,
        "k_B_eV": 8.62e-5,
        "eps0": 8.85e-14,
        "extra_species": [],
    },
    "contacts": {
        "kind": "ohmic",
        "phi_app": 19.3,
        "phi_app_A": 0.0,
        "v_n": 5e6,
        "v_p": 5e6,
        "Phi_m": 2.4,
        "chi": 1.2,
        "semiconductor_type": "n",
    },
    "interface": {
        "model": "transfer",
        "k_et": 1e-21,
        "k_ht": 1e-17,
        "bv_k0": 0.0,
        "bv_alpha": 0.5,
        "bv_phi_e": 0.0,
        "normal": "into_semiconductor",
    },
    "illumination": {
        "gamma": 0,
        "G0": 1.2e17,
        "sigma": SIGMA_90,
    },
    "solver": {
        "n_per_region": 200,
        "grading_ratio": 30.0,
        "safety": 0.9,
        "gummel_tol": 1e-8,
        "schwarz_tol": 1e-8,
        "max_gummel": 500,
        "max_schwarz": 50,
        "damping": 1.0,
        "poisson_step": "nonlinear",
        "pseudo_time": 1.0,
        "pseudo_growth": 2.0,
        "warm_start_time": 0.05,
        "max_steps": 50_000_000,
    },
    "experiment": {
        "mode": "transient",
        "rho_n0": 2.0,
        "rho_p0": 1.0,
        "t_end": 0.05,
        "snapshot_times": [0.0, 0.05],
        "series_points": 50,
        "bias_grid": [],
        "illumination_states": ["dark"],
        "output_dir": "out",
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


DEVICE_II = {"device": {"x_left": -0.2, "x_right": 0.2}}

_SWEEP = [round(-58.0 + i * (73.5 - -58.0) / 30, 6) for i in range(31)]

_OVERRIDES = {
    "case_I_a_dark": {},
    "case_I_a_illuminated": {"illumination": {"gamma": 1}, "experiment": {"illumination_states": ["illuminated"]}},
    "case_I_b_dark": {
        "device": {"rho_r_bulk": 4.0, "rho_o_bulk": 5.0},
        "experiment": {"rho_n0": 2.5},
    },
    "case_I_b_illuminated": {
        "device": {"rho_r_bulk": 4.0, "rho_o_bulk": 5.0},
        "illumination": {"gamma": 1},
        "experiment": {"rho_n0": 2.5, "illumination_states": ["illuminated"]},
    },
    "case_I_c_dark": {
        "device": {"rho_r_bulk": 4.0, "rho_o_bulk": 5.0, "eps_r_E": 100.0},
        "experiment": {"rho_n0": 2.5},
    },
    "case_I_c_illuminated": {
        "device": {"rho_r_bulk": 4.0, "rho_o_bulk": 5.0, "eps_r_E": 100.0},
        "illumination": {"gamma": 1},
        "experiment": {"rho_n0": 2.5, "illumination_states": ["illuminated"]},
    },
    "case_II_a": _merge(
        DEVICE_II,
        {
            "device": {"rho_r_bulk": 30.0, "rho_o_bulk": 35.0},
            "experiment": {"mode": "schottky_compare", "illumination_states": ["dark", "illuminated"]},
        },
    ),
    "case_II_b": _merge(
        DEVICE_II,
        {
            "device": {"rho_r_bulk": 2.0, "rho_o_bulk": 3.0},
            "experiment": {"mode": "schottky_compare", "illumination_states": ["dark", "illuminated"]},
        },
    ),
    "case_IIp_a_forward": _merge(
        DEVICE_II,
        {"device": {"rho_r_bulk": 4.5, "rho_o_bulk": 5.0}, "contacts": {"phi_app": 35.0}},
    ),
    "case_IIp_a_reverse": _merge(
        DEVICE_II,
        {"device": {"rho_r_bulk": 4.5, "rho_o_bulk": 5.0}, "contacts": {"phi_app": -35.0}},
    ),
    "case_IIp_b": _merge(
        DEVICE_II,
        {
            "device": {"rho_r_bulk": 35.0, "rho_o_bulk": 30.0},
            "contacts": {"phi_app": 0.0},
            "experiment": {
                "mode": "iv_sweep",
                "bias_grid": _SWEEP,
                "illumination_states": ["dark", "illuminated"],
            },
        },
    ),
}

PRESETS = {name: _merge(BASE, over) for name, over in _OVERRIDES.items()}

DESCRIPTIONS = {
    "case_I_a_dark": "Device I, high redox densities (30 / 29), dark, bias 19.3",
    "case_I_a_illuminated": "Device I, high redox densities (30 / 29), illuminated, bias 19.3",
    "case_I_b_dark": "Device I, low redox densities (4 / 5), dark",
    "case_I_b_illuminated": "Device I, low redox densities (4 / 5), illuminated",
    "case_I_c_dark": "Case I(b) with electrolyte permittivity 100, dark",
    "case_I_c_illuminated": "Case I(b) with electrolyte permittivity 100, illuminated",
    "case_II_a": "Device II, redox 30 / 35, full model vs Schottky contact",
    "case_II_b": "Device II, redox 2 / 3, full model vs Schottky contact",
    "case_IIp_a_forward": "Device II, redox 4.5 / 5, forward bias 35",
    "case_IIp_a_reverse": "Device II, redox 4.5 / 5, reverse bias -35",
    "case_IIp_b": "Device II, redox 35 / 30, I-V sweep over [-58, 73.5]",
}

# Values not fixed by the source model, recorded in every manifest.
FREE_CHOICES = {
    "device.doping": "uniform n-type doping C' = 1 (neutral with the quoted initial densities)",
    "device.alpha_r/alpha_o": "reductant charge -1, oxidant neutral (alpha_o - alpha_r = 1)",
    "illumination.sigma": "uniform, 90% absorption across the Device I semiconductor",
    "illumination.x0": "light enters at the outer semiconductor boundary and travels towards the interface",
    "contacts.phi_app_A": "counter electrode grounded; bias applied at the current collector",
    "experiment.bias_grid (I-V sweep)": "each bias is the counter-electrode potential with the collector at 0, so zero bias is short circuit",
    "schottky.equilibrium": "contact densities rho_isc exp(+-barrier), the Ohmic rule with the barrier in place of the built-in potential",
    "contacts.phi_app (Device II)": "Case II uses the Case I bias 19.3",
    "solver.n_per_region/grading_ratio": "200 cells per region, largest/smallest cell ratio 30, from a grid study",
    "experiment.rho_n0/rho_p0 (Device II)": "Case I(a) initial densities",
}


def get_preset(name):
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        from ..errors import ConfigError

        raise ConfigError(f"unknown preset {name!r}; try list-presets") from None


def merge(base, over):
    return _merge(base, over)
