"""Pointwise material models on scaled quantities.

Recombination, photogeneration, Ohmic equilibrium densities and contact
barrier potentials. Everything here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError


class ContactKind(str, Enum):
    OHMIC = "ohmic"
    SCHOTTKY = "schottky"


@dataclass(frozen=True)
class RecombinationParams:
    """Auger coefficients (scaled) and intrinsic density (scaled)."""

    A_n: float
    A_p: float
    rho_isc: float

    def __post_init__(self):
        if self.rho_isc <= 0:
            raise ConfigError("intrinsic density must be positive")
        if self.A_n < 0 or self.A_p < 0:
            raise ConfigError("Auger coefficients must be nonnegative")


@dataclass(frozen=True)
class IlluminationParams:
    """Beer-Lambert illumination entering the semiconductor at ``x0``.

    ``sigma`` is a uniform absorption coefficient in scaled inverse length;
    ``theta0`` is +1 (ray travels towards +x) or -1.
    """

    gamma: int = 0
    G0: float = 0.0
    sigma: float = 0.0
    x0: float = 0.0
    theta0: int = 1

    def __post_init__(self):
        if self.gamma not in (0, 1):
            raise ConfigError("gamma must be 0 or 1")
        if self.theta0 not in (-1, 1):
            raise ConfigError("theta0 must be +1 or -1 in 1D")
        if self.sigma < 0 or self.G0 < 0:
            raise ConfigError("sigma and G0 must be nonnegative")


@dataclass(frozen=True)
class ContactParams:
    """Current-collector contact at the left end of the semiconductor.

    Potentials (``phi_app``, ``phi_app_A``) and velocities are scaled;
    ``Phi_m`` and ``chi`` are kept in volts because the barrier formula
    mixes them with the band gap.
    """

    kind: ContactKind = ContactKind.OHMIC
    phi_app: float = 0.0
    phi_app_A: float = 0.0
    v_n: float = 0.0
    v_p: float = 0.0
    Phi_m: float = 0.0
    chi: float = 0.0
    semiconductor_type: str = "n"

    def __post_init__(self):
        object.__setattr__(self, "kind", ContactKind(self.kind))
        if self.semiconductor_type not in ("n", "p"):
            raise ConfigError("semiconductor_type must be 'n' or 'p'")
        if self.kind is ContactKind.SCHOTTKY:
            if self.v_n < 0 or self.v_p < 0:
                raise ConfigError("Schottky recombination velocities must be >= 0")


@dataclass(frozen=True)
class InterfaceParams:
    """Interface reaction model (all scaled).

    ``model="transfer"`` uses the electron / hole transfer rates; the
    alternative ``"butler_volmer"`` drives the redox pair with rate constant
    ``bv_k0``, symmetry factor ``bv_alpha`` and equilibrium potential
    ``bv_phi_e``.

    The rate laws give normal fluxes along a unit normal; ``normal`` says
    where that normal points. ``"into_semiconductor"`` (the electrolyte's
    outward normal, so a flux is a loss rate of the electrolyte species)
    makes every channel relax towards equilibrium; ``"into_electrolyte"``
    reverses all four interface fluxes.
    """

    k_et: float
    k_ht: float
    model: str = "transfer"
    bv_k0: float = 0.0
    bv_alpha: float = 0.5
    bv_phi_e: float = 0.0
    normal: str = "into_semiconductor"

    def __post_init__(self):
        if self.k_et < 0 or self.k_ht < 0:
            raise ConfigError("transfer rates must be nonnegative")
        if self.model not in ("transfer", "butler_volmer"):
            raise ConfigError(f"unknown interface model {self.model!r}")
        if not 0.0 < self.bv_alpha < 1.0:
            raise ConfigError("Butler-Volmer symmetry factor must lie in (0, 1)")
        if self.bv_k0 < 0:
            raise ConfigError("Butler-Volmer rate constant must be nonnegative")
        if self.normal not in ("into_semiconductor", "into_electrolyte"):
            raise ConfigError(f"unknown interface normal {self.normal!r}")

    @property
    def sign(self):
        """Factor turning a rate-law flux into a flux towards the electrolyte."""
        return -1.0 if self.normal == "into_semiconductor" else 1.0


def band_gap(T, E_g0, alpha_bg, beta_bg):
    """Varshni band gap ``E_g0 - alpha T^2 / (T + beta)`` (same energy unit as E_g0)."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("temperature must be nonnegative")
    return E_g0 - alpha_bg * T * T / (T + beta_bg)


def intrinsic_density(T, N_c, N_v, E_g, k_B):
    """Intrinsic carrier density in cm^-3.

    ``E_g`` and ``k_B`` must share an energy unit (J and J/K in the presets).
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    return np.sqrt(N_c * N_v) * (T / 300.0) ** 1.5 * np.exp(-E_g / (2.0 * k_B * T))


def auger_recombination(rho_n, rho_p, params: RecombinationParams):
    """Auger rate ``(A_n n + A_p p)(n_i^2 - n p)``.

    Kept with the sign used in the model equations: the continuity equations
    subtract this rate.
    """
    rho_n = np.asarray(rho_n, dtype=float)
    rho_p = np.asarray(rho_p, dtype=float)
    return (params.A_n * rho_n + params.A_p * rho_p) * (
        params.rho_isc**2 - rho_n * rho_p
    )


def generation_profile(x, illum: IlluminationParams, x_left, x_right):
    """Nodal photogeneration rate on semiconductor nodes ``x``.

    The optical depth is integrated with the cumulative trapezoid rule along
    the ray starting at ``x0`` (which must be an endpoint of the
    semiconductor segment ``[x_left, x_right]``).
    """
    x = np.asarray(x, dtype=float)
    if not (np.isclose(illum.x0, x_left) or np.isclose(illum.x0, x_right)):
        raise ConfigError(f"illumination entry point {illum.x0} is not on the semiconductor boundary")
    if illum.gamma == 0 or illum.G0 == 0.0 or illum.sigma == 0.0:
        return np.zeros_like(x)
    sigma = np.full_like(x, illum.sigma)
    s = (x - illum.x0) * illum.theta0
    order = np.argsort(s)
    s_sorted = s[order]
    if s_sorted[0] < -1e-12 * max(1.0, abs(x_right - x_left)):
        raise ConfigError("illumination ray points out of the semiconductor")
    sig_sorted = sigma[order]
    depth = np.zeros_like(s_sorted)
    depth[1:] = np.cumsum(0.5 * (sig_sorted[1:] + sig_sorted[:-1]) * np.diff(s_sorted))
    g = np.empty_like(x)
    g[order] = sig_sorted * illum.G0 * np.exp(-depth)
    return g


def ohmic_equilibrium(C, rho_isc):
    """Return ``(rho_n_e, rho_p_e)`` solving ``C + p - n = 0`` and ``n p = n_i^2``.

    The smaller root is evaluated as ``n_i^2 / larger`` to avoid cancellation
    when ``|C| >> n_i``.
    """
    C = np.asarray(C, dtype=float)
    root = np.sqrt(C * C + 4.0 * rho_isc * rho_isc)
    big = 0.5 * (root + np.abs(C))
    small = rho_isc * rho_isc / big
    rho_n = np.where(C >= 0, big, small)
    rho_p = np.where(C >= 0, small, big)
    if rho_n.ndim == 0:
        return float(rho_n), float(rho_p)
    return rho_n, rho_p


def built_in_potential(rho_n_e, rho_isc):
    """Scaled built-in potential ``ln(rho_n_e / rho_isc)``."""
    if rho_n_e <= 0 or rho_isc <= 0:
        raise ValueError("densities must be positive")
    return float(np.log(rho_n_e / rho_isc))


def schottky_barrier(contact: ContactParams, E_g_volts):
    """Barrier height in volts (unscaled): ``Phi_m - chi`` or ``E_g/q - (Phi_m - chi)``."""
    if contact.kind is not ContactKind.SCHOTTKY:
        raise ValueError("barrier height requested for a non-Schottky contact")
    if contact.semiconductor_type == "n":
        return contact.Phi_m - contact.chi
    return E_g_volts - (contact.Phi_m - contact.chi)
