"""Physical constants, characteristic scales and SI <-> scaled conversion.

All solvers work on the nondimensional system. Densities are scaled by
``C_star``, lengths by ``l_star``, times by ``t_star`` and potentials by
``Phi_star`` (the thermal voltage by default), so the Einstein relation
reads ``D' = mu'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError
from .physics import (
    ContactKind,
    ContactParams,
    IlluminationParams,
    InterfaceParams,
    RecombinationParams,
    band_gap,
    intrinsic_density,
    schottky_barrier,
)

Q_TABLE = 1.6e-19


def thermal_voltage(T, k_B=8.62e-5 * Q_TABLE, q=Q_TABLE):
    """Thermal voltage ``k_B T / q`` in volts."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    return k_B * T / q


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants in the cm / s / V / A unit system (defaults from the parameter table)."""

    q: float = Q_TABLE
    k_B: float = 8.62e-5 * Q_TABLE
    eps0: float = 8.85e-14
    T: float = 300.0

    def __post_init__(self):
        for name in ("q", "k_B", "eps0", "T"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"physical constant {name} must be positive")

    @property
    def U_T(self):
        return thermal_voltage(self.T, self.k_B, self.q)


@dataclass(frozen=True)
class CharacteristicScales:
    l_star: float = 1e-4
    t_star: float = 1e-12
    Phi_star: float = 8.62e-5 * 300.0
    C_star: float = 1e16

    def __post_init__(self):
        for name in ("l_star", "t_star", "Phi_star", "C_star"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"characteristic scale {name} must be positive")

    @classmethod
    def default(cls, constants: PhysicalConstants | None = None):
        constants = constants or PhysicalConstants()
        return cls(Phi_star=constants.U_T)

    @classmethod
    def identity(cls):
        return cls(1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class SpeciesParams:
    """One transported species in scaled form."""

    name: str
    alpha: int
    D: float
    mu: float
    region: str
    bulk_density: Optional[float] = None

    def __post_init__(self):
        if self.region not in ("S", "E"):
            raise ConfigError(f"species {self.name}: region must be 'S' or 'E'")
        if not (self.D > 0 and self.mu > 0):
            raise ConfigError(f"species {self.name}: D and mu must be positive")
        if self.region == "E" and self.bulk_density is None:
            raise ConfigError(f"electrolyte species {self.name} needs a bulk density")


@dataclass(frozen=True)
class SpeciesSI:
    name: str
    alpha: int
    mu: float  # cm^2 / (V s)
    bulk_density: Optional[float] = None  # cm^-3, electrolyte species only


@dataclass(frozen=True)
class DeviceSI:
    """Device description in SI-like (cm, s, V, A) units.

    ``doping`` is a tuple of ``(x_lo, x_hi, C)`` segments in cm / cm^-3
    covering the semiconductor; the last matching segment wins.
    ``extra_species`` are electrolyte species that carry no reactions and
    see an insulating interface.
    """

    x_left: float
    x_right: float
    eps_r_S: float
    eps_r_E: float
    electron: SpeciesSI
    hole: SpeciesSI
    reductant: SpeciesSI
    oxidant: SpeciesSI
    doping: tuple
    A_n: float
    A_p: float
    N_c: float
    N_v: float
    E_g0: float  # J
    alpha_bg: float  # J / K
    beta_bg: float  # K
    contact_kind: str = "ohmic"
    phi_app: float = 0.0  # V, applied at the current collector
    phi_app_A: float = 0.0  # V, counter electrode
    v_n: float = 0.0  # cm / s
    v_p: float = 0.0
    Phi_m: float = 0.0  # V
    chi: float = 0.0  # V
    semiconductor_type: str = "n"
    k_et: Optional[float] = None  # cm^4 / s
    k_ht: Optional[float] = None
    gamma: int = 0
    G0: float = 0.0  # cm^-2 s^-1
    sigma: float = 0.0  # cm^-1
    x0: Optional[float] = None  # cm, defaults to x_left
    theta0: int = 1
    extra_species: tuple = ()
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)


@dataclass(frozen=True)
class ScaledDevice:
    """Fully nondimensional device; immutable once built."""

    x_left: float
    x_right: float
    eps_r_S: float
    eps_r_E: float
    lambda_S_sq: float
    lambda_E_sq: float
    species: tuple
    doping: tuple
    contacts: ContactParams
    interface: InterfaceParams
    illumination: IlluminationParams
    recomb: RecombinationParams
    phi_stky: float = 0.0
    E_g_volts: float = 0.0

    def __post_init__(self):
        if not self.x_left < 0.0 < self.x_right:
            raise ConfigError("the interface must lie strictly inside the device (x_left < 0 < x_right)")
        names = [s.name for s in self.species]
        for required in ("n", "p", "r", "o"):
            if required not in names:
                raise ConfigError(f"missing species {required!r}")
        sp = self.species_by_name
        if sp["n"].alpha != -1 or sp["p"].alpha != 1:
            raise ConfigError("electron / hole charge numbers must be -1 / +1")
        if sp["o"].alpha - sp["r"].alpha != 1:
            raise ConfigError("redox charge numbers must satisfy alpha_o - alpha_r = 1")

    @property
    def species_by_name(self):
        return {s.name: s for s in self.species}

    @property
    def semiconductor_species(self):
        return tuple(s for s in self.species if s.region == "S")

    @property
    def electrolyte_species(self):
        return tuple(s for s in self.species if s.region == "E")

    def doping_at(self, x):
        """Nodal doping on semiconductor coordinates ``x`` (scaled)."""
        x = np.asarray(x, dtype=float)
        C = np.zeros_like(x)
        for lo, hi, value in self.doping:
            mask = (x >= lo - 1e-12) & (x <= hi + 1e-12)
            C[mask] = value
        return C

    def with_changes(self, **changes):
        return replace(self, **changes)

    def with_contacts(self, **changes):
        return replace(self, contacts=replace(self.contacts, **changes))

    def with_interface(self, **changes):
        return replace(self, interface=replace(self.interface, **changes))

    def with_illumination(self, **changes):
        return replace(self, illumination=replace(self.illumination, **changes))

    def with_bulk(self, **bulk):
        """Return a copy with new electrolyte bulk densities, e.g. ``with_bulk(r=4.0, o=5.0)``."""
        species = tuple(
            replace(s, bulk_density=bulk[s.name]) if s.name in bulk else s
            for s in self.species
        )
        return replace(self, species=species)

    def with_eps_r_E(self, eps_r_E):
        ratio = eps_r_E / self.eps_r_E
        return replace(self, eps_r_E=eps_r_E, lambda_E_sq=self.lambda_E_sq * ratio)


def debye_length_sq(eps_r, constants: PhysicalConstants, scales: CharacteristicScales):
    """Squared scaled Debye length ``Phi* eps0 eps_r / (q C* l*^2)``."""
    return scales.Phi_star * constants.eps0 * eps_r / (constants.q * scales.C_star * scales.l_star**2)


def _scale_species(sp: SpeciesSI, region, U_T, scales: CharacteristicScales):
    D = U_T * sp.mu
    bulk = None if sp.bulk_density is None else sp.bulk_density / scales.C_star
    return SpeciesParams(
        name=sp.name,
        alpha=int(sp.alpha),
        D=D * scales.t_star / scales.l_star**2,
        mu=sp.mu * scales.t_star * scales.Phi_star / scales.l_star**2,
        region=region,
        bulk_density=bulk,
    )


def nondimensionalize(dev: DeviceSI, scales: CharacteristicScales | None = None) -> ScaledDevice:
    """Rescale an SI device description into the system the solvers integrate."""
    c = dev.constants
    scales = scales or CharacteristicScales.default(c)
    if not dev.x_left < 0.0 < dev.x_right:
        raise ConfigError("geometry must contain the interface at x = 0")
    if dev.k_et is None or dev.k_ht is None:
        raise ConfigError("interface transfer rates k_et / k_ht are required for the redox pair")
    for name in ("eps_r_S", "eps_r_E", "N_c", "N_v", "E_g0"):
        if not getattr(dev, name) > 0:
            raise ConfigError(f"{name} must be positive")

    U_T = c.U_T
    l, t, V, Cs = scales.l_star, scales.t_star, scales.Phi_star, scales.C_star

    species = [
        _scale_species(dev.electron, "S", U_T, scales),
        _scale_species(dev.hole, "S", U_T, scales),
        _scale_species(dev.reductant, "E", U_T, scales),
        _scale_species(dev.oxidant, "E", U_T, scales),
    ]
    for extra in dev.extra_species:
        species.append(_scale_species(extra, "E", U_T, scales))
    species = [
        replace(s, name=n) for s, n in zip(species[:4], ("n", "p", "r", "o"))
    ] + species[4:]

    E_g = band_gap(c.T, dev.E_g0, dev.alpha_bg, dev.beta_bg)
    n_i = intrinsic_density(c.T, dev.N_c, dev.N_v, E_g, c.k_B)
    recomb = RecombinationParams(
        A_n=t * Cs**2 * dev.A_n,
        A_p=t * Cs**2 * dev.A_p,
        rho_isc=n_i / Cs,
    )

    contacts = ContactParams(
        kind=ContactKind(dev.contact_kind),
        phi_app=dev.phi_app / V,
        phi_app_A=dev.phi_app_A / V,
        v_n=dev.v_n * t / l,
        v_p=dev.v_p * t / l,
        Phi_m=dev.Phi_m,
        chi=dev.chi,
        semiconductor_type=dev.semiconductor_type,
    )
    phi_stky = 0.0
    if contacts.kind is ContactKind.SCHOTTKY:
        phi_stky = schottky_barrier(contacts, E_g / c.q) / V

    interface = InterfaceParams(k_et=dev.k_et * t * Cs / l, k_ht=dev.k_ht * t * Cs / l)

    x0 = dev.x_left if dev.x0 is None else dev.x0
    illumination = IlluminationParams(
        gamma=dev.gamma,
        G0=dev.G0 * t / (l * Cs),
        sigma=dev.sigma * l,
        x0=x0 / l,
        theta0=dev.theta0,
    )

    doping = tuple((lo / l, hi / l, C / Cs) for lo, hi, C in dev.doping)

    return ScaledDevice(
        x_left=dev.x_left / l,
        x_right=dev.x_right / l,
        eps_r_S=dev.eps_r_S,
        eps_r_E=dev.eps_r_E,
        lambda_S_sq=debye_length_sq(dev.eps_r_S, c, scales),
        lambda_E_sq=debye_length_sq(dev.eps_r_E, c, scales),
        species=tuple(species),
        doping=doping,
        contacts=contacts,
        interface=interface,
        illumination=illumination,
        recomb=recomb,
        phi_stky=phi_stky,
        E_g_volts=E_g / c.q,
    )


@dataclass(frozen=True)
class SIState:
    """A carrier state in physical units (cm, s, V, cm^-3)."""

    t: float
    x: np.ndarray
    rho: dict
    phi: np.ndarray


def redimensionalize(state, x, scales: CharacteristicScales) -> SIState:
    """Convert a scaled state (any object with ``t``, ``phi`` and ``densities()``) to SI."""
    rho = {name: np.asarray(v, dtype=float) * scales.C_star for name, v in state.densities().items()}
    return SIState(
        t=state.t * scales.t_star,
        x=np.asarray(x, dtype=float) * scales.l_star,
        rho=rho,
        phi=np.asarray(state.phi, dtype=float) * scales.Phi_star,
    )


def nondimensionalize_state(si: SIState, scales: CharacteristicScales):
    """Inverse of :func:`redimensionalize`; returns ``(CarrierState, x')``."""
    from .transport import CarrierState

    rho = {name: v / scales.C_star for name, v in si.rho.items()}
    extras = tuple(v for k, v in rho.items() if k not in ("n", "p", "r", "o"))
    state = CarrierState(
        t=si.t / scales.t_star,
        rho_n=rho["n"],
        rho_p=rho["p"],
        rho_r=rho["r"],
        rho_o=rho["o"],
        rho_extra=extras,
        phi=si.phi / scales.Phi_star,
        extra_names=tuple(k for k in rho if k not in ("n", "p", "r", "o")),
    )
    return state, si.x / scales.l_star
