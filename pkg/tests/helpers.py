"""Shared test helpers (a plain module so every test imports one instance)."""

import functools

from semelec.harness.config import from_preset
from semelec.stationary import solve_steady
from semelec.transport import TransportSystem

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"{criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def preset_system(preset, illuminated=False, **solver):
    spec = from_preset(preset, solver=dict(solver)) if solver else from_preset(preset)
    system = TransportSystem(spec.device(illuminated), spec.mesh(), spec.config["solver"]["safety"])
    return spec, system


@functools.lru_cache(maxsize=None)
def steady(preset, illuminated=False, **solver):
    """Cached steady solve of a preset: ``(system, state, report)``."""
    spec, system = preset_system(preset, illuminated, **solver)
    e = spec.config["experiment"]
    state, report = solve_steady(system, system.initial_state(e["rho_n0"], e["rho_p0"]), spec.control())
    return system, state, report
