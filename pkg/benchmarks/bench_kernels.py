"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--cells 200] [--steps 2000] [--repeat 3]

Both backends run the same work on a preset system: forward-Euler steps
(rates, potential solve and step-size rule per step), a batch of M-matrix
solves and a batch of tridiagonal solves. Results agree to round-off; the
table reports the best wall time of ``--repeat`` runs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from semelec import _kernels_py
from semelec.harness.config import from_preset
from semelec.kernels import BACKEND, backend
from semelec.transport import TransportSystem


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _euler(kernels, system, state, steps):
    def run():
        rho_S, rho_E = state.stacked()
        phi = state.phi.copy()
        kernels.euler_run(system, rho_S, rho_E, phi, 0.0, np.inf, steps, 0.0)
        return rho_S

    return run


def _mmatrix(kernels, n, batch, rng):
    a, b = rng.uniform(0.1, 1.0, (2, n - 1))
    extra, rhs = rng.uniform(0.0, 1.0, (2, n))

    def run():
        for _ in range(batch):
            kernels.mmatrix_solve(a, b, extra, rhs, 1.0, 2.0)

    return run


def _tridiag(kernels, n, batch, rng):
    off = rng.uniform(-1.0, -0.1, (2, n))
    diag = 2.5 + rng.uniform(0.0, 1.0, n)
    rhs = rng.normal(size=n)

    def run():
        for _ in range(batch):
            kernels.tridiag_solve(off[0], diag, off[1], rhs)

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=200, help="cells per region")
    ap.add_argument("--steps", type=int, default=2000, help="forward-Euler steps")
    ap.add_argument("--batch", type=int, default=2000, help="linear solves per batch")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if BACKEND != "compiled":
        raise SystemExit("compiled extension not available; build it with `pip install -e . --no-build-isolation`")

    spec = from_preset("case_I_a_dark", solver={"n_per_region": args.cells})
    system = TransportSystem(spec.device(), spec.mesh())
    state = system.initial_state(2.0, 1.0)
    rng = np.random.default_rng(0)
    n = system.n_nodes
    cases = [
        (f"euler_run ({args.steps} steps, {n} nodes)", lambda k: _euler(k, system, state, args.steps)),
        (f"mmatrix_solve x{args.batch} (n={n})", lambda k: _mmatrix(k, n, args.batch, rng)),
        (f"tridiag_solve x{args.batch} (n={n})", lambda k: _tridiag(k, n, args.batch, rng)),
    ]
    print(f"{'kernel':44s} {'compiled [s]':>13s} {'numpy [s]':>11s} {'speedup':>8s}")
    for label, make in cases:
        fast = _best(make(backend), args.repeat)
        slow = _best(make(_kernels_py), args.repeat)
        print(f"{label:44s} {fast:13.4f} {slow:11.4f} {slow / fast:7.1f}x")
    a = _euler(backend, system, state, 50)()
    b = _euler(_kernels_py, system, state, 50)()
    print(f"max relative difference after 50 steps: {np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)):.1e}")


if __name__ == "__main__":
    main()
