"""Compiled trajectory kernels versus the pure-numpy fallback.

Run with ``python benchmarks/bench_kernels.py [--spins N] [--repeat R]``.
Each kernel is timed on the largest magnetisation sector of a random bath
with the same schedule for both backends; the first numba call is excluded
(compilation or cache load).
"""
import argparse
import time

import numpy as np

from nuczeno import _kernels as K
from nuczeno.cli_io import draw_random_bath
from nuczeno.optics import OpticalParams
from nuczeno.trajectory import _block_initial_density, prepare_bath


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spins", type=int, default=6)
    ap.add_argument("--events", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if K.BACKEND != "numba":
        raise SystemExit("numba is not available; nothing to compare")

    rng = np.random.default_rng(0)
    spec = draw_random_bath(args.spins, 0.5, 0.25, 0.5, 0.01, 1.0, rng)
    optics = OpticalParams(g=5.0)
    block = max(prepare_bath(spec, optics).blocks, key=lambda b: len(b.deltas))
    n = len(block.deltas)
    events = np.sort(rng.uniform(0, 100.0, args.events))
    taus = np.linspace(0, 100.0, 101)
    shifts = np.zeros(len(events))
    uniforms = rng.random(len(events))
    opt = K.optics_tuple(optics)
    sigma0, o_h = _block_initial_density(block)
    phi0 = np.ascontiguousarray(block.w[0].conj())
    out = np.zeros(len(taus))
    flags = np.zeros(len(events), dtype=np.int64)

    cases = {
        "density": (
            lambda: K._density_traj_py(block.w, block.omega, o_h, sigma0, block.rmat, events, taus, out),
            lambda: K._density_traj_nb(block.w, block.omega, o_h, sigma0, block.rmat, events, taus, out),
        ),
        "wavefunction": (
            lambda: K._wave_traj_py(block.w, block.omega, block.o_v, phi0, block.deltas, shifts, opt, events, uniforms, taus, out),
            lambda: K._wave_traj_nb(block.w, block.omega, block.o_v, phi0, block.deltas, shifts, opt, events, uniforms, taus, out),
        ),
        "record": (
            lambda: K._record_traj_py(block.w, block.omega, phi0, block.deltas, shifts, opt, events, uniforms, flags),
            lambda: K._record_traj_nb(block.w, block.omega, phi0, block.deltas, shifts, opt, events, uniforms, flags),
        ),
    }
    print(f"sector dimension {n}, {len(events)} events, best of {args.repeat}")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, (py, nb) in cases.items():
        nb()  # compile / load cache
        t_py = best_of(py, args.repeat)
        t_nb = best_of(nb, args.repeat)
        print(f"{name:<14}{1e3 * t_py:>12.2f}{1e3 * t_nb:>12.2f}{t_py / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
