"""Compiled vs NumPy forced-mode integrators on the same problem.

    python benchmarks/bench_forced_modes.py [--modes 2000] [--steps 4000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from recoherence import kernels


def problem(n_modes, n_steps, dt):
    k = np.linspace(0.0, 50.0, n_modes)
    omega = np.sqrt(k * k + 100.0)
    drive = -np.exp(-0.005 * k) * np.sqrt(omega / 2.0)
    t = 0.5 * dt * np.arange(2 * n_steps + 1)
    eps = np.sin(np.pi * t / t[-1]) ** 2
    return omega, drive, eps, np.zeros(n_modes, complex)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--modes", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    omega, drive, eps, a0 = problem(args.modes, args.steps, 1e-3)
    print(f"modes={args.modes} steps={args.steps} compiled={'yes' if kernels._compiled else 'no'}")
    for method in ("rk4", "etd"):
        dt = 0.1 / omega.max() if method == "rk4" else 1e-3
        run = {}
        for backend in ("python", "cython"):
            if backend == "cython" and kernels._compiled is None:
                continue
            t, out = best_of(
                lambda: kernels.integrate_forced_modes(omega, drive, eps, dt, 100, a0, method, backend), args.repeat
            )
            run[backend] = (t, out)
            print(f"{method:4s} {backend:7s} {t * 1e3:9.2f} ms")
        if len(run) == 2:
            diff = np.max(np.abs(run["python"][1] - run["cython"][1]))
            print(f"{method:4s} speedup {run['python'][0] / run['cython'][0]:.2f}x, max |diff| {diff:.2e}")


if __name__ == "__main__":
    main()
