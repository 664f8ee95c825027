"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--steps N] [--repeat R]

Times forward propagation on the reduced neon model and one Krotov sweep
on the Lambda benchmark, and checks both backends agree.
"""
import argparse
from pathlib import Path
import time

import numpy as np

from raman_control._backend import compiled_kernels, python_kernels
from raman_control.krotov import KrotovConfig, TargetSpec, flattop_shape, optimize
from raman_control.model import load_model_file, neon_preset
from raman_control.propagator import evolve_states
from raman_control.pulses import GaussianPulseSpec, TimeGrid, sample_gaussian, superpose


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_evolve(kernels, steps, repeat):
    model = neon_preset("experimental")
    g = TimeGrid(-10.0, 20.0 / steps, steps + 1)
    p = superpose([sample_gaussian(GaussianPulseSpec(0.05, 45.5, 0.0, 0.0, 5.0), g),
                   sample_gaussian(GaussianPulseSpec(0.05, 27.0, 3.0, 0.0, 1.0), g)])
    return best_of(lambda: evolve_states(model, p.midpoints(), g.dt_au, model.ground_state(), steps, kernels)[1],
                   repeat)


def bench_krotov(kernels, steps, repeat):
    model = load_model_file(Path(__file__).resolve().parent.parent / "configs" / "lambda_model.toml")
    g = TimeGrid(0.0, 40.0 / steps, steps + 1)
    guess = superpose([sample_gaussian(GaussianPulseSpec(5e-4, 10.0, 20.0, 0.0, 12.0), g),
                       sample_gaussian(GaussianPulseSpec(5e-4, 7.0, 20.0, 0.0, 12.0), g)])
    cfg = KrotovConfig(lambda_=1.0, max_iterations=1, shape=flattop_shape(g, 5.0))
    return best_of(lambda: optimize(model, guess, model.ground_state(), TargetSpec.pure("t"), cfg,
                                    kernels=kernels).final_pulse.samples, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled_kernels is None:
        print("compiled extension not built; only the Python kernels are available")
        return 1
    print(f"{'case':<28}{'cython (s)':>12}{'python (s)':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in (("evolve, neon 78 states", bench_evolve), ("krotov iteration, Lambda", bench_krotov)):
        tc, a = fn(compiled_kernels, args.steps, args.repeat)
        tp, b = fn(python_kernels, args.steps, args.repeat)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:<28}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{diff:>12.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
