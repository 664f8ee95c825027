import os
import subprocess
import sys

import numpy as np
import pytest

from raman_control._backend import compiled_kernels, python_kernels
from raman_control.krotov import KrotovConfig, TargetSpec, flattop_shape, optimize
from raman_control.propagator import evolve_states
from raman_control.pulses import GaussianPulseSpec, TimeGrid, sample_gaussian

from conftest import random_model

pytestmark = pytest.mark.skipif(compiled_kernels is None, reason="compiled extension not built")


@pytest.mark.parametrize("seed", range(5))
def test_evolve_agrees(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 6, cap=bool(seed % 2))
    fields = rng.normal(size=400) * 0.05
    psi0 = model.ground_state()
    a, fa = evolve_states(model, fields, 0.5, psi0, 7, compiled_kernels)
    b, fb = evolve_states(model, fields, 0.5, psi0, 7, python_kernels)
    assert np.allclose(a, b, atol=1e-12, rtol=0)
    assert np.allclose(fa, fb, atol=1e-12, rtol=0)


def test_krotov_sweep_agrees():
    rng = np.random.default_rng(3)
    model = random_model(rng, 5)
    g = TimeGrid.from_span(0, 10, 0.01)
    guess = sample_gaussian(GaussianPulseSpec(0.02, float(model.basis[1].energy), 5.0, 0.0, 3.0), g)
    cfg = KrotovConfig(lambda_=0.5, max_iterations=3, shape=flattop_shape(g, 1.0))
    ra = optimize(model, guess, model.ground_state(), TargetSpec.pure("s1"), cfg, kernels=compiled_kernels)
    rb = optimize(model, guess, model.ground_state(), TargetSpec.pure("s1"), cfg, kernels=python_kernels)
    assert np.allclose(ra.final_pulse.samples, rb.final_pulse.samples, atol=1e-12, rtol=0)
    assert np.allclose(ra.j_history, rb.j_history, atol=1e-12, rtol=0)


@pytest.mark.parametrize("env,expected", [("python", "python"), ("", "cython")])
def test_backend_selection_from_environment(env, expected):
    out = subprocess.run([sys.executable, "-c", "import raman_control; print(raman_control.BACKEND)"],
                         env={**os.environ, "RAMAN_CONTROL_BACKEND": env}, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == expected
