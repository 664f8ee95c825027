import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from raman_control.errors import NumericalAbort
from raman_control.model import neon_preset
from raman_control.propagator import (default_stride, propagate_backward, propagate_forward,
                                      save_trajectory)
from raman_control.pulses import GaussianPulseSpec, Pulse, TimeGrid, sample_gaussian, superpose
from raman_control.units import AU_TIME_FS, HARTREE_EV, HBAR_EV_FS

from conftest import random_model, two_level


def test_rabi_constant_field(kernels):
    # degenerate pair under a constant field: P_e = sin^2(Omega t / 2), Omega = 2 z E
    z, e0 = 0.8, 0.01
    m = two_level(0.0, 0.0, z)
    g = TimeGrid.from_span(0.0, 50.0, 0.01)
    traj = propagate_forward(m, Pulse(g, np.full(g.n_points, e0)), m.ground_state(), kernels=kernels)
    omega = 2 * z * e0
    ref = np.sin(omega * (traj.times / AU_TIME_FS) / 2) ** 2
    assert np.max(np.abs(traj.populations["target"] - ref)) < 1e-10


def test_free_evolution_phases(kernels):
    rng = np.random.default_rng(1)
    m = random_model(rng, 6).without_bound_decay()
    m = m.with_widths({s.label: 0.0 for s in m.basis})
    psi0 = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi0 /= np.linalg.norm(psi0)
    g = TimeGrid.from_span(0.0, 20.0, 0.01)
    traj = propagate_forward(m, Pulse.zeros(g), psi0, kernels=kernels)
    t_au = g.t_end / AU_TIME_FS
    ref = psi0 * np.exp(-1j * m.energies / HARTREE_EV * t_au)
    assert np.max(np.abs(traj.final_state - ref)) < 1e-10


def test_norm_conserved_without_dissipation(kernels):
    m = neon_preset("experimental").bound_only().without_bound_decay()
    g = TimeGrid.from_span(-10, 10, 0.002)
    p = superpose([sample_gaussian(GaussianPulseSpec(0.2, 45.5, 0, 0, 3.0), g),
                   sample_gaussian(GaussianPulseSpec(0.05, 27.0, 2, 0, 1.0), g)])
    traj = propagate_forward(m, p, m.ground_state(), kernels=kernels)
    assert np.max(np.abs(traj.norm - 1.0)) < 1e-10


def test_exponential_decay(kernels):
    m = two_level(10.0, HBAR_EV_FS / 25.0)
    g = TimeGrid.from_span(0.0, 25.0, 0.005)
    traj = propagate_forward(m, Pulse.zeros(g), m.basis_vector("e"), kernels=kernels)
    assert traj.final("hole_2s") == pytest.approx(math.exp(-1.0), abs=1e-3)
    assert traj.final("hole_2s") == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_norm_never_increases():
    m = neon_preset("experimental")
    g = TimeGrid.from_span(-10, 10, 0.002)
    p = sample_gaussian(GaussianPulseSpec(0.3, 45.5, 0, 0, 3.0), g)
    traj = propagate_forward(m, p, m.ground_state(), stride=1)
    assert np.all(np.diff(traj.norm) <= 1e-14)
    for v in traj.populations.values():
        assert np.all((v >= 0) & (v <= 1 + 1e-12))


def test_second_order_convergence():
    m = two_level(5.0, 0.0, 1.0)
    spec = GaussianPulseSpec(0.05, 5.0, 5.0, 0.0, 3.0)

    def final(dt):
        g = TimeGrid.from_span(0.0, 10.0, dt)
        return propagate_forward(m, sample_gaussian(spec, g), m.ground_state(), stride=g.n_points).final_state

    ref = final(0.0005)
    errs = [np.linalg.norm(final(dt) - ref) for dt in (0.04, 0.02, 0.01)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.8 < o < 2.2 for o in orders)


def test_backward_pairing_conserved(kernels):
    rng = np.random.default_rng(7)
    m = random_model(rng, 5)
    g = TimeGrid.from_span(0.0, 10.0, 0.005)
    p = sample_gaussian(GaussianPulseSpec(0.1, 12.0, 5.0, 0.4, 3.0), g)
    fwd = propagate_forward(m, p, m.ground_state(), stride=1, keep_states=True, kernels=kernels)
    chi_f = rng.normal(size=5) + 1j * rng.normal(size=5)
    bwd = propagate_backward(m, p, chi_f, kernels=kernels)
    pair = np.einsum("ij,ij->i", bwd.states, fwd.states)
    assert np.max(np.abs(pair - pair[-1])) < 1e-10 * abs(pair[-1])
    assert np.allclose(bwd.states[-1], chi_f)


def test_stride_records_final_time():
    m = two_level(1.0)
    g = TimeGrid(0.0, 0.1, 11)
    traj = propagate_forward(m, Pulse.zeros(g), m.ground_state(), stride=3)
    assert traj.times[-1] == pytest.approx(g.t_end)
    assert len(traj.times) == len(traj.norm) == 5
    assert default_stride(1000) == 1
    assert default_stride(1_000_000) == 100


def test_input_validation():
    m = two_level(1.0)
    g = TimeGrid(0.0, 0.1, 11)
    with pytest.raises(ValueError):
        propagate_forward(m, Pulse.zeros(g), np.ones(3))


def test_huge_field_aborts():
    m = two_level(1.0)
    g = TimeGrid(0.0, 0.1, 11)
    with pytest.raises(NumericalAbort):
        propagate_forward(m, Pulse(g, np.full(11, 1e300)), m.ground_state())


def test_track_and_save(tmp_path):
    m = neon_preset("experimental")
    g = TimeGrid.from_span(-5, 5, 0.002)
    lab = m.labels[1]
    traj = propagate_forward(m, sample_gaussian(GaussianPulseSpec(0.2, 45.5, 0, 0, 2.0), g), m.ground_state(),
                             track={"intermediate": lab})
    assert traj.populations["intermediate"][-1] <= traj.populations["hole_2s"][-1]
    save_trajectory(traj, tmp_path / "t.tsv")
    data = np.loadtxt(tmp_path / "t.tsv")
    assert data.shape == (len(traj.times), len(traj.column_names()))


def test_concurrent_propagations_identical():
    m = neon_preset("experimental")
    g = TimeGrid.from_span(-5, 5, 0.002)
    pulses = [sample_gaussian(GaussianPulseSpec(0.05 * (k + 1), 45.5, 0, 0, 2.0), g) for k in range(4)]
    serial = [propagate_forward(m, p, m.ground_state()).final_state for p in pulses]
    with ThreadPoolExecutor(max_workers=4) as pool:
        par = list(pool.map(lambda p: propagate_forward(m, p, m.ground_state()).final_state, pulses))
    for a, b in zip(serial, par):
        assert np.array_equal(a, b)
