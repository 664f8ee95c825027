import numpy as np
import pytest

from raman_control._backend import compiled_kernels, python_kernels
from raman_control.model import BasisState, Group, ModelSystem

BACKENDS = [pytest.param(python_kernels, id="python")]
if compiled_kernels is not None:
    BACKENDS.insert(0, pytest.param(compiled_kernels, id="cython"))

ACCEPTANCE = []


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def record():
    """Collects one summary line per acceptance criterion."""
    def _record(criterion, ok, detail):
        line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def two_level(energy=0.0, width=0.0, z=1.0):
    basis = [BasisState("g", 0.0, 0.0, Group.GROUND), BasisState("e", energy, width, Group.HOLE_2S)]
    return ModelSystem(basis, np.array([[0.0, z], [z, 0.0]]), target_label="e")


def random_model(rng, n, cap=False):
    states = [BasisState("s0", 0.0, 0.0, Group.GROUND)]
    groups = [Group.HOLE_2S, Group.HOLE_2P_M0, Group.CONTINUUM]
    for k in range(1, n):
        g = groups[k % 3]
        states.append(BasisState(f"s{k}", float(rng.uniform(1.0, 30.0)), float(rng.uniform(0, 0.1)), g))
    z = rng.normal(size=(n, n)) * 0.5
    z = np.triu(z, 1)
    z = z + z.T
    return ModelSystem(states, z, cap_mode="explicit_cap" if cap else "effective_width",
                       cap_strength=0.01, target_label="s1")
