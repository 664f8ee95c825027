"""Forward state and backward costate propagation.

Both directions use the exponential midpoint rule with the field sampled at
step midpoints.  The backward equations use the transposed generator
``(H - E z)^T``; together with exact step exponentials this keeps the pairing
``chi(t)^T alpha(t)`` constant along the grid.
"""
from dataclasses import dataclass

import numpy as np

from ._backend import kernels as _default_kernels
from .errors import NumericalAbort
from .model import Group

GROUPS = [g.value for g in Group]


def _check(model, pulse, vec, name):
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (model.dim,):
        raise ValueError(f"{name} has dimension {vec.shape}, basis has {model.dim} states")
    if not np.all(np.isfinite(pulse.samples)):
        raise NumericalAbort("non-finite field sample")
    return vec


def default_stride(n_points):
    return 1 if n_points <= 100_000 else int(np.ceil(n_points / 10_000))


def _operands(model, transpose=False):
    return (np.ascontiguousarray(model.hamiltonian_diag(), dtype=complex),) + model.dipole_csr(transpose)


def evolve_states(model, fields, dt_au, psi0, stride=1, kernels=None):
    """States after every ``stride`` steps (rows) and the final state."""
    k = kernels or _default_kernels
    fields = np.ascontiguousarray(fields, dtype=float)
    rows = len(fields) // stride + 1
    out = np.empty((rows, model.dim), dtype=complex)
    h, ip, ix, d = _operands(model)
    final = k.evolve(h, ip, ix, d, fields, dt_au, np.ascontiguousarray(psi0), stride, out)
    return out, np.asarray(final)


def populations(state, model):
    """Group populations plus the target configuration (key ``"target"``)."""
    p = np.abs(np.asarray(state)) ** 2
    if p.ndim == 1:
        p = p[None, :]
        squeeze = True
    else:
        squeeze = False
    out = {}
    for g, idx in model.group_indices().items():
        out[g.value] = p[:, idx].sum(axis=1) if len(idx) else np.zeros(len(p))
    ti = model.target_index
    out["target"] = p[:, ti] if ti is not None else np.zeros(len(p))
    if squeeze:
        out = {k: float(v[0]) for k, v in out.items()}
    return out


@dataclass
class Trajectory:
    times: np.ndarray  # fs, recorded snapshots
    populations: dict  # name -> array over snapshots
    norm: np.ndarray  # ||alpha||^2 per snapshot
    final_state: np.ndarray
    stride: int
    states: np.ndarray = None  # recorded coefficient vectors, if kept
    tracked: tuple = ()  # extra population columns (single states)

    def column_names(self):
        return ["time_fs"] + GROUPS + ["target"] + list(self.tracked) + ["norm"]

    def table(self):
        names = GROUPS + ["target"] + list(self.tracked)
        return np.column_stack([self.times] + [self.populations[n] for n in names] + [self.norm])

    def max_of(self, name):
        k = int(np.argmax(self.populations[name]))
        return float(self.populations[name][k]), float(self.times[k])

    def final(self, name):
        return float(self.populations[name][-1])


def propagate_forward(model, pulse, psi0, stride=None, keep_states=False, kernels=None, track=None):
    """Propagate ``psi0`` over the pulse grid, recording every ``stride`` steps.

    ``track`` maps column names to basis labels whose individual populations
    are recorded next to the group populations.
    """
    psi0 = _check(model, pulse, psi0, "initial state")
    track = dict(track or {})
    cols = {name: model.index(label) for name, label in track.items()}
    grid = pulse.grid
    stride = stride or default_stride(grid.n_points)
    states, final = evolve_states(model, pulse.midpoints(), grid.dt_au, psi0, stride, kernels)
    pops = populations(states, model)
    for name, i in cols.items():
        pops[name] = np.abs(states[:, i]) ** 2
    norm = np.sum(np.abs(states) ** 2, axis=1)
    times = grid.times[::stride][: len(states)]
    if (grid.n_points - 1) % stride:
        # make sure the final state is part of the record
        times = np.append(times, grid.t_end)
        extra = populations(final, model)
        extra.update({name: abs(final[i]) ** 2 for name, i in cols.items()})
        pops = {k: np.append(v, extra[k]) for k, v in pops.items()}
        norm = np.append(norm, np.sum(np.abs(final) ** 2))
        if keep_states:
            states = np.vstack([states, final])
    if not np.all(np.isfinite(final)):
        raise NumericalAbort("propagation produced non-finite coefficients")
    return Trajectory(times, pops, norm, final, stride, states if keep_states else None, tuple(cols))


@dataclass
class CostateTrajectory:
    times: np.ndarray  # fs, ascending
    states: np.ndarray  # chi at each time (rows ascending in time)


def propagate_backward(model, pulse, chi_f, kernels=None):
    """Integrate ``d chi/dt = i (H^T - E z^T) chi`` from t_f down to t_start.

    Every grid point is stored (the Krotov update needs chi at each step).
    """
    chi_f = _check(model, pulse, chi_f, "final costate")
    k = kernels or _default_kernels
    grid = pulse.grid
    fields = np.ascontiguousarray(pulse.midpoints()[::-1])
    h = np.ascontiguousarray(model.hamiltonian_diag().copy())  # diagonal, so H^T = H
    ip, ix, d = model.dipole_csr(transpose=True)
    out = np.empty((grid.n_points, model.dim), dtype=complex)
    # a backward step t -> t - dt applies exp(-i G^T dt), i.e. the forward
    # kernel with the transposed operands on the reversed field sequence
    k.evolve(h, ip, ix, d, fields, grid.dt_au, np.ascontiguousarray(chi_f), 1, out)
    return CostateTrajectory(grid.times, out[::-1].copy())


def save_trajectory(traj, path):
    with open(path, "w") as fh:
        fh.write("# " + "\t".join(traj.column_names()) + "\n")
        np.savetxt(fh, traj.table(), fmt="%.12g", delimiter="\t")
