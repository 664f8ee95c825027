"""Pure-Python reference kernels (dense :func:`scipy.linalg.expm` per step).

Same call signatures as the compiled ``_kernels`` module.
"""
import numpy as np
from scipy.linalg import expm
from scipy.sparse import csr_matrix


def _dense(h, indptr, indices, data):
    n = len(h)
    z = csr_matrix((np.asarray(data), np.asarray(indices), np.asarray(indptr)), shape=(n, n)).toarray()
    return np.diag(np.asarray(h)), z


def _step(hmat, z, field, dt):
    g = hmat - field * z
    if not np.all(np.isfinite(g)) or np.abs(g).sum(axis=1).max() * dt > 1e6:
        return None
    return expm(-1j * dt * g)


def evolve(h, indptr, indices, data, fields, dt, psi0, stride, out):
    hmat, z = _dense(h, indptr, indices, data)
    v = np.array(psi0, dtype=np.complex128)
    m = len(fields)
    row = 0
    for k in range(m + 1):
        if k % stride == 0 and row < out.shape[0]:
            out[row] = v
            row += 1
        if k < m:
            u = _step(hmat, z, fields[k], dt)
            v = np.full_like(v, np.nan) if u is None else u @ v
    return v


def krotov_sweep(h, indptr, indices, data, field_old, weight, chis, dt, psi0, field_new, cap=1e300):
    hmat, z = _dense(h, indptr, indices, data)
    v = np.array(psi0, dtype=np.complex128)
    npts = len(field_old)
    for k in range(npts):
        delta = 0.0
        if weight[k] != 0.0:
            delta = -weight[k] * (chis[k] @ (z @ v)).imag
            field_new[k] = field_old[k] + delta
        else:
            field_new[k] = field_old[k]
        if not abs(field_new[k]) <= cap:
            field_new[k + 1:] = field_old[k + 1:]
            break
        if k < npts - 1:
            mid = 0.5 * (field_new[k] + field_old[k + 1] + delta)
            u = _step(hmat, z, mid, dt)
            v = np.full_like(v, np.nan) if u is None else u @ v
    return v
