# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels.

The generator is ``G = diag(h) - E z`` with ``z`` real and stored as CSR.
Each step applies ``exp(-i G dt)`` to a vector through a scaled Taylor
series whose truncation order follows from an a-priori infinity-norm bound,
so the result is accurate to double precision for any step.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, ceil, sqrt, NAN

cnp.import_array()

cdef double TAYLOR_TOL = 1e-17
cdef int MAX_TERMS = 40
cdef double MAX_SUBSTEPS = 1e6  # beyond this the step is reported as NaN


cdef inline double cabs2(double complex x) nogil:
    return x.real * x.real + x.imag * x.imag


cdef void _expmv(const double complex[::1] h, const int[::1] indptr,
                 const int[::1] indices, const double[::1] data,
                 const double[::1] habs, const double[::1] rowsum,
                 double field, double dt, double complex[::1] v,
                 double complex[::1] acc, double complex[::1] term,
                 double complex[::1] tmp) noexcept nogil:
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, k, sub, p
    cdef double nrm = 0.0, r, bound, afield = fabs(field)
    cdef int s, kmax
    cdef double complex zv, coef
    for i in range(n):
        r = habs[i] + afield * rowsum[i]
        if r > nrm:
            nrm = r
    nrm *= dt
    if not nrm <= MAX_SUBSTEPS:
        for i in range(n):
            v[i] = NAN
        return
    s = <int>ceil(nrm)
    if s < 1:
        s = 1
    nrm /= s
    # smallest order with nrm^(k+1)/(k+1)! below tolerance
    kmax = 0
    bound = 1.0
    while kmax < MAX_TERMS:
        kmax += 1
        bound *= nrm / kmax
        if bound * nrm / (kmax + 1) < TAYLOR_TOL:
            break
    for sub in range(s):
        for i in range(n):
            acc[i] = v[i]
            term[i] = v[i]
        for k in range(1, kmax + 1):
            coef = -1j * dt / (s * k)
            for i in range(n):
                zv = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    zv = zv + data[p] * term[indices[p]]
                tmp[i] = coef * (h[i] * term[i] - field * zv)
            for i in range(n):
                term[i] = tmp[i]
                acc[i] = acc[i] + tmp[i]
        for i in range(n):
            v[i] = acc[i]


def _prepare(h, indptr, indices, data):
    n = h.shape[0]
    habs = np.abs(np.asarray(h))
    rowsum = np.zeros(n)
    absdata = np.abs(np.asarray(data))
    ip = np.asarray(indptr)
    for i in range(n):
        rowsum[i] = absdata[ip[i]:ip[i + 1]].sum()
    return habs, rowsum


def evolve(const double complex[::1] h, const int[::1] indptr,
           const int[::1] indices, const double[::1] data,
           const double[::1] fields, double dt,
           const double complex[::1] psi0, Py_ssize_t stride,
           double complex[:, ::1] out):
    """Propagate ``psi0`` through ``len(fields)`` steps.

    ``fields[k]`` is the field used on step k.  Rows of ``out`` receive the
    state at steps 0, stride, 2*stride, ...; the final state is returned.
    """
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t m = fields.shape[0]
    cdef Py_ssize_t k, i, row = 0
    habs_a, rowsum_a = _prepare(h, indptr, indices, data)
    cdef double[::1] habs = habs_a
    cdef double[::1] rowsum = rowsum_a
    v_a = np.array(psi0, dtype=np.complex128)
    cdef double complex[::1] v = v_a
    cdef double complex[::1] acc = np.empty(n, np.complex128)
    cdef double complex[::1] term = np.empty(n, np.complex128)
    cdef double complex[::1] tmp = np.empty(n, np.complex128)
    cdef Py_ssize_t nrows = out.shape[0]
    with nogil:
        for k in range(m + 1):
            if k % stride == 0 and row < nrows:
                for i in range(n):
                    out[row, i] = v[i]
                row += 1
            if k < m:
                _expmv(h, indptr, indices, data, habs, rowsum, fields[k], dt,
                       v, acc, term, tmp)
    return v_a


def krotov_sweep(const double complex[::1] h, const int[::1] indptr,
                 const int[::1] indices, const double[::1] data,
                 const double[::1] field_old, const double[::1] weight,
                 const double complex[:, ::1] chis, double dt,
                 const double complex[::1] psi0, double[::1] field_new,
                 double cap=1e300):
    """Forward pass with immediate-feedback field updates.

    At grid point k the field becomes
    ``field_old[k] - weight[k] * Im(chis[k]^T z psi_k)`` where ``psi_k`` is the
    state already propagated under the updated field.  The step k -> k+1
    uses the midpoint of the new value at k and a predicted value at k+1.
    If an updated sample exceeds ``cap`` in magnitude the sweep stops there;
    the remaining samples of ``field_new`` are left as the old field.
    Returns the final state (or the state where the sweep stopped).
    """
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t npts = field_old.shape[0]
    cdef Py_ssize_t k, i, p
    cdef double delta, mid
    cdef double complex g, zv
    habs_a, rowsum_a = _prepare(h, indptr, indices, data)
    cdef double[::1] habs = habs_a
    cdef double[::1] rowsum = rowsum_a
    v_a = np.array(psi0, dtype=np.complex128)
    cdef double complex[::1] v = v_a
    cdef double complex[::1] acc = np.empty(n, np.complex128)
    cdef double complex[::1] term = np.empty(n, np.complex128)
    cdef double complex[::1] tmp = np.empty(n, np.complex128)
    with nogil:
        for k in range(npts):
            delta = 0.0
            if weight[k] != 0.0:
                g = 0.0
                for i in range(n):
                    zv = 0.0
                    for p in range(indptr[i], indptr[i + 1]):
                        zv = zv + data[p] * v[indices[p]]
                    g = g + chis[k, i] * zv
                delta = -weight[k] * g.imag
                field_new[k] = field_old[k] + delta
            else:
                field_new[k] = field_old[k]
            if not fabs(field_new[k]) <= cap:
                for i in range(k + 1, npts):
                    field_new[i] = field_old[i]
                break
            if k < npts - 1:
                mid = 0.5 * (field_new[k] + field_old[k + 1] + delta)
                _expmv(h, indptr, indices, data, habs, rowsum, mid, dt,
                       v, acc, term, tmp)
    return v_a
