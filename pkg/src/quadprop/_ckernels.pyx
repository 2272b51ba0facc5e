# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the loops in ``_pykernels``.

Same signatures and semantics.  The RK4 sweep runs its small dense
products without temporaries; the chirp kernel fills its phase matrix by a
rotation recurrence on uniform grids and leaves the contraction to BLAS.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef inline void _matmul(const double[:, ::1] a, const double[:, ::1] b,
                         double[:, ::1] out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc = acc + a[i, k] * b[k, j]
            out[i, j] = acc


def rk4_path(gens, double h, x0):
    cdef const double[:, :, ::1] g = np.ascontiguousarray(gens, dtype=np.float64)
    cdef Py_ssize_t nsteps = (g.shape[0] - 1) // 2
    cdef Py_ssize_t d = g.shape[1]
    out_arr = np.empty((nsteps + 1, d, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] x = np.array(x0, dtype=np.float64, order="C")
    cdef double[:, ::1] k1 = np.empty((d, d))
    cdef double[:, ::1] k2 = np.empty((d, d))
    cdef double[:, ::1] k3 = np.empty((d, d))
    cdef double[:, ::1] k4 = np.empty((d, d))
    cdef double[:, ::1] tmp = np.empty((d, d))
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef Py_ssize_t s, i, j
    with nogil:
        for i in range(d):
            for j in range(d):
                out[0, i, j] = x[i, j]
        for s in range(nsteps):
            _matmul(g[2 * s], x, k1, d)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = x[i, j] + half * k1[i, j]
            _matmul(g[2 * s + 1], tmp, k2, d)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = x[i, j] + half * k2[i, j]
            _matmul(g[2 * s + 1], tmp, k3, d)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = x[i, j] + h * k3[i, j]
            _matmul(g[2 * s + 2], tmp, k4, d)
            for i in range(d):
                for j in range(d):
                    x[i, j] = x[i, j] + sixth * (k1[i, j] + 2.0 * k2[i, j]
                                                 + 2.0 * k3[i, j] + k4[i, j])
                    out[s + 1, i, j] = x[i, j]
    return out_arr


cdef Py_ssize_t RESEED = 32


def chirp_apply(x_out, x_in, phi, double c):
    cdef const double[::1] xo = np.ascontiguousarray(x_out, dtype=np.float64)
    cdef const double[::1] xi = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t nout = xo.shape[0]
    cdef Py_ssize_t nin = xi.shape[0]
    kern_arr = np.empty((nout, nin), dtype=np.complex128)
    cdef double[:, ::1] kern = kern_arr.view(np.float64)
    cdef Py_ssize_t a, b
    cdef double ph, cr, ci, rr, ri, tmp, dx = 0.0
    cdef bint uniform = nin > 1
    if uniform:
        dx = (xi[nin - 1] - xi[0]) / (nin - 1)
        for b in range(nin):
            if abs(xi[b] - (xi[0] + b * dx)) > 1e-12 * (abs(xi[0]) + abs(dx) * nin):
                uniform = False
                break
    with nogil:
        for a in range(nout):
            if uniform:
                # rotate by exp(i c xo dx) per point, exact trig every RESEED points
                rr = cos(c * xo[a] * dx)
                ri = sin(c * xo[a] * dx)
                for b in range(nin):
                    if b % RESEED == 0:
                        ph = c * xo[a] * (xi[0] + b * dx)
                        cr = cos(ph)
                        ci = sin(ph)
                    else:
                        tmp = cr * rr - ci * ri
                        ci = cr * ri + ci * rr
                        cr = tmp
                    kern[a, 2 * b] = cr
                    kern[a, 2 * b + 1] = ci
            else:
                for b in range(nin):
                    ph = c * xo[a] * xi[b]
                    kern[a, 2 * b] = cos(ph)
                    kern[a, 2 * b + 1] = sin(ph)
    return np.asarray(phi, dtype=np.complex128) @ kern_arr.T
