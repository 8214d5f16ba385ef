# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of dp_numpy.layer_update; same algorithm, C loops."""

import numpy as np

cimport numpy as cnp
from libc.math cimport log1p, sqrt

cnp.import_array()

cdef double INVGR = (sqrt(5.0) - 1.0) / 2.0


cdef inline double _interp(const double[:, ::1] w, Py_ssize_t j, double x,
                           double de, Py_ssize_t n_e) nogil:
    cdef double pos = x / de
    cdef Py_ssize_t idx = <Py_ssize_t>pos
    if idx < 0:
        idx = 0
    elif idx > n_e - 2:
        idx = n_e - 2
    cdef double frac = pos - idx
    return w[idx, j] + frac * (w[idx + 1, j] - w[idx, j])


cdef inline double _phi(const double[:, ::1] w, Py_ssize_t j, double e,
                        double p, double h, double rate_coeff, double delta,
                        double de, Py_ssize_t n_e) nogil:
    return rate_coeff * log1p(h * p) + _interp(w, j, e - delta * p, de, n_e)


def layer_update(const double[:, ::1] w_event,
                 const double[::1] e_grid,
                 const double[::1] h_points,
                 double rate_coeff,
                 double delta,
                 int n_coarse,
                 int n_golden):
    """One backward step; returns (values, powers), each (n_e, n_h)."""
    cdef Py_ssize_t n_e = e_grid.shape[0]
    cdef Py_ssize_t n_h = h_points.shape[0]
    cdef double de = e_grid[1] - e_grid[0]

    j_out = np.empty((n_e, n_h), dtype=np.float64)
    p_out = np.empty((n_e, n_h), dtype=np.float64)
    cdef double[:, ::1] j_v = j_out
    cdef double[:, ::1] p_v = p_out

    cdef Py_ssize_t i, j, c_idx, best_idx
    cdef double e, h, p_hi, p, f, best_f, best_p
    cdef double lo, hi, pc, pd, fc, fd, new_c, new_d, probe, f_probe
    cdef int it

    with nogil:
        for i in range(n_e):
            e = e_grid[i]
            p_hi = e / delta
            for j in range(n_h):
                h = h_points[j]

                best_idx = 0
                best_f = _phi(w_event, j, e, 0.0, h, rate_coeff, delta, de, n_e)
                best_p = 0.0
                for c_idx in range(1, n_coarse):
                    p = p_hi * c_idx / (n_coarse - 1)
                    f = _phi(w_event, j, e, p, h, rate_coeff, delta, de, n_e)
                    if f > best_f:
                        best_f = f
                        best_p = p
                        best_idx = c_idx

                lo = p_hi * (best_idx - 1) / (n_coarse - 1) if best_idx > 0 else 0.0
                hi = p_hi * (best_idx + 1) / (n_coarse - 1) \
                    if best_idx < n_coarse - 1 else p_hi

                pc = hi - INVGR * (hi - lo)
                pd = lo + INVGR * (hi - lo)
                fc = _phi(w_event, j, e, pc, h, rate_coeff, delta, de, n_e)
                fd = _phi(w_event, j, e, pd, h, rate_coeff, delta, de, n_e)
                if fc > best_f:
                    best_f = fc
                    best_p = pc
                if fd > best_f:
                    best_f = fd
                    best_p = pd

                for it in range(n_golden):
                    if fc >= fd:
                        hi = pd
                        new_c = hi - INVGR * (hi - lo)
                        probe = new_c
                        f_probe = _phi(w_event, j, e, probe, h, rate_coeff,
                                       delta, de, n_e)
                        pd = pc
                        fd = fc
                        pc = new_c
                        fc = f_probe
                    else:
                        lo = pc
                        new_d = lo + INVGR * (hi - lo)
                        probe = new_d
                        f_probe = _phi(w_event, j, e, probe, h, rate_coeff,
                                       delta, de, n_e)
                        pc = pd
                        fc = fd
                        pd = new_d
                        fd = f_probe
                    if f_probe > best_f:
                        best_f = f_probe
                        best_p = probe

                j_v[i, j] = best_f
                p_v[i, j] = best_p

    return j_out, p_out
