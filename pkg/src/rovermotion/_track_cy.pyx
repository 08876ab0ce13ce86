# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled planar track integrator (hot loop of the traverse simulators)."""

from libc.math cimport sin, cos, fabs

import numpy as np


def integrate_track(vx, vy, wz, double dt, double x0=0.0, double y0=0.0,
                    double theta0=0.0):
    """Exact constant-twist integration, same contract as _track_py."""
    cdef double[::1] vx_v = np.ascontiguousarray(vx, dtype=np.float64)
    cdef double[::1] vy_v = np.ascontiguousarray(vy, dtype=np.float64)
    cdef double[::1] wz_v = np.ascontiguousarray(wz, dtype=np.float64)
    cdef Py_ssize_t n = vx_v.shape[0]
    if vy_v.shape[0] != n or wz_v.shape[0] != n:
        raise ValueError("twist component arrays must have equal length")
    x_arr = np.empty(n + 1)
    y_arr = np.empty(n + 1)
    t_arr = np.empty(n + 1)
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] th = t_arr
    cdef double cx = x0, cy = y0, cth = theta0
    cdef double w, dth, s, c, dxb, dyb, cos_t, sin_t
    cdef Py_ssize_t i
    x[0] = x0
    y[0] = y0
    th[0] = theta0
    for i in range(n):
        w = wz_v[i]
        dth = w * dt
        if fabs(w) < 1e-12:
            dxb = vx_v[i] * dt
            dyb = vy_v[i] * dt
        else:
            s = sin(dth) / w
            c = (1.0 - cos(dth)) / w
            dxb = vx_v[i] * s - vy_v[i] * c
            dyb = vx_v[i] * c + vy_v[i] * s
        cos_t = cos(cth)
        sin_t = sin(cth)
        cx += cos_t * dxb - sin_t * dyb
        cy += sin_t * dxb + cos_t * dyb
        cth += dth
        x[i + 1] = cx
        y[i + 1] = cy
        th[i + 1] = cth
    return x_arr, y_arr, t_arr
