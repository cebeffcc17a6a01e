# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: torus cost matrix and the RK4 ensemble sweep.

Signatures and semantics mirror `torusmfg._core.reference`; that module
is the authoritative description of the catalog family ids and the
parameter packing.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, sin

cnp.import_array()

cdef double TWO_PI = 6.283185307179586476925287


def pairwise_sq_torus_dist(object x_in, object y_in):
    cdef const double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[:, ::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], d = x.shape[1]
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = fabs(x[i, k] - y[j, k])
                if diff > 1.0 - diff:
                    diff = 1.0 - diff
                acc += diff * diff
            out[i, j] = acc
    return out_arr


cdef void _velocity(int family, const double[::1] fp, const long long[::1] ip,
                    double t, double* x, Py_ssize_t d,
                    const double[:, :, ::1] mpos, Py_ssize_t mrow, const double[::1] mw, Py_ssize_t m,
                    const double[:, ::1] u_atoms, const double[:, ::1] v_atoms,
                    const double* xi, const double* zeta, Py_ssize_t ku, Py_ssize_t kv,
                    double* vel) noexcept nogil:
    cdef Py_ssize_t i, j, k, c, du, dv, off, nterms, comp, trig, coord, p, q
    cdef double ubar, vbar, acc, base, eu, ev, wave, coef, ua
    for k in range(d):
        vel[k] = 0.0
    if family == 1:
        du = <Py_ssize_t> ip[1]
        dv = <Py_ssize_t> ip[2]
        off = d + 2
        for k in range(d):
            vel[k] = fp[k] + fp[d] * sin(TWO_PI * (x[k] + fp[d + 1]))
        for c in range(du):
            ubar = 0.0
            for i in range(ku):
                ubar += xi[i] * u_atoms[i, c]
            for k in range(d):
                vel[k] += fp[off + k * du + c] * ubar
        off = d + 2 + d * du
        for c in range(dv):
            vbar = 0.0
            for j in range(kv):
                vbar += zeta[j] * v_atoms[j, c]
            for k in range(d):
                vel[k] += fp[off + k * dv + c] * vbar
    elif family == 2:
        ubar = 0.0
        for i in range(ku):
            ubar += xi[i] * u_atoms[i, 0]
        vbar = 0.0
        for j in range(kv):
            vbar += zeta[j] * v_atoms[j, 0]
        for k in range(d):
            vel[k] = fp[k] + fp[d + k] * ubar * vbar
    elif family == 3:
        ubar = 0.0
        for i in range(ku):
            ubar += xi[i] * u_atoms[i, 0]
        vbar = 0.0
        for j in range(kv):
            vbar += zeta[j] * v_atoms[j, 0]
        for k in range(d):
            acc = 0.0
            for i in range(m):
                acc += mw[i] * sin(TWO_PI * (mpos[mrow, i, k] - x[k]))
            vel[k] = fp[0] * acc + fp[1 + k] * ubar + fp[1 + d + k] * vbar
    else:  # family == 4
        nterms = <Py_ssize_t> ip[1]
        for c in range(nterms):
            comp = <Py_ssize_t> ip[2 + 5 * c]
            trig = <Py_ssize_t> ip[3 + 5 * c]
            coord = <Py_ssize_t> ip[4 + 5 * c]
            p = <Py_ssize_t> ip[5 + 5 * c]
            q = <Py_ssize_t> ip[6 + 5 * c]
            wave = fp[2 * c]
            coef = fp[2 * c + 1]
            if trig == 0:
                base = 1.0
            elif trig == 1:
                base = sin(TWO_PI * wave * x[coord])
            else:
                base = cos(TWO_PI * wave * x[coord])
            if p == 0:
                eu = 1.0
            else:
                eu = 0.0
                for i in range(ku):
                    ua = u_atoms[i, 0]
                    acc = 1.0
                    for j in range(p):
                        acc *= ua
                    eu += xi[i] * acc
            if q == 0:
                ev = 1.0
            else:
                ev = 0.0
                for i in range(kv):
                    ua = v_atoms[i, 0]
                    acc = 1.0
                    for j in range(q):
                        acc *= ua
                    ev += zeta[i] * acc
            vel[comp] += coef * base * eu * ev


def rk4_sweep(int family, object fparams, object iparams, object x0_in,
              double t0, double dt, Py_ssize_t nsteps,
              object xi_in, object zeta_in, object u_in, object v_in,
              object mpos_in, object mw_in):
    cdef const double[::1] fp = np.ascontiguousarray(fparams, dtype=np.float64)
    cdef const long long[::1] ip = np.ascontiguousarray(iparams, dtype=np.int64)
    cdef const double[:, ::1] x0 = np.ascontiguousarray(x0_in, dtype=np.float64)
    cdef const double[:, :, ::1] xi = np.ascontiguousarray(xi_in, dtype=np.float64)
    cdef const double[:, :, ::1] zeta = np.ascontiguousarray(zeta_in, dtype=np.float64)
    cdef const double[:, ::1] u_atoms = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef const double[:, ::1] v_atoms = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef const double[:, :, ::1] mpos = np.ascontiguousarray(mpos_in, dtype=np.float64)
    cdef const double[::1] mw = np.ascontiguousarray(mw_in, dtype=np.float64)

    cdef Py_ssize_t a = x0.shape[0], d = x0.shape[1]
    cdef Py_ssize_t ku = u_atoms.shape[0], kv = v_atoms.shape[0]
    cdef Py_ssize_t m = mpos.shape[1]
    out_arr = np.empty((nsteps + 1, a, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr

    # RK4 scratch is capped; dimensions beyond this are not desk scale.
    cdef double xw[16]
    cdef double k1[16]
    cdef double k2[16]
    cdef double k3[16]
    cdef double k4[16]
    if d > 16:
        raise ValueError("compiled sweep supports d <= 16")

    cdef Py_ssize_t s, i, k
    cdef double t
    for i in range(a):
        for k in range(d):
            out[0, i, k] = x0[i, k]
    with nogil:
        for s in range(nsteps):
            t = t0 + s * dt
            for i in range(a):
                for k in range(d):
                    xw[k] = out[s, i, k]
                _velocity(family, fp, ip, t, xw, d, mpos, 2 * s, mw, m,
                          u_atoms, v_atoms, &xi[s, i, 0], &zeta[s, i, 0], ku, kv, k1)
                for k in range(d):
                    xw[k] = out[s, i, k] + 0.5 * dt * k1[k]
                _velocity(family, fp, ip, t + 0.5 * dt, xw, d, mpos, 2 * s + 1, mw, m,
                          u_atoms, v_atoms, &xi[s, i, 0], &zeta[s, i, 0], ku, kv, k2)
                for k in range(d):
                    xw[k] = out[s, i, k] + 0.5 * dt * k2[k]
                _velocity(family, fp, ip, t + 0.5 * dt, xw, d, mpos, 2 * s + 1, mw, m,
                          u_atoms, v_atoms, &xi[s, i, 0], &zeta[s, i, 0], ku, kv, k3)
                for k in range(d):
                    xw[k] = out[s, i, k] + dt * k3[k]
                _velocity(family, fp, ip, t + dt, xw, d, mpos, 2 * s + 2, mw, m,
                          u_atoms, v_atoms, &xi[s, i, 0], &zeta[s, i, 0], ku, kv, k4)
                for k in range(d):
                    out[s + 1, i, k] = out[s, i, k] + (dt / 6.0) * (
                        k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
    return out_arr
