"""Pure-NumPy reference kernels.

Authoritative implementations of the two hot kernels: the pairwise
squared torus cost matrix and the RK4 sweep of a particle ensemble under
per-step control mixtures against a frozen measure flow.  The optional
compiled module `_speedups` mirrors these signatures; both are selected
through `torusmfg._core`.

Catalog family ids (shared with the compiled kernel):
    1 separable_affine     f = c0 + drift*sin(2pi(x+phase)) + Bu u + Bv v
    2 bilinear             f = c0 + gain * (u v)        (scalar u, v)
    3 mean_field_attraction
        f = gain * sum_j w_j sin(2pi(y_j - x)) + bu u + bv v  (scalar u, v)
    4 custom_polynomial    f_i = sum_t coef * T(x_c) * u^p * v^q  (scalar u, v)
        T in {1, sin(2pi k x_c), cos(2pi k x_c)}, integer k

Parameter packing (fparams float64, iparams int64):
    1: iparams=[d, du, dv]; fparams=[c0(d), drift, phase, Bu(d*du), Bv(d*dv)]
    2: iparams=[d];         fparams=[c0(d), gain(d)]
    3: iparams=[d];         fparams=[gain, bu(d), bv(d)]
    4: iparams=[d, nterms, (out, trig, coord, p, q) * nterms]
       fparams=[(wavenumber, coef) * nterms]
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def pairwise_sq_torus_dist(x, y):
    """Squared per-coordinate minimal-shift distances, summed.

    x: (n, d), y: (m, d), both with coordinates in [0, 1).  Returns (n, m).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = np.abs(x[:, None, :] - y[None, :, :])
    diff = np.minimum(diff, 1.0 - diff)
    return np.einsum("nmd,nmd->nm", diff, diff)


def mix_velocity(family, fparams, iparams, t, x, mpos, mw, u_atoms, v_atoms, xi, zeta):
    """Control-mixture velocity sum_{ij} xi_i zeta_j f(t, x, m, u_i, v_j).

    x: (A, d) positions (lift or canonical; the catalog is 1-periodic in x),
    mpos: (M, d) frozen-measure particles, mw: (M,), xi: (A, Ku), zeta: (A, Kv).
    Returns (A, d).
    """
    x = np.asarray(x, dtype=np.float64)
    a, d = x.shape
    if family == 1:
        du = int(iparams[1])
        dv = int(iparams[2])
        c0 = fparams[:d]
        drift = fparams[d]
        phase = fparams[d + 1]
        off = d + 2
        bu = fparams[off : off + d * du].reshape(d, du)
        bv = fparams[off + d * du : off + d * du + d * dv].reshape(d, dv)
        ubar = xi @ u_atoms
        vbar = zeta @ v_atoms
        return c0[None, :] + drift * np.sin(TWO_PI * (x + phase)) + ubar @ bu.T + vbar @ bv.T
    if family == 2:
        c0 = fparams[:d]
        gain = fparams[d : 2 * d]
        ubar = xi @ u_atoms[:, 0]
        vbar = zeta @ v_atoms[:, 0]
        return c0[None, :] + (ubar * vbar)[:, None] * gain[None, :]
    if family == 3:
        gain = fparams[0]
        bu = fparams[1 : 1 + d]
        bv = fparams[1 + d : 1 + 2 * d]
        ubar = xi @ u_atoms[:, 0]
        vbar = zeta @ v_atoms[:, 0]
        pull = np.einsum("amd,m->ad", np.sin(TWO_PI * (mpos[None, :, :] - x[:, None, :])), mw)
        return gain * pull + ubar[:, None] * bu[None, :] + vbar[:, None] * bv[None, :]
    if family == 4:
        nterms = int(iparams[1])
        out = np.zeros((a, d))
        uu = u_atoms[:, 0]
        vv = v_atoms[:, 0]
        for k in range(nterms):
            comp, trig, coord, p, q = (int(v) for v in iparams[2 + 5 * k : 7 + 5 * k])
            wave = fparams[2 * k]
            coef = fparams[2 * k + 1]
            if trig == 0:
                base = np.ones(a)
            elif trig == 1:
                base = np.sin(TWO_PI * wave * x[:, coord])
            else:
                base = np.cos(TWO_PI * wave * x[:, coord])
            eu = xi @ (uu**p) if p else np.ones(a)
            ev = zeta @ (vv**q) if q else np.ones(a)
            out[:, comp] += coef * base * eu * ev
        return out
    raise ValueError(f"unknown catalog family id {family}")


def rk4_sweep(family, fparams, iparams, x0, t0, dt, nsteps, xi_steps, zeta_steps,
              u_atoms, v_atoms, mpos_half, mw):
    """RK4-integrate every ensemble atom against a frozen measure flow.

    x0: (A, d) lifted starts; xi_steps: (nsteps, A, Ku) per-step mixtures of
    the first player's grid (zeta_steps likewise for the second);
    mpos_half: (2*nsteps + 1, M, d) frozen flow sampled at half-step times.
    Returns lifted trajectories (nsteps + 1, A, d).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    a, d = x0.shape
    out = np.empty((nsteps + 1, a, d))
    out[0] = x0
    x = x0.copy()
    for k in range(nsteps):
        t = t0 + k * dt
        xi = xi_steps[k]
        zt = zeta_steps[k]
        m0 = mpos_half[2 * k]
        mh = mpos_half[2 * k + 1]
        m1 = mpos_half[2 * k + 2]
        k1 = mix_velocity(family, fparams, iparams, t, x, m0, mw, u_atoms, v_atoms, xi, zt)
        k2 = mix_velocity(family, fparams, iparams, t + 0.5 * dt, x + 0.5 * dt * k1, mh, mw,
                          u_atoms, v_atoms, xi, zt)
        k3 = mix_velocity(family, fparams, iparams, t + 0.5 * dt, x + 0.5 * dt * k2, mh, mw,
                          u_atoms, v_atoms, xi, zt)
        k4 = mix_velocity(family, fparams, iparams, t + dt, x + dt * k3, m1, mw,
                          u_atoms, v_atoms, xi, zt)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x
    return out
