"""Game datum: dynamics catalog, control grids, the changed control metric,
vectograms with hull distances, and the Isaacs gap probe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._core import reference
from .errors import StructuralError
from .measures import (DiscreteMeasure, GridComponent, ProductSpace,
                       control_space, direction_space, measure_space)
from .torus import torus_distance, wrap
from .transport import wasserstein2

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Modulus:
    """Nondecreasing modulus with modulus(0) = 0: scale * s**exponent."""

    scale: float
    exponent: float = 1.0

    def __post_init__(self):
        if self.scale < 0 or not (0 < self.exponent <= 1):
            raise StructuralError("modulus needs scale >= 0 and exponent in (0, 1]")

    def __call__(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        out = self.scale * s**self.exponent
        return float(out) if out.ndim == 0 else out


class Dynamics:
    """Base evaluator for f(t, x, m, u, v).

    Subclasses either override `eval_grid` (vectorized over particles and
    both control grids) or just `__call__`; `eval_grid` falls back to a
    scalar loop.  Evaluation must be pure.  `kernel_args` advertises the
    compiled-sweep packing for catalog families (None = generic path).
    """

    family: str | None = None
    depends_on_measure: bool = False

    def __call__(self, t, x, m, u, v):
        raise NotImplementedError

    def eval_grid(self, t, x_arr, m_pos, m_w, u_arr, v_arr):
        """(A, Ku, Kv, d) array of f over all particles and grid pairs."""
        x_arr = np.atleast_2d(x_arr)
        a, d = x_arr.shape
        ku, kv = u_arr.shape[0], v_arr.shape[0]
        out = np.empty((a, ku, kv, d))
        m = _MeasureView(m_pos, m_w)
        for ia in range(a):
            for iu in range(ku):
                for iv in range(kv):
                    out[ia, iu, iv] = self(t, x_arr[ia], m, u_arr[iu], v_arr[iv])
        return out

    def mix_velocity(self, t, x_arr, m_pos, m_w, u_arr, v_arr, xi, zeta):
        """sum_ij xi_i zeta_j f(t, x, m, u_i, v_j), shape (A, d)."""
        grid = self.eval_grid(t, x_arr, m_pos, m_w, u_arr, v_arr)
        return np.einsum("auvd,au,av->ad", grid, xi, zeta)

    def kernel_args(self):
        return None


class _MeasureView:
    """Cheap (positions, weights) stand-in passed to scalar dynamics."""

    __slots__ = ("positions", "weights")

    def __init__(self, positions, weights):
        self.positions = positions
        self.weights = weights


def _as_particles(m):
    if isinstance(m, DiscreteMeasure):
        return m.state(), m.weights
    if isinstance(m, _MeasureView):
        return m.positions, m.weights
    pos, w = m
    return np.atleast_2d(np.asarray(pos, dtype=float)), np.asarray(w, dtype=float)


class _CatalogDynamics(Dynamics):
    """Catalog family backed by the shared kernel parameter packing."""

    def __init__(self, family_id, fparams, iparams, family):
        self._family_id = family_id
        self._fparams = np.asarray(fparams, dtype=np.float64)
        self._iparams = np.asarray(iparams, dtype=np.int64)
        self.family = family

    def kernel_args(self):
        return self._family_id, self._fparams, self._iparams

    def mix_velocity(self, t, x_arr, m_pos, m_w, u_arr, v_arr, xi, zeta):
        return reference.mix_velocity(self._family_id, self._fparams, self._iparams,
                                      t, np.atleast_2d(x_arr), np.atleast_2d(m_pos),
                                      m_w, u_arr, v_arr, np.atleast_2d(xi),
                                      np.atleast_2d(zeta))

    def eval_grid(self, t, x_arr, m_pos, m_w, u_arr, v_arr):
        x_arr = np.atleast_2d(x_arr)
        a = x_arr.shape[0]
        ku, kv = u_arr.shape[0], v_arr.shape[0]
        out = np.empty((a, ku, kv, x_arr.shape[1]))
        eye_u = np.eye(ku)
        eye_v = np.eye(kv)
        for iu in range(ku):
            for iv in range(kv):
                xi = np.broadcast_to(eye_u[iu], (a, ku))
                zeta = np.broadcast_to(eye_v[iv], (a, kv))
                out[:, iu, iv, :] = self.mix_velocity(t, x_arr, m_pos, m_w,
                                                      u_arr, v_arr, xi, zeta)
        return out

    def __call__(self, t, x, m, u, v):
        pos, w = _as_particles(m)
        x_arr = np.atleast_2d(np.asarray(x, dtype=float))
        u_arr = np.atleast_2d(np.asarray(u, dtype=float))
        v_arr = np.atleast_2d(np.asarray(v, dtype=float))
        xi = np.ones((1, 1))
        return self.mix_velocity(t, x_arr, pos, w, u_arr, v_arr, xi, xi)[0]


def separable_affine(d, c0=None, drift_amp=0.0, drift_phase=0.0, bu=None, bv=None,
                     du=1, dv=1) -> Dynamics:
    """f = c0 + drift*sin(2pi(x+phase)) + Bu u + Bv v."""
    c0 = np.zeros(d) if c0 is None else np.asarray(c0, dtype=float).reshape(d)
    bu = np.ones((d, du)) if bu is None else np.asarray(bu, dtype=float).reshape(d, -1)
    bv = np.ones((d, dv)) if bv is None else np.asarray(bv, dtype=float).reshape(d, -1)
    fparams = np.concatenate([c0, [drift_amp, drift_phase], bu.ravel(), bv.ravel()])
    iparams = [d, bu.shape[1], bv.shape[1]]
    dyn = _CatalogDynamics(1, fparams, iparams, "separable_affine")
    dyn.depends_on_measure = False
    return dyn


def bilinear(d, gain=None, c0=None) -> Dynamics:
    """f = c0 + gain * (u v), scalar controls."""
    gain = np.ones(d) if gain is None else np.asarray(gain, dtype=float).reshape(d)
    c0 = np.zeros(d) if c0 is None else np.asarray(c0, dtype=float).reshape(d)
    dyn = _CatalogDynamics(2, np.concatenate([c0, gain]), [d], "bilinear")
    dyn.depends_on_measure = False
    return dyn


def mean_field_attraction(d, gain=1.0, bu=None, bv=None) -> Dynamics:
    """f = gain * sum_j w_j sin(2pi(y_j - x)) + bu u + bv v, scalar controls."""
    bu = np.zeros(d) if bu is None else np.asarray(bu, dtype=float).reshape(d)
    bv = np.zeros(d) if bv is None else np.asarray(bv, dtype=float).reshape(d)
    dyn = _CatalogDynamics(3, np.concatenate([[gain], bu, bv]), [d],
                           "mean_field_attraction")
    dyn.depends_on_measure = True
    return dyn


def custom_polynomial(d, terms) -> Dynamics:
    """f_i = sum over terms of coef * T(x_c) * u^p * v^q, scalar controls.

    Each term: (out, trig, coord, wavenumber, p, q, coef) with trig in
    {0: const, 1: sin, 2: cos} and integer wavenumber (continuity on the
    torus).
    """
    iparams = [d, len(terms)]
    fparams = []
    for (out, trig, coord, wave, p, q, coef) in terms:
        if trig != 0 and abs(wave - round(wave)) > 1e-12:
            raise StructuralError("polynomial wavenumbers must be integers on the torus")
        iparams.extend([int(out), int(trig), int(coord), int(p), int(q)])
        fparams.extend([float(wave), float(coef)])
    dyn = _CatalogDynamics(4, fparams, iparams, "custom_polynomial")
    dyn.depends_on_measure = False
    return dyn


class CallableDynamics(Dynamics):
    """Wrap a user-supplied scalar evaluator f(t, x, m, u, v) -> (d,)."""

    def __init__(self, fn: Callable, depends_on_measure: bool = True):
        self._fn = fn
        self.depends_on_measure = depends_on_measure

    def __call__(self, t, x, m, u, v):
        return np.asarray(self._fn(t, wrap(np.asarray(x, dtype=float)), m, u, v), dtype=float)


@dataclass(frozen=True)
class Vectogram:
    """Velocities attainable with one side frozen; the hull of `generators`."""

    side: str                  # "F1" (over v) or "F2" (over u)
    anchor: tuple              # (t, x, control index of the frozen side)
    generators: np.ndarray     # (K, d)


class DynamicsSpec:
    """The full game datum: grids, dynamics, declared constants.

    `lipschitz` is the declared L >= 1 for (x, m); `modulus` covers the
    (t, u, v) continuity; `speed_bound` dominates ||f||.  Constants are
    declared by the scenario and spot-verified by `validate`, never
    silently inferred.
    """

    def __init__(self, d, u_atoms, v_atoms, dynamics: Dynamics, *,
                 lipschitz: float, modulus: Modulus, speed_bound: float,
                 rho_u=None, rho_v=None):
        self.d = int(d)
        self.u_atoms = np.atleast_2d(np.asarray(u_atoms, dtype=np.float64))
        self.v_atoms = np.atleast_2d(np.asarray(v_atoms, dtype=np.float64))
        if self.u_atoms.ndim != 2 or self.v_atoms.ndim != 2:
            raise StructuralError("control grids must be (K, dim) arrays")
        self.dynamics = dynamics
        if lipschitz < 1.0:
            raise StructuralError("declared Lipschitz constant must be >= 1",
                                  lipschitz=lipschitz)
        self.lipschitz = float(lipschitz)
        self.modulus = modulus
        self.speed_bound = float(speed_bound)
        self.rho_u = self._base_metric(self.u_atoms) if rho_u is None else np.asarray(rho_u)
        self.rho_v = self._base_metric(self.v_atoms) if rho_v is None else np.asarray(rho_v)
        self.hat_rho_u_matrix = self.modulus(self.rho_u) + self.rho_u
        self.hat_rho_v_matrix = self.modulus(self.rho_v) + self.rho_v

    @staticmethod
    def _base_metric(atoms):
        diff = atoms[:, None, :] - atoms[None, :, :]
        return np.sqrt((diff * diff).sum(axis=-1))

    # -- spaces ----------------------------------------------------------
    def u_grid(self) -> GridComponent:
        return GridComponent("U", self.u_atoms, self.hat_rho_u_matrix)

    def v_grid(self) -> GridComponent:
        return GridComponent("V", self.v_atoms, self.hat_rho_v_matrix)

    def measure_space(self) -> ProductSpace:
        return measure_space(self.d)

    def control_space_u(self) -> ProductSpace:
        return control_space(self.d, self.u_grid())

    def control_space_v(self) -> ProductSpace:
        return control_space(self.d, self.v_grid())

    def direction_space_u(self, radius: float) -> ProductSpace:
        return direction_space(self.d, self.u_grid(), radius)

    def direction_space_v(self, radius: float) -> ProductSpace:
        return direction_space(self.d, self.v_grid(), radius)

    # -- metric and evaluation --------------------------------------------
    def hat_rho_u(self, i: int, j: int) -> float:
        """Changed metric on U: modulus(rho) + rho.  At least rho pointwise."""
        return float(self.hat_rho_u_matrix[i, j])

    def hat_rho_v(self, i: int, j: int) -> float:
        return float(self.hat_rho_v_matrix[i, j])

    def eval_f(self, t, x, m, u_index: int, v_index: int) -> np.ndarray:
        pos, w = _as_particles(m)
        return np.asarray(self.dynamics(t, x, _MeasureView(pos, w),
                                        self.u_atoms[u_index], self.v_atoms[v_index]))

    def eval_grid(self, t, x_arr, m) -> np.ndarray:
        pos, w = _as_particles(m)
        return self.dynamics.eval_grid(t, np.atleast_2d(x_arr), pos, w,
                                       self.u_atoms, self.v_atoms)

    def eval_F1(self, t, x, m, u_index: int) -> Vectogram:
        """Generators f(t, x, m, u, v) over the v-grid (hull approximates co)."""
        grid = self.eval_grid(t, np.atleast_2d(x), m)
        return Vectogram("F1", (float(t), np.asarray(x, dtype=float), int(u_index)),
                         grid[0, u_index, :, :])

    def eval_F2(self, t, x, m, v_index: int) -> Vectogram:
        grid = self.eval_grid(t, np.atleast_2d(x), m)
        return Vectogram("F2", (float(t), np.asarray(x, dtype=float), int(v_index)),
                         grid[0, :, v_index, :])

    # -- empirical validation ---------------------------------------------
    def validate(self, n_probes: int = 1000, rng=None, t_range=(0.0, 1.0)) -> dict:
        """Spot-check the declared constants on random probes.

        Returns margins (how much slack the declared constants leave);
        negative margin beyond 1e-9 raises StructuralError.
        """
        rng = np.random.default_rng(0) if rng is None else rng
        worst_lip = -np.inf
        worst_speed = 0.0
        space = self.measure_space()
        for _ in range(int(n_probes)):
            t = rng.uniform(*t_range)
            k = int(rng.integers(1, 5))
            pos1 = rng.random((k, self.d))
            pos2 = wrap(pos1 + 0.25 * rng.standard_normal((k, self.d)))
            w = np.full(k, 1.0 / k)
            m1 = DiscreteMeasure(space, (pos1,), w)
            m2 = DiscreteMeasure(space, (pos2,), w)
            x1 = rng.random(self.d)
            x2 = wrap(x1 + 0.25 * rng.standard_normal(self.d))
            iu = int(rng.integers(self.u_atoms.shape[0]))
            iv = int(rng.integers(self.v_atoms.shape[0]))
            f1 = self.eval_f(t, x1, m1, iu, iv)
            f2 = self.eval_f(t, x2, m2, iu, iv)
            w2, _ = wasserstein2(m1, m2)
            bound = self.lipschitz * (torus_distance(x1, x2) + w2)
            diff = float(np.linalg.norm(f1 - f2))
            worst_lip = max(worst_lip, diff - bound)
            worst_speed = max(worst_speed, float(np.linalg.norm(f1)))
        report = {
            "lipschitz_margin": float(-worst_lip),
            "speed_margin": float(self.speed_bound - worst_speed),
            "probes": int(n_probes),
        }
        if worst_lip > 1e-9:
            raise StructuralError("declared Lipschitz constant violated",
                                  excess=float(worst_lip))
        if worst_speed > self.speed_bound + 1e-9:
            raise StructuralError("declared speed bound violated",
                                  max_speed=worst_speed)
        return report


def min_norm_point(points: np.ndarray, tol: float = 1e-12, max_iter: int = 1000):
    """Wolfe's minimum-norm-point algorithm over co(points).

    Returns (min norm, hull weights).  Exact (finite) up to the numeric
    tolerance; the workhorse behind `dist_to_vectogram`.
    """
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    k = p.shape[0]
    if k == 0:
        raise StructuralError("empty generator list")
    scale = max(1.0, float(np.max(np.abs(p)) ** 2))
    start = int(np.argmin((p * p).sum(axis=1)))
    active = [start]
    lam = np.array([1.0])
    x = p[start].copy()
    for _ in range(max_iter):
        scores = p @ x
        j = int(np.argmin(scores))
        if scores[j] >= x @ x - tol * scale:
            break
        if j in active:
            break
        active.append(j)
        lam = np.append(lam, 0.0)
        # minor cycle: affine minimizer over the active set, stepping back
        # toward feasibility until all barycentric weights are nonnegative.
        for _ in range(max_iter):
            q = p[active]
            gram = q @ q.T
            kkt = np.zeros((len(active) + 1, len(active) + 1))
            kkt[:-1, :-1] = gram
            kkt[:-1, -1] = 1.0
            kkt[-1, :-1] = 1.0
            rhs = np.zeros(len(active) + 1)
            rhs[-1] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            mu = sol[:-1]
            if mu.min() >= -1e-14:
                lam = mu
                break
            shrink = lam - mu
            mask = shrink > 1e-15
            theta = np.min(lam[mask] / shrink[mask])
            lam = (1.0 - theta) * lam + theta * mu
            lam[lam < 1e-15] = 0.0
            keep = lam > 0.0
            if not keep.any():
                keep[int(np.argmax(mu))] = True
            active = [a for a, kp in zip(active, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = p[active].T @ lam
    full = np.zeros(k)
    full[np.asarray(active)] = lam
    return float(np.linalg.norm(x)), full


def dist_to_vectogram(w, vg) -> float:
    """Euclidean distance from w to the hull of the vectogram generators."""
    gens = np.atleast_2d(vg.generators if isinstance(vg, Vectogram) else vg)
    if gens.shape[0] == 0:
        raise StructuralError("empty generator list")
    dist, _ = min_norm_point(gens - np.asarray(w, dtype=float)[None, :])
    return dist


def check_isaacs(spec: DynamicsSpec, probes: int = 200, rng=None,
                 t_range=(0.0, 1.0), tol: float = 1e-9) -> dict:
    """Minimax gap of <w, f> over the grids on random probes (>= 0 up to fp).

    A gap below `tol` certifies the discretized Isaacs condition on the
    sampled positions.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    space = spec.measure_space()
    max_gap = -np.inf
    argmax = None
    for _ in range(int(probes)):
        t = rng.uniform(*t_range)
        x = rng.random(spec.d)
        kk = int(rng.integers(1, 5))
        pos = rng.random((kk, spec.d))
        mw = np.full(kk, 1.0 / kk)
        m = DiscreteMeasure(space, (pos,), mw)
        w = rng.standard_normal(spec.d)
        w *= rng.uniform(0.5, 2.0) / max(np.linalg.norm(w), 1e-12)
        vals = np.einsum("uvd,d->uv", spec.eval_grid(t, x[None, :], m)[0], w)
        gap = float(vals.max(axis=1).min() - vals.min(axis=0).max())
        if gap > max_gap:
            max_gap = gap
            argmax = {"t": float(t), "x": x.tolist(), "w": w.tolist()}
    return {"max_gap": float(max_gap), "argmax": argmax, "probes": int(probes),
            "satisfied": bool(max_gap <= tol)}


__all__ = [
    "Modulus", "Dynamics", "CallableDynamics", "Vectogram", "DynamicsSpec",
    "separable_affine", "bilinear", "mean_field_attraction", "custom_polynomial",
    "min_norm_point", "dist_to_vectogram", "check_isaacs",
]
