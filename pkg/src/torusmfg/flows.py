"""Characteristic ODE and self-consistent measure flows.

A flow produced by a distribution of pairs of controls is computed by
Picard iteration on the frozen measure flow: freeze m(.), RK4-integrate
every particle, recompute m(.), repeat until the sup-over-nodes update
(an identity-coupling upper bound on W2) drops below tolerance.
Contraction holds for (r-s) L < 1; longer intervals are split into
subintervals of length 0.5/L and chained.

Trajectories are stored as continuous lifts in R^d (start wrapped);
measures wrap on evaluation.  `verify_flow` measures the integral
differential-inclusion residual against Riemann sums of vectogram hulls:
exact interval/polygon Minkowski arithmetic for d <= 2, Frank-Wolfe
above that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .errors import ConvergenceError, StructuralError
from .game import DynamicsSpec
from .measures import DiscreteMeasure, GridComponent, control_space, measure_space
from .torus import wrap


@dataclass(frozen=True)
class RelaxedControl:
    """Piecewise-constant-in-time mixture over a finite control grid."""

    times: np.ndarray   # (K+1,) strictly increasing
    mix: np.ndarray     # (K, n_atoms) rows on the simplex

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        mix = np.atleast_2d(np.asarray(self.mix, dtype=np.float64))
        if times.ndim != 1 or times.shape[0] != mix.shape[0] + 1:
            raise StructuralError("relaxed control needs K+1 times for K cells")
        if np.any(np.diff(times) <= 0):
            raise StructuralError("relaxed control times must increase")
        if mix.min() < -1e-12 or np.max(np.abs(mix.sum(axis=1) - 1.0)) > 1e-9:
            raise StructuralError("each cell mixture must lie on the simplex")
        mix = np.maximum(mix, 0.0)
        mix = mix / mix.sum(axis=1, keepdims=True)
        times.flags.writeable = False
        mix.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "mix", mix)

    @staticmethod
    def constant(index: int, n_atoms: int, s: float, r: float) -> "RelaxedControl":
        row = np.zeros((1, n_atoms))
        row[0, index] = 1.0
        return RelaxedControl(np.asarray([s, r]), row)

    @staticmethod
    def uniform(n_atoms: int, s: float, r: float) -> "RelaxedControl":
        return RelaxedControl(np.asarray([s, r]), np.full((1, n_atoms), 1.0 / n_atoms))

    @property
    def interval(self):
        return float(self.times[0]), float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0,
                        self.mix.shape[0] - 1))
        return self.mix[k]

    def dirac_index(self):
        """Atom index if the control is a constant Dirac, else None."""
        hot = self.mix >= 1.0 - 1e-12
        if hot.sum() == self.mix.shape[0] and np.all(hot[:, np.argmax(hot[0])]):
            return int(np.argmax(hot[0]))
        return None

    def cell_average(self, grid: np.ndarray) -> np.ndarray:
        """Exact L1 projection onto the cells of `grid` ((n,) averages per cell)."""
        grid = np.asarray(grid, dtype=np.float64)
        n = grid.shape[0] - 1
        out = np.zeros((n, self.mix.shape[1]))
        for c in range(self.mix.shape[0]):
            a, b = self.times[c], self.times[c + 1]
            lo = np.searchsorted(grid, a, side="right") - 1
            hi = np.searchsorted(grid, b, side="left")
            for k in range(max(lo, 0), min(hi, n)):
                overlap = min(b, grid[k + 1]) - max(a, grid[k])
                if overlap > 0:
                    out[k] += overlap / (grid[k + 1] - grid[k]) * self.mix[c]
        sums = out.sum(axis=1, keepdims=True)
        bad = np.nonzero(sums[:, 0] <= 1e-12)[0]
        for k in bad:  # cells outside the control's span: hold nearest value
            src = self.at(min(max(grid[k], self.times[0]), self.times[-1]))
            out[k] = src
            sums[k] = 1.0
        return out / out.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class ControlledAtom:
    """One seed of the ensemble: state point, relaxed (u, v) pair, weight."""

    state: np.ndarray
    xi: RelaxedControl
    zeta: RelaxedControl
    weight: float


class Kappa:
    """Discrete distribution of pairs of controls over a particle cloud.

    The state marginal must reproduce `m_star`; members of D1[alpha] carry
    Dirac-constant first-player controls.
    """

    def __init__(self, m_star: DiscreteMeasure, atoms):
        self.m_star = m_star
        self.atoms = tuple(atoms)
        if not self.atoms:
            raise StructuralError("kappa needs at least one atom")
        pts = np.asarray([wrap(a.state) for a in self.atoms])
        w = np.asarray([a.weight for a in self.atoms], dtype=np.float64)
        marg = DiscreteMeasure(measure_space(pts.shape[1]), (pts,), w, normalize=True)
        if abs(w.sum() - 1.0) > 1e-9 or not marg.allclose(
                m_star.coalesce(), atol=1e-9):
            raise StructuralError("state marginal of kappa does not match m_star")

    @staticmethod
    def from_alpha(alpha: DiscreteMeasure, zetas, u_size: int, s: float, r: float) -> "Kappa":
        """Member of D1[alpha]: constant u per atom, supplied v-controls."""
        xs = alpha.state()
        labels = alpha.component("grid", "U")
        atoms = []
        for i in range(alpha.n_atoms):
            xi = RelaxedControl.constant(int(labels[i]), u_size, s, r)
            atoms.append(ControlledAtom(xs[i], xi, zetas[i], float(alpha.weights[i])))
        return Kappa(alpha.marginal((0,)), atoms)

    @staticmethod
    def from_beta(beta: DiscreteMeasure, xis, v_size: int, s: float, r: float) -> "Kappa":
        """Member of D2[beta]: constant v per atom, supplied u-controls."""
        xs = beta.state()
        labels = beta.component("grid", "V")
        atoms = []
        for i in range(beta.n_atoms):
            zeta = RelaxedControl.constant(int(labels[i]), v_size, s, r)
            atoms.append(ControlledAtom(xs[i], xis[i], zeta, float(beta.weights[i])))
        return Kappa(beta.marginal((0,)), atoms)


class Flow:
    """Time-indexed particle cloud: the measure flow t -> m(t).

    `node_residuals`, when set by the solver, holds the per-node update
    bound of the final Picard sweep (diagnostic only).
    """

    __slots__ = ("times", "positions", "weights", "node_residuals")

    def __init__(self, times, positions, weights, node_residuals=None):
        self.times = np.asarray(times, dtype=np.float64)
        self.positions = np.asarray(positions, dtype=np.float64)  # (N, M, d) lifted
        self.weights = np.asarray(weights, dtype=np.float64)
        self.node_residuals = node_residuals

    @property
    def interval(self):
        return float(self.times[0]), float(self.times[-1])

    def _locate(self, t: float):
        t0, t1 = self.interval
        if t < t0 - 1e-9 or t > t1 + 1e-9:
            raise StructuralError("flow undefined at requested time", t=float(t),
                                  interval=(t0, t1))
        t = min(max(t, t0), t1)
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0,
                        self.times.shape[0] - 2))
        span = self.times[k + 1] - self.times[k]
        lam = 0.0 if span <= 0 else (t - self.times[k]) / span
        return k, lam

    def particles_at(self, t: float) -> np.ndarray:
        k, lam = self._locate(t)
        pos = (1.0 - lam) * self.positions[k] + lam * self.positions[k + 1]
        return wrap(pos)

    def at(self, t: float) -> DiscreteMeasure:
        pos = self.particles_at(t)
        return DiscreteMeasure(measure_space(pos.shape[1]), (pos,), self.weights,
                               normalize=True)


class PathEnsemble:
    """Weighted (lifted trajectory, control label) pairs on a time grid."""

    __slots__ = ("times", "paths", "weights", "u_labels", "u_grid", "speed_bound")

    def __init__(self, times, paths, weights, u_labels=None, u_grid: GridComponent | None = None,
                 speed_bound: float | None = None):
        times = np.asarray(times, dtype=np.float64)
        paths = np.asarray(paths, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if paths.ndim != 3 or paths.shape[1] != times.shape[0]:
            raise StructuralError("paths must be (atoms, nodes, d) on the time grid")
        if np.any(np.diff(times) <= 0):
            raise StructuralError("ensemble times must increase")
        if abs(weights.sum() - 1.0) > 1e-9 or weights.min() < -1e-12:
            raise StructuralError("ensemble weights must form a probability vector")
        weights = np.maximum(weights, 0.0)
        weights = weights / weights.sum()
        if u_labels is None:
            u_labels = np.full(paths.shape[0], -1, dtype=np.int64)
        u_labels = np.asarray(u_labels, dtype=np.int64)
        if speed_bound is not None:
            seg = np.linalg.norm(np.diff(paths, axis=1), axis=2)
            cap = speed_bound * np.diff(times)[None, :] + 1e-9
            if np.any(seg > cap):
                raise StructuralError(
                    "trajectory violates the declared speed bound",
                    worst=float((seg - cap).max()))
        self.times = times
        self.paths = paths
        self.weights = weights
        self.u_labels = u_labels
        self.u_grid = u_grid
        self.speed_bound = speed_bound

    @property
    def interval(self):
        return float(self.times[0]), float(self.times[-1])

    @property
    def n_atoms(self) -> int:
        return self.paths.shape[0]

    def node_index(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol:
            raise StructuralError("time is not an ensemble grid node", t=float(t))
        return k

    def position(self, t: float) -> np.ndarray:
        flow = Flow(self.times, np.swapaxes(self.paths, 0, 1), self.weights)
        k, lam = flow._locate(t)
        return (1.0 - lam) * self.paths[:, k] + lam * self.paths[:, k + 1]

    def flow(self) -> Flow:
        return Flow(self.times, np.swapaxes(self.paths, 0, 1), self.weights)

    def measure_at(self, t: float) -> DiscreteMeasure:
        pos = wrap(self.position(t))
        return DiscreteMeasure(measure_space(pos.shape[1]), (pos,), self.weights,
                               normalize=True)

    def control_marginal_at(self, t: float) -> DiscreteMeasure:
        """The hat-e_t marginal over torus x U; requires labelled atoms."""
        if self.u_grid is None or np.any(self.u_labels < 0):
            raise StructuralError("ensemble has no constant-u labels")
        pos = wrap(self.position(t))
        return DiscreteMeasure(control_space(pos.shape[1], self.u_grid),
                               (pos, self.u_labels), self.weights, normalize=True)


# ---------------------------------------------------------------------------
# integration


def _sample_controls(atoms, grid_times, n_u, n_v):
    nsteps = grid_times.shape[0] - 1
    xi = np.empty((nsteps, len(atoms), n_u))
    zeta = np.empty((nsteps, len(atoms), n_v))
    for i, atom in enumerate(atoms):
        xi[:, i, :] = atom.xi.cell_average(grid_times)
        zeta[:, i, :] = atom.zeta.cell_average(grid_times)
    return xi, zeta


def _sweep(spec: DynamicsSpec, x0, t0, dt, nsteps, xi_steps, zeta_steps, mpos_half, mw):
    ka = spec.dynamics.kernel_args()
    if ka is not None:
        fam, fp, ip = ka
        return _core.rk4_sweep(fam, fp, ip, x0, t0, dt, nsteps, xi_steps, zeta_steps,
                               spec.u_atoms, spec.v_atoms, mpos_half, mw)
    out = np.empty((nsteps + 1, x0.shape[0], x0.shape[1]))
    out[0] = x0
    x = x0.copy()
    dyn = spec.dynamics
    for k in range(nsteps):
        t = t0 + k * dt
        xi, zt = xi_steps[k], zeta_steps[k]
        m0 = wrap(mpos_half[2 * k])
        mh = wrap(mpos_half[2 * k + 1])
        m1 = wrap(mpos_half[2 * k + 2])
        k1 = dyn.mix_velocity(t, x, m0, mw, spec.u_atoms, spec.v_atoms, xi, zt)
        k2 = dyn.mix_velocity(t + 0.5 * dt, x + 0.5 * dt * k1, mh, mw,
                              spec.u_atoms, spec.v_atoms, xi, zt)
        k3 = dyn.mix_velocity(t + 0.5 * dt, x + 0.5 * dt * k2, mh, mw,
                              spec.u_atoms, spec.v_atoms, xi, zt)
        k4 = dyn.mix_velocity(t + dt, x + dt * k3, m1, mw,
                              spec.u_atoms, spec.v_atoms, xi, zt)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x
    return out


def _half_nodes(paths_nodes):
    """(nsteps+1, A, d) node positions -> (2*nsteps+1, A, d) with midpoints."""
    mids = 0.5 * (paths_nodes[:-1] + paths_nodes[1:])
    out = np.empty((2 * paths_nodes.shape[0] - 1,) + paths_nodes.shape[1:])
    out[0::2] = paths_nodes
    out[1::2] = mids
    return out


def solve_characteristic(s, r, y, m_flow, xi: RelaxedControl, zeta: RelaxedControl,
                         spec: DynamicsSpec, *, dt: float = 1e-3):
    """RK4 solution of the representative-agent ODE under relaxed controls.

    `m_flow` is a Flow, a constant DiscreteMeasure, or a callable
    t -> DiscreteMeasure defined on [s, r].  Returns (times, lifted path).
    """
    nsteps = max(1, int(round((r - s) / dt)))
    dt_eff = (r - s) / nsteps
    times = s + dt_eff * np.arange(nsteps + 1)
    half_times = s + 0.5 * dt_eff * np.arange(2 * nsteps + 1)
    if isinstance(m_flow, Flow):
        mpos = np.stack([m_flow.particles_at(t) for t in half_times])
        mw = m_flow.weights
    elif isinstance(m_flow, DiscreteMeasure):
        mpos = np.broadcast_to(m_flow.state(), (2 * nsteps + 1,) + m_flow.state().shape).copy()
        mw = m_flow.weights
    else:
        try:
            clouds = [m_flow(t) for t in half_times]
        except Exception as exc:  # undefined node is a structural error
            raise StructuralError("measure flow undefined at a required node",
                                  reason=str(exc)) from exc
        sizes = {c.n_atoms for c in clouds}
        if len(sizes) != 1:
            raise StructuralError("measure flow atom count must be constant in time")
        mpos = np.stack([c.state() for c in clouds])
        mw = clouds[0].weights
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    xi_steps, zeta_steps = _sample_controls(
        [ControlledAtom(y, xi, zeta, 1.0)], times, spec.u_atoms.shape[0],
        spec.v_atoms.shape[0])
    paths = _sweep(spec, wrap(y)[None, :], s, dt_eff, nsteps, xi_steps, zeta_steps,
                   np.ascontiguousarray(mpos), mw)
    return times, paths[:, 0, :]


def solve_flow(s, r, m_star: DiscreteMeasure, kappa: Kappa, spec: DynamicsSpec, *,
               dt: float = 1e-3, picard_tol: float = 1e-8, max_iters: int = 60):
    """Self-consistent flow produced by a distribution of pairs of controls.

    Returns (ensemble, flow, residual ladder).  Raises ConvergenceError
    (carrying the ladder) if a Picard stage fails to contract.
    """
    if not kappa.m_star.coalesce().allclose(m_star.coalesce(), atol=1e-9):
        raise StructuralError("kappa state marginal does not match m_star")
    nsteps = max(1, int(round((r - s) / dt)))
    dt_eff = (r - s) / nsteps
    times = s + dt_eff * np.arange(nsteps + 1)
    atoms = kappa.atoms
    a = len(atoms)
    x0 = wrap(np.asarray([at.state for at in atoms], dtype=np.float64).reshape(a, -1))
    weights = np.asarray([at.weight for at in atoms], dtype=np.float64)
    xi_steps, zeta_steps = _sample_controls(atoms, times, spec.u_atoms.shape[0],
                                            spec.v_atoms.shape[0])

    chunk_steps = max(1, int(np.floor(0.5 / (spec.lipschitz * dt_eff))))
    all_paths = np.empty((nsteps + 1, a, x0.shape[1]))
    all_paths[0] = x0
    residuals: list[float] = []
    node_residuals = np.zeros(nsteps + 1)
    start = 0
    coupled = spec.dynamics.depends_on_measure
    while start < nsteps:
        stop = min(start + chunk_steps, nsteps)
        nloc = stop - start
        xloc = all_paths[start]
        frozen = np.broadcast_to(xloc, (2 * nloc + 1, a, x0.shape[1])).copy()
        if not coupled:
            # m-independent dynamics: one sweep is the exact fixed point
            paths = _sweep(spec, xloc, times[start], dt_eff, nloc,
                           xi_steps[start:stop], zeta_steps[start:stop], frozen, weights)
            residuals.append(0.0)
        else:
            for _ in range(max_iters):
                paths = _sweep(spec, xloc, times[start], dt_eff, nloc,
                               xi_steps[start:stop], zeta_steps[start:stop], frozen, weights)
                new_frozen = _half_nodes(paths)
                diff = new_frozen - frozen
                per_half = np.sqrt(np.einsum("kad,kad,a->k", diff, diff, weights))
                res = float(per_half.max())
                residuals.append(res)
                frozen = new_frozen
                if res < picard_tol:
                    node_residuals[start : stop + 1] = per_half[0::2]
                    break
            else:
                raise ConvergenceError("Picard iteration did not converge", residuals)
        all_paths[start + 1 : stop + 1] = paths[1:]
        start = stop

    u_labels = np.asarray([
        at.xi.dirac_index() if at.xi.dirac_index() is not None else -1 for at in atoms],
        dtype=np.int64)
    ensemble = PathEnsemble(times, np.swapaxes(all_paths, 0, 1), weights,
                            u_labels=u_labels, u_grid=spec.u_grid(),
                            speed_bound=spec.speed_bound)
    flow = ensemble.flow()
    flow.node_residuals = node_residuals
    return ensemble, flow, residuals


# ---------------------------------------------------------------------------
# differential-inclusion residual


def _hull_1d(disp, lo, hi):
    if disp < lo:
        return lo - disp
    if disp > hi:
        return disp - hi
    return 0.0


def _convex_hull_2d(points):
    """Monotone chain; returns CCW vertices (handles degenerate inputs)."""
    pts = np.unique(np.round(np.asarray(points, dtype=np.float64), 15), axis=0)
    if pts.shape[0] <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for q in seq:
            while len(out) >= 2:
                u = out[-1] - out[-2]
                v = q - out[-2]
                if u[0] * v[1] - u[1] * v[0] > 1e-18:
                    break
                out.pop()
            out.append(q)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.asarray(hull if len(hull) >= 2 else [pts[0]])


def _minkowski_polygon(hulls):
    """Minkowski sum of convex polygons/segments/points in the plane."""
    base = np.zeros(2)
    edges = []
    for h in hulls:
        if h.shape[0] == 1:
            base += h[0]
            continue
        # bottom-most (then left-most) vertex anchors the walk
        k = np.lexsort((h[:, 0], h[:, 1]))[0]
        base += h[k]
        rolled = np.roll(h, -k, axis=0)
        if h.shape[0] == 2:
            e = rolled[1] - rolled[0]
            edges.append(e)
            edges.append(-e)
        else:
            edges.extend(np.diff(np.vstack([rolled, rolled[:1]]), axis=0))
    if not edges:
        return base[None, :]
    edges = np.asarray(edges)
    ang = np.arctan2(edges[:, 1], edges[:, 0]) % (2.0 * np.pi)
    edges = edges[np.argsort(ang, kind="stable")]
    verts = base + np.vstack([np.zeros(2), np.cumsum(edges, axis=0)[:-1]])
    return verts


def _dist_point_polygon(p, verts):
    if verts.shape[0] == 1:
        return float(np.linalg.norm(p - verts[0]))
    nxt = np.roll(verts, -1, axis=0)
    e = nxt - verts
    rel = p[None, :] - verts
    cross = e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]
    if np.all(cross >= -1e-12):  # CCW polygon: inside or on boundary
        return 0.0
    tt = np.clip(np.einsum("kd,kd->k", rel, e) / np.maximum((e * e).sum(axis=1), 1e-300),
                 0.0, 1.0)
    proj = verts + tt[:, None] * e
    return float(np.min(np.linalg.norm(p[None, :] - proj, axis=1)))


def _dist_minkowski_fw(disp, gen_blocks, tol=1e-9, max_iter=5000):
    """Frank-Wolfe distance to a Minkowski sum of scaled hulls (d >= 3)."""
    z = np.sum([g.mean(axis=0) for g in gen_blocks], axis=0)
    for _ in range(max_iter):
        grad = z - disp
        v = np.sum([g[int(np.argmin(g @ grad))] for g in gen_blocks], axis=0)
        gap = float(grad @ (z - v))
        if gap <= tol * tol:
            break
        dv = v - z
        denom = float(dv @ dv)
        if denom <= 1e-300:
            break
        step = min(max(float((disp - z) @ dv) / denom, 0.0), 1.0)
        if step <= 0.0:
            break
        z = z + step * dv
    return float(np.linalg.norm(z - disp))


def verify_flow(ensemble: PathEnsemble, flow: Flow, spec: DynamicsSpec,
                t_from: float, t_to: float) -> float:
    """Integral residual of the F1 differential inclusion along the ensemble.

    Left-endpoint Riemann sums of vectogram hulls (Minkowski sums)
    approximate the time integral; a genuine flow yields O(mesh) residual.
    """
    if t_to < t_from:
        t_from, t_to = t_to, t_from
    i1 = ensemble.node_index(t_from)
    i2 = ensemble.node_index(t_to)
    if i1 == i2:
        return 0.0
    if ensemble.u_grid is None or np.any(ensemble.u_labels < 0):
        raise StructuralError("verify_flow needs constant-u labelled atoms")
    a = ensemble.n_atoms
    d = ensemble.paths.shape[2]
    disp = ensemble.paths[:, i2, :] - ensemble.paths[:, i1, :]
    nodes = range(i1, i2)
    dts = np.diff(ensemble.times)
    # per atom, per node: generators of F1 at (t_k, x_a(t_k), m(t_k), u_a)
    per_atom_gens = [[] for _ in range(a)]
    for k in nodes:
        t = float(ensemble.times[k])
        xk = wrap(ensemble.paths[:, k, :])
        grid = spec.eval_grid(t, xk, (flow.particles_at(t), flow.weights))
        for ia in range(a):
            per_atom_gens[ia].append(dts[k] * grid[ia, ensemble.u_labels[ia], :, :])
    total = 0.0
    for ia in range(a):
        blocks = per_atom_gens[ia]
        if d == 1:
            lo = sum(float(b.min()) for b in blocks)
            hi = sum(float(b.max()) for b in blocks)
            dist = _hull_1d(float(disp[ia, 0]), lo, hi)
        elif d == 2:
            verts = _minkowski_polygon([_convex_hull_2d(b) for b in blocks])
            dist = _dist_point_polygon(disp[ia], verts)
        else:
            dist = _dist_minkowski_fw(disp[ia], blocks)
        total += float(ensemble.weights[ia]) * dist
    return total


__all__ = [
    "RelaxedControl", "ControlledAtom", "Kappa", "Flow", "PathEnsemble",
    "solve_characteristic", "solve_flow", "verify_flow",
]
