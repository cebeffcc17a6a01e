"""Shift and transfer operators on measures.

Direction measures are clouds over torus x control-grid x direction-ball;
this module moves them around: the state shift (x, u, w) -> x + tau w,
its control-keeping extension, routing of conditionals backward through a
transport plan, the straight-line lift into path space, gluing of path
ensembles at a common junction, and the difference-quotient inverse of
the lift.
"""

from __future__ import annotations

import numpy as np

from .errors import StructuralError
from .flows import PathEnsemble
from .measures import (DiscreteMeasure, ProductSpace, control_space, disintegrate,
                       measure_space)
from .torus import wrap
from .transport import TransportPlan, wasserstein2


def _direction_parts(eta: DiscreteMeasure):
    ti = eta.space.component_index("torus")
    gi = eta.space.component_index("grid")
    vi = eta.space.component_index("vector")
    return eta.points[ti], eta.points[gi], eta.points[vi]


def direction_radius(eta: DiscreteMeasure) -> float:
    comp = eta.space.components[eta.space.component_index("vector")]
    if comp.radius is not None:
        return float(comp.radius)
    _, _, w = _direction_parts(eta)
    return float(np.linalg.norm(w, axis=1).max())


def theta_shift(eta: DiscreteMeasure, tau: float) -> DiscreteMeasure:
    """Push-forward (x, u, w) -> x + tau w onto the torus."""
    if tau < 0:
        raise StructuralError("shift time must be nonnegative", tau=tau)
    x, _, w = _direction_parts(eta)
    return DiscreteMeasure(measure_space(x.shape[1]), (wrap(x + tau * w),),
                           eta.weights, normalize=True)


def xi_shift(eta: DiscreteMeasure, tau: float) -> DiscreteMeasure:
    """Push-forward (x, u, w) -> (x + tau w, u); projects onto theta_shift."""
    if tau < 0:
        raise StructuralError("shift time must be nonnegative", tau=tau)
    x, u, w = _direction_parts(eta)
    grid = eta.space.components[eta.space.component_index("grid")]
    return DiscreteMeasure(control_space(x.shape[1], grid), (wrap(x + tau * w), u),
                           eta.weights, normalize=True)


def compose_plan(pi: TransportPlan, lam: DiscreteMeasure) -> DiscreteMeasure:
    """Route the conditionals of `lam` backward through the plan `pi`.

    `pi` couples a source cloud to a target cloud over X; `lam` lives on
    X x Y with X-marginal equal to pi's target.  The result lives on
    (source X) x Y: new base atoms carry the old conditionals mixed along
    the plan.
    """
    base_count = len(pi.target.space.components)
    base_idx = tuple(range(base_count))
    if not pi.target.space.compatible(lam.space.sub(base_idx)):
        raise StructuralError("plan target space does not match conditional base")
    # match lam's base atoms to pi.target atoms by support bytes
    target_keys = {}
    for i in range(pi.target.n_atoms):
        key = b"|".join(p[i].tobytes() for p in pi.target.points)
        target_keys.setdefault(key, []).append(i)
    groups = disintegrate(lam, base_idx)
    cond_by_target: dict[int, tuple] = {}
    for base_point, base_w, cond in groups:
        key = b"|".join(np.asarray(p).tobytes() for p in base_point)
        if key not in target_keys:
            raise StructuralError("conditional base atom missing from plan target")
        for idx in target_keys[key]:
            cond_by_target[idx] = cond
    # marginal agreement: compare target weights against lam base weights
    lam_w = np.zeros(pi.target.n_atoms)
    for base_point, base_w, _ in groups:
        key = b"|".join(np.asarray(p).tobytes() for p in base_point)
        lam_w[target_keys[key][0]] += base_w
    tgt_w = np.zeros(pi.target.n_atoms)
    for i in range(pi.target.n_atoms):
        key = b"|".join(p[i].tobytes() for p in pi.target.points)
        tgt_w[target_keys[key][0]] += pi.target.weights[i]
    if np.max(np.abs(lam_w - tgt_w)) > 1e-10:
        raise StructuralError("plan target marginal does not equal conditional base",
                              gap=float(np.max(np.abs(lam_w - tgt_w))))
    fiber_idx = tuple(range(base_count, len(lam.space.components)))
    new_cols: list[list] = [[] for _ in lam.space.components]
    new_w: list[float] = []
    for r, c, mass in zip(pi.rows, pi.cols, pi.mass):
        cond = cond_by_target.get(int(c))
        if cond is None or mass <= 0:
            continue
        for bpos in range(base_count):
            new_cols[bpos].extend([pi.source.points[bpos][r]] * cond.n_atoms)
        for fpos, j in enumerate(fiber_idx):
            new_cols[j].extend(list(cond.points[fpos]))
        new_w.extend(list(mass * cond.weights))
    arrays = tuple(np.asarray(c) for c in new_cols)
    out_space = ProductSpace(tuple(pi.source.space.components)
                             + tuple(lam.space.components[j] for j in fiber_idx))
    return DiscreteMeasure(out_space, arrays, np.asarray(new_w), normalize=True)


def line_lift(eta: DiscreteMeasure, t1: float, t2: float, *, nodes: int = 2) -> PathEnsemble:
    """Straight paths t -> y + (t - t1) w with the control label kept."""
    if not t1 < t2:
        raise StructuralError("line lift needs t1 < t2")
    x, u, w = _direction_parts(eta)
    grid = eta.space.components[eta.space.component_index("grid")]
    times = np.linspace(t1, t2, max(2, int(nodes)))
    paths = x[:, None, :] + (times - t1)[None, :, None] * w[:, None, :]
    return PathEnsemble(times, paths, eta.weights, u_labels=u, u_grid=grid,
                        speed_bound=None)


def concatenate(nu1: PathEnsemble, nu2: PathEnsemble, *, tol: float = 1e-9) -> PathEnsemble:
    """Glue two ensembles sharing the junction marginal over torus x U.

    Exact atom matching is used when the junction clouds agree bitwise
    (shared provenance); otherwise atoms are routed through a W2-optimal
    plan of the junction marginals, provided the gap is below `tol`.
    """
    t_mid = nu1.times[-1]
    if abs(t_mid - nu2.times[0]) > 1e-12:
        raise StructuralError("ensembles do not share the junction time",
                              t1_end=float(t_mid), t2_start=float(nu2.times[0]))
    if nu1.u_grid is None or nu2.u_grid is None:
        raise StructuralError("concatenation needs labelled ensembles")
    end1 = wrap(nu1.paths[:, -1, :])
    start2 = wrap(nu2.paths[:, 0, :])
    exact = (nu1.n_atoms == nu2.n_atoms
             and np.array_equal(end1, start2)
             and np.array_equal(nu1.u_labels, nu2.u_labels)
             and np.allclose(nu1.weights, nu2.weights, atol=1e-15, rtol=0))
    pairs = []  # (i in nu1, j in nu2, mass)
    if exact:
        pairs = [(i, i, float(nu1.weights[i])) for i in range(nu1.n_atoms)]
    else:
        m1 = nu1.control_marginal_at(t_mid)
        m2 = nu2.control_marginal_at(t_mid)
        gap, plan = wasserstein2(m1, m2)
        if gap > tol:
            raise StructuralError("junction marginals differ beyond tolerance",
                                  w2_gap=float(gap), tol=tol)
        # plan couples coalesced clouds; map back to atom indices by bytes
        key1 = _junction_keys(end1, nu1.u_labels)
        key2 = _junction_keys(start2, nu2.u_labels)
        srck = _junction_keys(m1.state(), m1.component("grid"))
        tgtk = _junction_keys(m2.state(), m2.component("grid"))
        by_src = {}
        for i, k in enumerate(key1):
            by_src.setdefault(k, []).append(i)
        by_tgt = {}
        for j, k in enumerate(key2):
            by_tgt.setdefault(k, []).append(j)
        for r, c, mass in zip(plan.rows, plan.cols, plan.mass):
            if mass <= 0:
                continue
            src_atoms = by_src.get(srck[r], [])
            tgt_atoms = by_tgt.get(tgtk[c], [])
            if not src_atoms or not tgt_atoms:
                raise StructuralError("junction atom lookup failed")
            src_w = sum(float(nu1.weights[i]) for i in src_atoms)
            tgt_w = sum(float(nu2.weights[j]) for j in tgt_atoms)
            for i in src_atoms:
                for j in tgt_atoms:
                    share = mass * (float(nu1.weights[i]) / src_w) * (
                        float(nu2.weights[j]) / tgt_w)
                    if share > 0:
                        pairs.append((i, j, share))
    times = np.concatenate([nu1.times, nu2.times[1:]])
    n1 = nu1.times.shape[0]
    d = nu1.paths.shape[2]
    paths = np.empty((len(pairs), times.shape[0], d))
    weights = np.empty(len(pairs))
    labels = np.empty(len(pairs), dtype=np.int64)
    for k, (i, j, mass) in enumerate(pairs):
        head = nu1.paths[i]
        tail = nu2.paths[j] - nu2.paths[j, 0] + head[-1]  # continuous lift, snap <= tol
        paths[k, :n1] = head
        paths[k, n1:] = tail[1:]
        weights[k] = mass
        labels[k] = nu1.u_labels[i]
    bound = None
    if nu1.speed_bound is not None and nu2.speed_bound is not None:
        bound = max(nu1.speed_bound, nu2.speed_bound)
    return PathEnsemble(times, paths, weights, u_labels=labels, u_grid=nu1.u_grid,
                        speed_bound=bound)


def _junction_keys(pos, labels):
    pos = np.asarray(pos)
    labels = np.asarray(labels)
    return [pos[i].tobytes() + b"|" + labels[i].tobytes() for i in range(pos.shape[0])]


def difference_quotient(nu: PathEnsemble, *, radius: float | None = None) -> DiscreteMeasure:
    """Per-atom secant direction measure (x(s), u, (x(r)-x(s))/(r-s)).

    Uses the stored continuous lift; requires paths sampled densely enough
    that the per-step displacement stays below 1/4 (unambiguous lift).
    """
    s, r = nu.interval
    if not r > s:
        raise StructuralError("difference quotient needs r > s")
    if nu.u_grid is None or np.any(nu.u_labels < 0):
        raise StructuralError("difference quotient needs constant-u labels")
    step = np.linalg.norm(np.diff(nu.paths, axis=1), axis=2)
    if step.size and step.max() >= 0.25:
        raise StructuralError(
            "paths too coarse for an unambiguous torus lift",
            max_step=float(step.max()))
    w = (nu.paths[:, -1, :] - nu.paths[:, 0, :]) / (r - s)
    rad = radius
    if rad is None:
        rad = nu.speed_bound if nu.speed_bound is not None else float(
            np.linalg.norm(w, axis=1).max())
    from .measures import direction_space

    return DiscreteMeasure(direction_space(nu.paths.shape[2], nu.u_grid, rad),
                           (wrap(nu.paths[:, 0, :]), nu.u_labels, w),
                           nu.weights, normalize=True)


__all__ = [
    "theta_shift", "xi_shift", "compose_plan", "line_lift", "concatenate",
    "difference_quotient", "direction_radius",
]
