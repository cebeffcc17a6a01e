"""Quadratic optimal transport between particle clouds.

Ground cost is the l2 product metric of the space: torus blocks use the
per-coordinate minimal shift, grid blocks their declared metric matrix,
vector blocks the Euclidean distance.  Solves are exact (assignment for
equal-weight clouds of equal size, LP otherwise) up to `exact_threshold`
atoms per side, entropic with annealing and a certified duality gap
above it.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix, vstack

from ._core import pairwise_sq_torus_dist
from .errors import StructuralError
from .measures import DiscreteMeasure, ProductSpace

EXACT_THRESHOLD = 64
MARGINAL_TOL = 1e-10


def product_sq_dist(space: ProductSpace, pts1, pts2) -> np.ndarray:
    """Pairwise squared product-metric cost matrix between two point sets."""
    n = pts1[0].shape[0]
    m = pts2[0].shape[0]
    cost = np.zeros((n, m))
    for comp, a, b in zip(space.components, pts1, pts2):
        if comp.kind == "torus":
            cost += pairwise_sq_torus_dist(a, b)
        elif comp.kind == "grid":
            cost += comp.metric[np.ix_(a, b)] ** 2
        else:
            sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
            cost += np.maximum(sq, 0.0)
    return cost


class TransportPlan:
    """Sparse coupling between two clouds with validated marginals.

    `cost` is the quadratic transport cost of this plan (squared-metric
    units); the associated distance is its square root.
    """

    __slots__ = ("rows", "cols", "mass", "cost", "source", "target", "duality_gap")

    def __init__(self, rows, cols, mass, cost, source: DiscreteMeasure,
                 target: DiscreteMeasure, duality_gap: float = 0.0):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        mass = np.asarray(mass, dtype=np.float64)
        if mass.size and mass.min() < -1e-15:
            raise StructuralError("negative plan mass", min_mass=float(mass.min()))
        mass = np.maximum(mass, 0.0)
        row_sums = np.zeros(source.n_atoms)
        np.add.at(row_sums, rows, mass)
        col_sums = np.zeros(target.n_atoms)
        np.add.at(col_sums, cols, mass)
        if np.max(np.abs(row_sums - source.weights)) > MARGINAL_TOL:
            raise StructuralError(
                "plan row sums do not match source weights",
                gap=float(np.max(np.abs(row_sums - source.weights))))
        if np.max(np.abs(col_sums - target.weights)) > MARGINAL_TOL:
            raise StructuralError(
                "plan column sums do not match target weights",
                gap=float(np.max(np.abs(col_sums - target.weights))))
        for name, val in (("rows", rows), ("cols", cols), ("mass", mass)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)
        object.__setattr__(self, "cost", float(cost))
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "duality_gap", float(duality_gap))

    def __setattr__(self, *_):
        raise AttributeError("TransportPlan is immutable")

    def as_dense(self) -> np.ndarray:
        dense = np.zeros((self.source.n_atoms, self.target.n_atoms))
        np.add.at(dense, (self.rows, self.cols), self.mass)
        return dense

    def to_records(self) -> dict:
        return {
            "rows": [int(r) for r in self.rows],
            "cols": [int(c) for c in self.cols],
            "mass": [float(m) for m in self.mass],
            "cost": self.cost,
            "duality_gap": self.duality_gap,
        }


def identity_plan(m: DiscreteMeasure) -> TransportPlan:
    idx = np.arange(m.n_atoms)
    return TransportPlan(idx, idx, m.weights, 0.0, m, m)


def _round_to_marginals(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Project a nonneg matrix to the transport polytope (Altschuler et al. rounding)."""
    p = plan.copy()
    row = p.sum(axis=1)
    scale = np.minimum(1.0, np.divide(a, row, out=np.ones_like(a), where=row > 0))
    p *= scale[:, None]
    col = p.sum(axis=0)
    scale = np.minimum(1.0, np.divide(b, col, out=np.ones_like(b), where=col > 0))
    p *= scale[None, :]
    err_a = a - p.sum(axis=1)
    err_b = b - p.sum(axis=0)
    total = err_a.sum()
    if total > 1e-18:
        p += np.outer(err_a, err_b) / total
    return p


def _solve_assignment(cost, w):
    rows, cols = linear_sum_assignment(cost)
    total = float((cost[rows, cols] * w).sum())
    return rows, cols, w.copy(), total


def _solve_lp(cost, a, b):
    n, m = cost.shape
    # row-sum and column-sum equality constraints on vec(P); last column
    # constraint dropped (redundant given total mass).
    rows_i = np.repeat(np.arange(n), m)
    cols_j = np.tile(np.arange(m), n)
    var = np.arange(n * m)
    data = np.ones(n * m)
    a_rows = coo_matrix((data, (rows_i, var)), shape=(n, n * m))
    keep = cols_j < m - 1
    a_cols = coo_matrix((data[keep], (cols_j[keep], var[keep])), shape=(m - 1, n * m))
    a_eq = vstack([a_rows, a_cols]).tocsr()
    b_eq = np.concatenate([a, b[:-1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise StructuralError("exact transport LP failed", message=res.message)
    p = res.x.reshape(n, m)
    p = _round_to_marginals(np.maximum(p, 0.0), a, b)
    rr, cc = np.nonzero(p > 1e-16)
    total = float((p * cost).sum())
    return rr, cc, p[rr, cc], total


def _sinkhorn_log(cost, a, b, max_outer=8, max_inner=400, tol=1e-7):
    """Log-domain Sinkhorn with epsilon annealing; returns a rounded plan.

    Tuned as a support finder: the column-generation polish downstream
    restores exactness, so the potentials only need to localize the
    optimal basis, not converge tightly.
    """
    la = np.log(a)
    lb = np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    scale = max(float(cost.max()), 1e-12)
    eps = 0.2 * scale
    eps_floor = 1e-3 * scale
    for _ in range(max_outer):
        for _ in range(max_inner):
            f_new = -eps * _logsumexp((g[None, :] - cost) / eps + lb[None, :], axis=1)
            g_new = -eps * _logsumexp((f_new[:, None] - cost) / eps + la[:, None], axis=0)
            delta = max(np.max(np.abs(f_new - f)), np.max(np.abs(g_new - g)))
            f, g = f_new, g_new
            if delta < tol * max(1.0, scale):
                break
        if eps <= eps_floor:
            break
        eps = max(eps * 0.25, eps_floor)
    plan = np.exp((f[:, None] + g[None, :] - cost) / eps + la[:, None] + lb[None, :])
    return _round_to_marginals(plan, a, b)


def _restricted_lp(cost, a, b, rows, cols):
    n, m = cost.shape
    k = rows.shape[0]
    var = np.arange(k)
    a_rows = coo_matrix((np.ones(k), (rows, var)), shape=(n, k))
    keep = cols < m - 1
    a_cols = coo_matrix((np.ones(int(keep.sum())), (cols[keep], var[keep])),
                        shape=(m - 1, k))
    a_eq = vstack([a_rows, a_cols]).tocsr()
    b_eq = np.concatenate([a, b[:-1]])
    res = linprog(cost[rows, cols], A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    return res


def _entropic_solve(cost, a, b, target_gap, max_rounds=12):
    """Entropic warm start + column-generation polish with a certified gap.

    The annealed Sinkhorn plan seeds a restricted LP support; entries with
    negative reduced cost are pulled in until none remain (or rounds run
    out).  The reported gap is primal minus the c-transform dual value, an
    LP-feasible certificate.
    """
    n, m = cost.shape
    plan = _sinkhorn_log(cost, a, b)
    thresh = 1e-9 / (n * m)
    support = plan > thresh
    # spanning north-west corner path guarantees restricted feasibility
    i = j = 0
    aa, bb = a.copy(), b.copy()
    while i < n and j < m:
        support[i, j] = True
        move = min(aa[i], bb[j])
        aa[i] -= move
        bb[j] -= move
        if aa[i] <= bb[j]:
            i += 1
        else:
            j += 1
    best = None
    scale = max(float(cost.max()), 1e-12)
    for _ in range(max_rounds):
        rows, cols = np.nonzero(support)
        res = _restricted_lp(cost, a, b, rows, cols)
        if not res.success:
            break
        f = res.eqlin.marginals[:n]
        g = np.concatenate([res.eqlin.marginals[n:], [0.0]])
        reduced = cost - f[:, None] - g[None, :]
        p = np.zeros_like(cost)
        p[rows, cols] = np.maximum(res.x, 0.0)
        p = _round_to_marginals(p, a, b)
        primal = float((p * cost).sum())
        g_t = (cost - f[:, None]).min(axis=0)
        f_t = (cost - g_t[None, :]).min(axis=1)
        gap = max(primal - float(a @ f_t + b @ g_t), 0.0)
        if best is None or gap < best[1]:
            best = (p, gap, primal)
        if reduced.min() >= -1e-11 * scale or gap <= target_gap * max(primal, 1e-30):
            break
        # pull in the most negative reduced-cost entry per violating row
        viol_rows = np.nonzero(reduced.min(axis=1) < -1e-11 * scale)[0]
        support[viol_rows, reduced[viol_rows].argmin(axis=1)] = True
    if best is None:  # LP never succeeded: fall back to the rounded plan
        primal = float((plan * cost).sum())
        g_t = (cost).min(axis=0)
        best = (plan, primal - float(b @ g_t), primal)
    p, gap, primal = best
    rr, cc = np.nonzero(p > 1e-18)
    return rr, cc, p[rr, cc], primal, gap


def _logsumexp(x, axis):
    m = np.max(x, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(x - m), axis=axis))


def wasserstein2(m1: DiscreteMeasure, m2: DiscreteMeasure, *,
                 exact_threshold: int = EXACT_THRESHOLD,
                 sinkhorn_gap: float = 1e-6):
    """W2 distance and one optimal plan between clouds on a common space.

    Exact below `exact_threshold` atoms per side (assignment when both
    clouds are uniform with equal atom counts, LP otherwise); entropic
    with annealing above, with `plan.duality_gap` certifying the
    approximation (target: `sinkhorn_gap` * cost).
    """
    if not m1.space.compatible(m2.space):
        raise StructuralError("measures live on incompatible spaces")
    live1 = np.nonzero(m1.weights > 0.0)[0]
    live2 = np.nonzero(m2.weights > 0.0)[0]
    cost = product_sq_dist(m1.space,
                           tuple(p[live1] for p in m1.points),
                           tuple(p[live2] for p in m2.points))
    n, m = cost.shape
    a, b = m1.weights[live1], m2.weights[live2]
    uniform = (
        n == m
        and np.allclose(a, 1.0 / n, atol=1e-12, rtol=0)
        and np.allclose(b, 1.0 / m, atol=1e-12, rtol=0)
    )
    gap = 0.0
    if uniform:
        rows, cols, mass, total = _solve_assignment(cost, a)
    elif max(n, m) <= exact_threshold:
        rows, cols, mass, total = _solve_lp(cost, a, b)
    else:
        rows, cols, mass, total, gap = _entropic_solve(cost, a, b, sinkhorn_gap)
    total = max(total, 0.0)
    plan = TransportPlan(live1[rows], live2[cols], mass, total, m1, m2, duality_gap=gap)
    return float(np.sqrt(total)), plan


__all__ = [
    "product_sq_dist", "TransportPlan", "identity_plan", "wasserstein2",
    "EXACT_THRESHOLD",
]
