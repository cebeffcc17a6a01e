"""Independent test oracles: brute-force enumeration, direct ODE solves,
finite differences.  Deliberately kept free of the library's solver paths
so each dual-route check stays a genuine cross-check.
"""

import itertools

import numpy as np


def brute_force_w2_uniform(cost: np.ndarray) -> float:
    """Min over all permutations of the mean squared cost (equal weights).

    Valid because equal-weight OT admits a permutation optimum.
    """
    n = cost.shape[0]
    best = np.inf
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        val = cost[rows, list(perm)].sum()
        if val < best:
            best = val
    return float(np.sqrt(best / n))


def rk4_coupled(f, x0: np.ndarray, t0: float, t1: float, nsteps: int) -> np.ndarray:
    """Plain RK4 for the coupled particle system dx/dt = f(t, x) with x (m, d)."""
    x = np.asarray(x0, dtype=float).copy()
    dt = (t1 - t0) / nsteps
    for k in range(nsteps):
        t = t0 + k * dt
        k1 = f(t, x)
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def central_difference(fn, x: float, h: float = 1e-6) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def dense_hull_distance(point: np.ndarray, generators: np.ndarray, n: int = 200000,
                        seed: int = 0) -> float:
    """Distance to a convex hull by dense Dirichlet sampling (upper bound)."""
    rng = np.random.default_rng(seed)
    lam = rng.dirichlet(np.ones(generators.shape[0]), size=n)
    pts = lam @ generators
    d = np.linalg.norm(pts - point[None, :], axis=1)
    return float(d.min())
