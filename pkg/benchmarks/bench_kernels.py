"""Benchmark: compiled extension kernels vs the NumPy reference fallback.

Times the two hot kernels behind the toolkit, the pairwise squared torus
cost matrix (inside every W2 solve) and the RK4 ensemble sweep (inside
every flow solve), on both backends, and cross-checks agreement.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

import torusmfg._core as core
from torusmfg._core import reference


def _time(fn, *args, repeat=5, warmup=1):
    for _ in range(warmup):
        out = fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_cost_matrix(rows):
    rng = np.random.default_rng(0)
    for n, d in [(64, 1), (64, 2), (256, 2), (1024, 3)]:
        x = rng.random((n, d))
        y = rng.random((n, d))
        t_ref, ref = _time(reference.pairwise_sq_torus_dist, x, y)
        if core.BACKEND == "compiled":
            t_ext, ext = _time(core.pairwise_sq_torus_dist, x, y)
            assert np.allclose(ref, ext, atol=1e-14)
        else:
            t_ext = float("nan")
        rows.append((f"cost_matrix n={n} d={d}", t_ref, t_ext))


def bench_rk4_sweep(rows):
    rng = np.random.default_rng(1)
    from torusmfg import mean_field_attraction

    dyn = mean_field_attraction(1, gain=0.5, bu=[0.5], bv=[0.5])
    fam, fp, ip = dyn.kernel_args()
    u = np.array([[-1.0], [1.0]])
    v = np.array([[-1.0], [1.0]])
    for a, nsteps in [(4, 1000), (4, 10000), (32, 1000)]:
        x0 = rng.random((a, 1))
        xi = rng.dirichlet(np.ones(2), size=(nsteps, a))
        zeta = rng.dirichlet(np.ones(2), size=(nsteps, a))
        mpos = rng.random((2 * nsteps + 1, a, 1))
        mw = np.full(a, 1.0 / a)
        t_ref, ref = _time(reference.rk4_sweep, fam, fp, ip, x0, 0.0, 1e-3,
                           nsteps, xi, zeta, u, v, mpos, mw, repeat=3)
        if core.BACKEND == "compiled":
            t_ext, ext = _time(core.rk4_sweep, fam, fp, ip, x0, 0.0, 1e-3,
                               nsteps, xi, zeta, u, v, mpos, mw, repeat=3)
            assert np.allclose(ref, ext, atol=1e-12)
        else:
            t_ext = float("nan")
        rows.append((f"rk4_sweep atoms={a} steps={nsteps}", t_ref, t_ext))


def main():
    print(f"active backend: {core.BACKEND}")
    rows = []
    bench_cost_matrix(rows)
    bench_rk4_sweep(rows)
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy ref':>12}  {'compiled':>12}  {'speedup':>8}")
    for name, t_ref, t_ext in rows:
        speed = t_ref / t_ext if t_ext == t_ext and t_ext > 0 else float("nan")
        print(f"{name:<{width}}  {t_ref * 1e3:>10.3f}ms  {t_ext * 1e3:>10.3f}ms"
              f"  {speed:>7.1f}x")


if __name__ == "__main__":
    main()
