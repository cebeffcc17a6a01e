"""Condensed, deterministic invariant suite over the bundled fixtures.

Miniature versions of the acceptance checks: each item reruns a module
oracle (brute-force transport, coupled-ODE integration, transfer-lemma
fuzz, DP-oracle stability, polygon construction, extremal-shift
guarantee, value ordering) at desk scale and reports pass/fail.  All
randomness is derived from the run seed through splittable streams.
"""

from __future__ import annotations

import itertools

import numpy as np

from .engine import (ConstantCompletion, Partition, RandomMixtureCompletion,
                     extremal_shift_strategy, play_stepwise, value_oracle_small,
                     estimate_gamma1, estimate_gamma2, ConstantControlStrategy)
from .errors import PolygonStuckError
from .flows import ControlledAtom, Kappa, RelaxedControl, solve_flow, verify_flow
from .measures import DiscreteMeasure, control_space, measure_space
from .rng import stream
from .scenario import bundled_scenario
from .shifts import compose_plan, xi_shift
from .stability import (LambdaFunctional, check_u_stable_infinitesimal,
                        check_v_stable_infinitesimal, check_v_stable_integral,
                        default_tolerance, euler_polygon)
from .transport import product_sq_dist, wasserstein2


def _brute_w2_uniform(cost):
    n = cost.shape[0]
    rows = np.arange(n)
    best = min(cost[rows, list(perm)].sum()
               for perm in itertools.permutations(range(n)))
    return float(np.sqrt(best / n))


def _random_cloud(rng, n, d=1):
    return DiscreteMeasure(measure_space(d), (rng.random((n, d)),),
                           np.full(n, 1.0 / n))


def _random_eta(rng, spec, n, c):
    from .measures import direction_space

    x = rng.random((n, 1))
    u = rng.integers(0, spec.u_atoms.shape[0], size=n)
    w = rng.uniform(-c, c, size=(n, 1))
    wts = rng.random(n) + 0.1
    return DiscreteMeasure(direction_space(1, spec.u_grid(), c), (x, u, w),
                           wts / wts.sum())


def _item_ot(seed):
    rng = stream(seed, "selftest", "ot")
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        m1 = _random_cloud(rng, n, d=1)
        m2 = _random_cloud(rng, n, d=1)
        d, _ = wasserstein2(m1, m2)
        ref = _brute_w2_uniform(product_sq_dist(m1.space, m1.points, m2.points))
        worst = max(worst, abs(d - ref))
    return {"name": "ot_vs_permutation_brute_force", "worst_error": worst,
            "ok": bool(worst <= 1e-9)}


def _item_lemma1(seed):
    scn = bundled_scenario("separable_affine")
    spec = scn.spec
    rng = stream(seed, "selftest", "lemma1")
    worst = -np.inf
    for _ in range(100):
        c = float(rng.uniform(0.5, 2.5))
        eta = _random_eta(rng, spec, int(rng.integers(1, 5)), c)
        alpha = eta.marginal((0, 1), coalesce=False)
        ap = DiscreteMeasure(control_space(1, spec.u_grid()),
                             (rng.random((3, 1)), rng.integers(0, 2, 3)),
                             np.full(3, 1 / 3))
        tau, theta = rng.random(2) * 0.5
        w2a, plan = wasserstein2(ap, alpha)
        lhs, _ = wasserstein2(xi_shift(eta, float(tau)),
                              xi_shift(compose_plan(plan, eta), float(theta)))
        worst = max(worst, lhs - (w2a + abs(tau - theta) * c))
    return {"name": "lemma1_transfer_inequality", "worst_violation": worst,
            "ok": bool(worst <= 1e-7)}


def _item_lemma2(seed):
    from .game import dist_to_vectogram

    scn = bundled_scenario("separable_affine")
    spec = scn.spec
    rng = stream(seed, "selftest", "lemma2")
    worst = -np.inf
    for _ in range(40):
        c = 2.3
        eta = _random_eta(rng, spec, int(rng.integers(1, 4)), c)
        alpha = eta.marginal((0, 1), coalesce=False)
        ap = DiscreteMeasure(control_space(1, spec.u_grid()),
                             (rng.random((2, 1)), rng.integers(0, 2, 2)),
                             np.full(2, 0.5))
        t = float(rng.random() * 0.4)
        tp = t + float(rng.standard_normal() * 0.05)
        w2a, plan = wasserstein2(ap, alpha)
        etap = compose_plan(plan, eta)

        def avg(tt, ee, mm):
            tot = 0.0
            for i in range(ee.n_atoms):
                vg = spec.eval_F1(tt, ee.state()[i], mm,
                                  int(ee.component("grid")[i]))
                tot += float(ee.weights[i]) * dist_to_vectogram(
                    ee.component("vector")[i], vg)
            return tot

        lhs = abs(avg(t, eta, alpha.marginal((0,)))
                  - avg(tp, etap, ap.marginal((0,))))
        rhs = spec.modulus(abs(tp - t)) + 2 * spec.lipschitz * w2a
        worst = max(worst, lhs - rhs)
    return {"name": "lemma2_vectogram_inequality", "worst_violation": worst,
            "ok": bool(worst <= 1e-7)}


def _item_flow_fidelity(seed):
    scn = bundled_scenario("mean_field_attraction")
    spec = scn.spec
    m0 = scn.initial
    atoms = [ControlledAtom(m0.state()[i], RelaxedControl.constant(0, 1, 0.0, 0.4),
                            RelaxedControl.constant(0, 1, 0.0, 0.4), 0.25)
             for i in range(4)]
    _, flow, _ = solve_flow(0.0, 0.4, m0, Kappa(m0, atoms), spec, dt=1e-3)
    w = m0.weights

    def coupled(t, x):
        diff = x[None, :, 0] - x[:, 0][:, None]
        return (np.sin(2 * np.pi * diff) @ w)[:, None]

    x = m0.state().copy()
    nsteps, dtb = 4000, 0.4 / 4000
    for k in range(nsteps):
        t = k * dtb
        k1 = coupled(t, x)
        k2 = coupled(t + dtb / 2, x + dtb / 2 * k1)
        k3 = coupled(t + dtb / 2, x + dtb / 2 * k2)
        k4 = coupled(t + dtb, x + dtb * k3)
        x = x + dtb / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    ref = DiscreteMeasure(measure_space(1), (x % 1.0,), w)
    gap, _ = wasserstein2(flow.at(0.4), ref)
    return {"name": "flow_vs_coupled_ode_oracle", "endpoint_w2": float(gap),
            "ok": bool(gap <= 1e-5)}


def _item_oracle_checks(seed):
    scn = bundled_scenario("separable_affine")
    spec = scn.spec
    psi = value_oracle_small(spec, scn.payoff, 8,
                             np.linspace(0, scn.horizon, 17), 2)
    rng = stream(seed, "selftest", "oracle-checks")
    c = scn.radius_c
    n = int(scn.solver["n"])
    fails = 0
    worst_v, worst_u = np.inf, -np.inf
    for _ in range(6):
        s = float(rng.uniform(0, scn.horizon - 0.02))
        x = rng.random((2, 1))
        alpha = DiscreteMeasure(control_space(1, spec.u_grid()),
                                (x, rng.integers(0, 2, 2)), np.full(2, 0.5))
        beta = DiscreteMeasure(control_space(1, spec.v_grid()),
                               (x, rng.integers(0, 2, 2)), np.full(2, 0.5))
        rv = check_v_stable_infinitesimal(psi, s, alpha, c, spec, n=n,
                                          horizon=scn.horizon, rng=rng)
        ru = check_u_stable_infinitesimal(psi, s, beta, c, spec, n=n,
                                          horizon=scn.horizon, rng=rng)
        fails += (rv.verdict == "fail") + (ru.verdict == "fail")
        worst_v = min(worst_v, rv.best_value)
        worst_u = max(worst_u, ru.best_value)
    return {"name": "oracle_infinitesimal_stability", "certified_fails": fails,
            "worst_v": worst_v, "worst_u": worst_u,
            "tolerance": default_tolerance(spec, c, n), "ok": bool(fails == 0)}


def _item_integral_and_polygon(seed):
    scn = bundled_scenario("separable_affine")
    spec = scn.spec
    psi = value_oracle_small(spec, scn.payoff, 8,
                             np.linspace(0, scn.horizon, 17), 2)
    rng = stream(seed, "selftest", "integral")
    x = rng.random((2, 1))
    alpha = DiscreteMeasure(control_space(1, spec.u_grid()),
                            (x, rng.integers(0, 2, 2)), np.full(2, 0.5))
    rep = check_v_stable_integral(psi, 0.05, 0.3, alpha, spec, search_budget=60,
                                  rng=rng)
    n = 8
    nu, diag = euler_polygon(psi, 0.0, scn.horizon, alpha, n, spec,
                             c=scn.radius_c, rng=rng)
    res = verify_flow(nu, nu.flow(), spec, 0.0, scn.horizon)
    span = scn.horizon
    bound = (spec.modulus(1 / n) + 2 * spec.lipschitz * scn.radius_c / n
             + 2 * spec.lipschitz * span / n + 1 / n) * span
    slack = 2 * spec.speed_bound * (1 / (8 * 2)) * span
    return {"name": "oracle_integral_and_polygon",
            "integral_verdict": rep.verdict,
            "polygon_monotone": bool(diag["monotonicity_ok"]),
            "polygon_residual": float(res), "residual_bound": float(bound + slack),
            "ok": bool(rep.verdict == "pass" and diag["monotonicity_ok"]
                       and res <= bound + slack)}


def _item_negative_control(seed):
    from .game import DynamicsSpec, Modulus, separable_affine

    dyn = separable_affine(1, bu=[[0.0]], bv=[[0.0]])
    spec = DynamicsSpec(1, np.array([[0.0]]), np.array([[0.0]]), dyn,
                        lipschitz=1.0, modulus=Modulus(0.0), speed_bound=1e-9)
    psi = LambdaFunctional(lambda t, m: -t)
    rng = stream(seed, "selftest", "negative")
    x = rng.random((2, 1))
    alpha = DiscreteMeasure(control_space(1, spec.u_grid()),
                            (x, np.zeros(2, dtype=np.int64)), np.full(2, 0.5))
    rep_v = check_v_stable_infinitesimal(psi, 0.1, alpha, 1.0, spec, horizon=1.0)
    rep_u = check_u_stable_infinitesimal(LambdaFunctional(lambda t, m: t), 0.1,
                                         alpha, 1.0, spec, horizon=1.0)
    try:
        euler_polygon(psi, 0.0, 0.5, alpha, 8, spec, c=1.0, rng=rng)
        stuck = None
    except PolygonStuckError as exc:
        stuck = exc.step
    return {"name": "negative_control_certified_fail",
            "v_verdict": rep_v.verdict, "u_verdict": rep_u.verdict,
            "polygon_stuck_step": stuck,
            "ok": bool(rep_v.verdict == "fail" and rep_u.verdict == "fail"
                       and stuck == 0)}


def _item_extremal_shift(seed):
    scn = bundled_scenario("separable_affine")
    spec = scn.spec
    psi = value_oracle_small(spec, scn.payoff, 8,
                             np.linspace(0, scn.horizon, 17), 2)
    m0 = scn.initial
    part = Partition.uniform(0.0, scn.horizon, 8)
    worst = -np.inf
    for j in range(6):
        adv = RandomMixtureCompletion(2) if j >= 2 else ConstantCompletion(j % 2)
        strat = extremal_shift_strategy(psi, "first", spec, seed=seed + j)
        res = play_stepwise(0.0, m0, strat, part, adv, spec, scn.payoff, dt=5e-3,
                            rng=stream(seed, "selftest", "shift", j))
        worst = max(worst, res.outcome)
    eps = worst - psi.evaluate(0.0, m0)
    return {"name": "extremal_shift_guarantee", "epsilon": float(eps),
            "ok": bool(eps <= 0.15)}


def _item_gamma_ordering(seed):
    out = {}
    ok = True
    for name in ("separable_affine", "bilinear"):
        scn = bundled_scenario(name)
        spec = scn.spec
        part = Partition.uniform(0.0, scn.horizon, 4)
        s1 = [ConstantControlStrategy(spec, "first", j)
              for j in range(spec.u_atoms.shape[0])]
        s2 = [ConstantControlStrategy(spec, "second", j)
              for j in range(spec.v_atoms.shape[0])]
        a1 = [ConstantCompletion(j) for j in range(spec.v_atoms.shape[0])]
        a2 = [ConstantCompletion(j) for j in range(spec.u_atoms.shape[0])]
        g1 = estimate_gamma1(0.0, scn.initial, part, spec, s1, a1, scn.payoff,
                             dt=1e-2, seed=seed)
        g2 = estimate_gamma2(0.0, scn.initial, part, spec, s2, a2, scn.payoff,
                             dt=1e-2, seed=seed)
        out[name] = {"gamma1": g1["estimate"], "gamma2": g2["estimate"]}
        ok = ok and g2["estimate"] <= g1["estimate"] + 1e-9
    return {"name": "gamma_ordering", "estimates": out, "ok": bool(ok)}


def run(out_dir, seed: int) -> dict:
    items = [
        _item_ot(seed),
        _item_lemma1(seed),
        _item_lemma2(seed),
        _item_flow_fidelity(seed),
        _item_oracle_checks(seed),
        _item_integral_and_polygon(seed),
        _item_negative_control(seed),
        _item_extremal_shift(seed),
        _item_gamma_ordering(seed),
    ]
    fixtures = ("separable_affine", "bilinear", "mean_field_attraction",
                "negative_control")
    summary = {
        "seed": int(seed),
        "provenance": {name: bundled_scenario(name).provenance(seed)
                       for name in fixtures},
        "items": items,
        "all_ok": bool(all(i["ok"] for i in items)),
    }
    _dump_artifacts(out_dir, seed)
    return summary


def _dump_artifacts(out_dir, seed):
    """Plot-ready side artifacts; byte-stable across runs with one seed."""
    from .cli import _write_csv, _write_json

    from pathlib import Path

    out = Path(out_dir)
    scn = bundled_scenario("separable_affine")
    prov = scn.provenance(seed)
    psi = value_oracle_small(scn.spec, scn.payoff, 8,
                             np.linspace(0, scn.horizon, 17), 2)
    payload = psi.to_json()
    payload["provenance"] = prov
    _write_json(out / "selftest_oracle.json", payload)
    mfa = bundled_scenario("mean_field_attraction")
    m0 = mfa.initial
    rows = []
    for dt in (1e-2, 1e-3):
        atoms = [ControlledAtom(m0.state()[i],
                                RelaxedControl.constant(0, 1, 0.0, 0.4),
                                RelaxedControl.constant(0, 1, 0.0, 0.4), 0.25)
                 for i in range(4)]
        ensemble, flow, _ = solve_flow(0.0, 0.4, m0, Kappa(m0, atoms), mfa.spec,
                                       dt=dt)
        rows.append([dt, verify_flow(ensemble, flow, mfa.spec, 0.0, 0.4)])
    _write_csv(out / "selftest_residual_ladder.csv", mfa.provenance(seed),
               ["dt", "inclusion_residual"], rows)


def format_table(summary: dict) -> str:
    lines = ["selftest summary:"]
    for item in summary["items"]:
        status = "PASS" if item["ok"] else "FAIL"
        lines.append(f"  [{status}] {item['name']}")
    lines.append("all ok" if summary["all_ok"] else "FAILURES present")
    return "\n".join(lines)
