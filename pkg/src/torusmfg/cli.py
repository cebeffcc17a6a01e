"""Batch front door: scenario ingestion, experiment orchestration, artifacts.

Exit codes: 0 pass/success, 1 structural error (including schema
violations, reported with JSON-pointer paths), 2 certified fail, 3
inconclusive.  Artifacts are CSV (time series) and JSON (reports); every
file embeds the scenario hash and knob block, never wall-clock state, so
identical (scenario, seed) runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .engine import (ConstantCompletion, ConstantControlStrategy, Partition,
                     RandomMixtureCompletion, estimate_gamma1, estimate_gamma2,
                     extremal_shift_strategy, value_oracle_small)
from .errors import ConvergenceError, PolygonStuckError, StructuralError
from .flows import Kappa, RelaxedControl, solve_flow, verify_flow
from .measures import DiscreteMeasure
from .rng import stream
from .scenario import Scenario, SchemaError, bundled_scenario, load_scenario
from .stability import (DirectionSampler, check_u_stable_infinitesimal,
                        check_u_stable_integral, check_v_stable_infinitesimal,
                        check_v_stable_integral, euler_polygon, u_derivative,
                        v_derivative)

EXIT_OK = 0
EXIT_STRUCTURAL = 1
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3


def _fmt(x) -> str:
    return repr(float(x))


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path: Path, provenance: dict, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf8") as fh:
        fh.write("# provenance: "
                 + json.dumps(provenance, sort_keys=True, separators=(",", ":"))
                 + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (bool, str)):
                    cells.append(str(v))
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                else:
                    cells.append(_fmt(v))
            fh.write(",".join(cells) + "\n")


def _default_alpha(scn: Scenario, u_index: int = 0) -> DiscreteMeasure:
    m0 = scn.initial
    labels = np.full(m0.n_atoms, u_index, dtype=np.int64)
    from .measures import control_space

    return DiscreteMeasure(control_space(scn.spec.d, scn.spec.u_grid()),
                           (m0.state(), labels), m0.weights)


def _default_beta(scn: Scenario, v_index: int = 0) -> DiscreteMeasure:
    m0 = scn.initial
    labels = np.full(m0.n_atoms, v_index, dtype=np.int64)
    from .measures import control_space

    return DiscreteMeasure(control_space(scn.spec.d, scn.spec.v_grid()),
                           (m0.state(), labels), m0.weights)


def _default_kappa(scn: Scenario, s, r, u_index=0, v_index=0) -> Kappa:
    alpha = _default_alpha(scn, u_index)
    zetas = [RelaxedControl.constant(v_index, scn.spec.v_atoms.shape[0], s, r)
             for _ in range(alpha.n_atoms)]
    return Kappa.from_alpha(alpha, zetas, scn.spec.u_atoms.shape[0], s, r)


def _oracle_from_scenario(scn: Scenario):
    knobs = scn.solver["oracle"]
    times = np.linspace(0.0, scn.horizon, int(knobs["steps"]) + 1)
    return value_oracle_small(scn.spec, scn.payoff, int(knobs["cells"]), times,
                              int(knobs["particles"]))


def _oracle_initial(scn: Scenario) -> DiscreteMeasure:
    """Initial cloud thinned/padded to the oracle's particle count."""
    p = int(scn.solver["oracle"]["particles"])
    from .measures import measure_space

    pos = scn.initial.state()
    if pos.shape[0] == p and np.allclose(scn.initial.weights, 1.0 / p):
        return scn.initial
    reps = np.linspace(0, pos.shape[0] - 1, p).round().astype(int)
    return DiscreteMeasure(measure_space(scn.spec.d), (pos[reps],),
                           np.full(p, 1.0 / p))


# -- subcommands ------------------------------------------------------------


def cmd_flow(scn: Scenario, args, out: Path, seed: int) -> int:
    spec = scn.spec
    s, r = 0.0, scn.horizon
    kappa = _default_kappa(scn, s, r, args.u_index, args.v_index)
    dt = args.dt or scn.solver["dt"]
    ensemble, flow, residuals = solve_flow(s, r, scn.initial, kappa, spec, dt=dt,
                                           picard_tol=scn.solver["picard_tol"])
    res = verify_flow(ensemble, flow, spec, s, r)
    prov = scn.provenance(seed)
    rows = []
    stride = max(1, ensemble.times.shape[0] // 512)
    for a in range(ensemble.n_atoms):
        for k in range(0, ensemble.times.shape[0], stride):
            rows.append([a, ensemble.times[k],
                         *np.mod(ensemble.paths[a, k], 1.0),
                         ensemble.weights[a], int(ensemble.u_labels[a])])
    _write_csv(out / "flow.csv", prov,
               ["atom_id", "t"] + [f"x_{i + 1}" for i in range(spec.d)]
               + ["weight", "u_label"], rows)
    stride_nodes = max(1, (ensemble.times.shape[0] // 128))
    node_res = flow.node_residuals
    _write_json(out / "flow_summary.json", {
        "provenance": prov,
        "picard_residuals": [float(x) for x in residuals],
        "node_residuals": {
            "t": [float(t) for t in ensemble.times[::stride_nodes]],
            "w2_update_bound": [float(x) for x in node_res[::stride_nodes]],
        },
        "inclusion_residual": float(res),
        "dt": float(dt),
        "interval": [s, r],
    })
    print(f"flow: {len(residuals)} picard sweeps, inclusion residual {res:.3e}")
    return EXIT_OK


def cmd_derivative(scn: Scenario, args, out: Path, seed: int) -> int:
    spec = scn.spec
    s = args.s
    c = scn.radius_c
    rng = stream(seed, "derivative")
    if args.side == "v":
        base = _default_alpha(scn, args.u_index)
        sampler = DirectionSampler(spec, s, base, "F1", c)
        deriv = v_derivative
    else:
        base = _default_beta(scn, args.v_index)
        sampler = DirectionSampler(spec, s, base, "F2", c)
        deriv = u_derivative
    candidates = sampler.candidate_pool(rng, args.candidates)
    rows = []
    ladders = []
    for idx, eta in enumerate(candidates):
        est = deriv(scn.payoff, s, eta, tau0=scn.solver["tau0"],
                    length=scn.solver["ladder"], tail=scn.solver["tail"],
                    horizon=scn.horizon)
        ladders.append(est)
        for tau, q in est.ladder():
            rows.append([idx, tau, q])
    prov = scn.provenance(seed)
    path = Path(args.ladder_csv) if args.ladder_csv else out / "derivative_ladder.csv"
    _write_csv(path, prov, ["candidate", "tau", "quotient"], rows)
    best = max(ladders, key=lambda e: e.value) if args.side == "v" else min(
        ladders, key=lambda e: e.value)
    _write_json(out / "derivative.json", {
        "provenance": prov, "side": args.side, "s": s,
        "estimate": best.value, "converged": best.converged,
        "candidates": len(candidates),
    })
    print(f"{args.side}-derivative estimate {best.value:+.6f} "
          f"(converged={best.converged}, {len(candidates)} candidates)")
    return EXIT_OK


def cmd_check_stability(scn: Scenario, args, out: Path, seed: int) -> int:
    spec = scn.spec
    rng = stream(seed, "check", args.side, args.mode)
    c = scn.radius_c
    n = int(scn.solver["n"])
    psi = scn.payoff if args.functional == "payoff" else _oracle_from_scenario(scn)
    if args.negate_payoff:
        from .stability import LambdaFunctional

        inner = psi
        psi = LambdaFunctional(lambda t, m: -inner.evaluate(t, m))
    if args.functional == "oracle":
        base_m = _oracle_initial(scn)
        labels = np.zeros(base_m.n_atoms, dtype=np.int64)
        from .measures import control_space

        alpha = DiscreteMeasure(control_space(spec.d, spec.u_grid()),
                                (base_m.state(), labels), base_m.weights)
        beta = DiscreteMeasure(control_space(spec.d, spec.v_grid()),
                               (base_m.state(), labels), base_m.weights)
    else:
        alpha = _default_alpha(scn, args.u_index)
        beta = _default_beta(scn, args.v_index)
    s = args.s
    if args.mode == "infinitesimal":
        if args.side == "v":
            report = check_v_stable_infinitesimal(
                psi, s, alpha, c, spec, n=n, horizon=scn.horizon, rng=rng,
                tau0=scn.solver["tau0"], length=scn.solver["ladder"],
                tail=scn.solver["tail"])
        else:
            report = check_u_stable_infinitesimal(
                psi, s, beta, c, spec, n=n, horizon=scn.horizon, rng=rng,
                tau0=scn.solver["tau0"], length=scn.solver["ladder"],
                tail=scn.solver["tail"])
    else:
        r = args.r if args.r is not None else scn.horizon
        if args.side == "v":
            report = check_v_stable_integral(psi, s, r, alpha, spec,
                                             search_budget=args.budget, n=n, rng=rng)
        else:
            report = check_u_stable_integral(psi, s, r, beta, spec,
                                             search_budget=args.budget, n=n, rng=rng)
    payload = report.to_json()
    payload["provenance"] = scn.provenance(seed)
    payload["functional"] = args.functional
    _write_json(out / f"stability_{args.side}_{args.mode}.json", payload)
    print(f"{args.side}-stability ({args.mode}): {report.verdict} "
          f"(best value {report.best_value}, tol {report.tolerance:.4g})")
    return {"pass": EXIT_OK, "fail": EXIT_FAIL,
            "inconclusive": EXIT_INCONCLUSIVE}[report.verdict]


def cmd_polygon(scn: Scenario, args, out: Path, seed: int) -> int:
    spec = scn.spec
    rng = stream(seed, "polygon", args.n)
    psi = scn.payoff if args.functional == "payoff" else _oracle_from_scenario(scn)
    if args.functional == "oracle":
        base_m = _oracle_initial(scn)
        from .measures import control_space

        alpha = DiscreteMeasure(
            control_space(spec.d, spec.u_grid()),
            (base_m.state(), np.zeros(base_m.n_atoms, dtype=np.int64)),
            base_m.weights)
    else:
        alpha = _default_alpha(scn, args.u_index)
    s, r = 0.0, scn.horizon
    prov = scn.provenance(seed)
    try:
        nu, diag = euler_polygon(psi, s, r, alpha, args.n, spec, c=scn.radius_c,
                                 rng=rng)
    except PolygonStuckError as exc:
        _write_json(out / "polygon.json", {
            "provenance": prov, "stuck": True, "step": exc.step,
            "time": exc.time, "best_margin": exc.best_margin,
        })
        print(f"polygon: stuck at step {exc.step} (t={exc.time:.4f}, "
              f"margin {exc.best_margin:.3e})")
        return EXIT_FAIL
    res = verify_flow(nu, nu.flow(), spec, s, r)
    rows = []
    for a in range(nu.n_atoms):
        for k in range(nu.times.shape[0]):
            rows.append([a, nu.times[k], *np.mod(nu.paths[a, k], 1.0),
                         nu.weights[a], int(nu.u_labels[a])])
    _write_csv(out / "polygon_paths.csv", prov,
               ["atom_id", "t"] + [f"x_{i + 1}" for i in range(spec.d)]
               + ["weight", "u_label"], rows)
    diag["inclusion_residual"] = float(res)
    _write_json(out / "polygon.json", {"provenance": prov, "stuck": False,
                                       "diagnostics": diag})
    print(f"polygon n={args.n}: {len(diag['steps'])} steps, "
          f"monotone={diag['monotonicity_ok']}, residual {res:.3e}")
    return EXIT_OK if diag["monotonicity_ok"] else EXIT_FAIL


def cmd_play(scn: Scenario, args, out: Path, seed: int) -> int:
    spec = scn.spec
    part = Partition.uniform(0.0, scn.horizon, args.cells)
    pools_first = [ConstantControlStrategy(spec, "first", j)
                   for j in range(spec.u_atoms.shape[0])]
    pools_second = [ConstantControlStrategy(spec, "second", j)
                    for j in range(spec.v_atoms.shape[0])]
    advs_v = [ConstantCompletion(j) for j in range(spec.v_atoms.shape[0])]
    advs_v.append(RandomMixtureCompletion(2))
    advs_u = [ConstantCompletion(j) for j in range(spec.u_atoms.shape[0])]
    advs_u.append(RandomMixtureCompletion(2))
    if args.use_oracle:
        psi = _oracle_from_scenario(scn)
        pools_first.append(extremal_shift_strategy(psi, "first", spec, seed=seed))
    m0 = scn.initial if not args.use_oracle else _oracle_initial(scn)
    dt = args.dt or scn.solver["dt"]
    g1 = estimate_gamma1(0.0, m0, part, spec, pools_first, advs_v, scn.payoff,
                         dt=dt, seed=seed)
    g2 = estimate_gamma2(0.0, m0, part, spec, pools_second, advs_u, scn.payoff,
                         dt=dt, seed=seed)
    prov = scn.provenance(seed)
    manifest = {
        "provenance": prov,
        "t0": 0.0,
        "m0": scn.initial.to_records(),
        "partition": part.times.tolist(),
        "pools": {"first": len(pools_first), "second": len(pools_second),
                  "adversaries_v": len(advs_v), "adversaries_u": len(advs_u)},
        "gamma1_estimate": g1["estimate"],
        "gamma2_estimate": g2["estimate"],
        "ordering_ok": bool(g2["estimate"] <= g1["estimate"] + 1e-9),
    }
    _write_json(out / "play_manifest.json", manifest)
    rows = []
    run_id = 0
    for side, est in (("first", g1), ("second", g2)):
        for i, row in enumerate(est["matrix"]):
            for j, outcome in enumerate(row):
                rows.append([run_id, side, outcome, part.mesh, seed, i, j])
                run_id += 1
    _write_csv(out / "play_results.csv", prov,
               ["run_id", "side", "outcome", "mesh", "seed", "strategy", "adversary"],
               rows)
    print(f"play: gamma1~{g1['estimate']:+.5f} gamma2~{g2['estimate']:+.5f} "
          f"(ordering ok: {manifest['ordering_ok']})")
    return EXIT_OK if manifest["ordering_ok"] else EXIT_FAIL


def cmd_oracle(scn: Scenario, args, out: Path, seed: int) -> int:
    psi = _oracle_from_scenario(scn)
    payload = psi.to_json()
    payload["provenance"] = scn.provenance(seed)
    payload["order_warning"] = bool(getattr(psi, "order_warning", False))
    _write_json(out / "oracle.json", payload)
    print(f"oracle: {payload['particles']} particles x {payload['n_cells']} cells, "
          f"isaacs gap {psi.isaacs_gap:.3e}"
          + (" (order warning)" if payload["order_warning"] else ""))
    return EXIT_OK


def cmd_selftest(scn: Scenario, args, out: Path, seed: int) -> int:
    """Condensed invariant suite over the bundled fixtures; deterministic."""
    from . import selftest as _selftest

    summary = _selftest.run(out, seed)
    print(_selftest.format_table(summary))
    _write_json(out / "selftest.json", summary)
    return EXIT_OK if summary["all_ok"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="torusmfg",
        description="mean-field zero-sum game toolkit on the flat torus")
    p.add_argument("command", choices=["flow", "derivative", "check-stability",
                                       "polygon", "play", "oracle", "selftest"])
    p.add_argument("--scenario", default=None,
                   help="scenario file path or bundled name "
                        "(separable_affine, bilinear, mean_field_attraction)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--n", type=int, default=16, help="polygon resolution")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--s", type=float, default=0.0, help="position time")
    p.add_argument("--r", type=float, default=None, help="integral check endpoint")
    p.add_argument("--side", choices=["u", "v"], default="v")
    p.add_argument("--mode", choices=["infinitesimal", "integral"],
                   default="infinitesimal")
    p.add_argument("--functional", choices=["payoff", "oracle"], default="oracle")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--candidates", type=int, default=16)
    p.add_argument("--cells", type=int, default=8)
    p.add_argument("--u-index", type=int, default=0)
    p.add_argument("--v-index", type=int, default=0)
    p.add_argument("--use-oracle", action="store_true")
    p.add_argument("--negate-payoff", action="store_true",
                   help="check -psi instead of psi (mirror diagnostics)")
    p.add_argument("--ladder-csv", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "selftest":
            scn = bundled_scenario("separable_affine")
        elif args.scenario is None:
            print("error: --scenario is required", file=sys.stderr)
            return EXIT_STRUCTURAL
        elif os.path.exists(args.scenario):
            scn = load_scenario(args.scenario)
        else:
            scn = bundled_scenario(args.scenario)
        seed = scn.seed if args.seed is None else args.seed
        handler = {
            "flow": cmd_flow,
            "derivative": cmd_derivative,
            "check-stability": cmd_check_stability,
            "polygon": cmd_polygon,
            "play": cmd_play,
            "oracle": cmd_oracle,
            "selftest": cmd_selftest,
        }[args.command]
        return handler(scn, args, out, seed)
    except SchemaError as exc:
        print(f"schema error at {exc.pointer or '/'}: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except (StructuralError, ConvergenceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL


if __name__ == "__main__":
    sys.exit(main())
