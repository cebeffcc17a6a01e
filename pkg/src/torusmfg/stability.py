"""Directional derivatives of measure functionals and stability checks.

The u-/v-derivatives are one-sided difference quotients along shifted
direction measures, estimated on a geometric tau ladder (the inner limit
eta' -> eta is approximated by eta' = eta; the resulting bias can only
produce "inconclusive", never a wrong certified verdict).  Feasible
directions attach to every (x, u) atom a point of the frozen-control
vectogram hull; the infinitesimal checkers search those samplers, the
integral checker searches control completions through the flow solver,
and `euler_polygon` runs the constructive step-by-step witness build.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import PolygonStuckError, StructuralError
from .flows import Kappa, PathEnsemble, RelaxedControl, solve_flow
from .game import DynamicsSpec
from .measures import DiscreteMeasure, direction_space
from .shifts import concatenate, compose_plan, line_lift, theta_shift, xi_shift
from .transport import wasserstein2


class MeasureFunctional:
    """A function of (time, probability measure); evaluation must be pure."""

    regularity = "black-box"
    lipschitz: float | None = None

    def evaluate(self, t: float, m: DiscreteMeasure) -> float:
        raise NotImplementedError

    def __call__(self, t, m):
        return self.evaluate(t, m)


class CylindricalFunctional(MeasureFunctional):
    """psi(t, m) = Phi(int phi_1 dm, ..., int phi_k dm) + slope * t.

    `phis` are vectorized integrands (n, d) -> (n,); `grads` their spatial
    gradients (n, d) -> (n, d).  Defaults give the plain linear functional
    sum of integrals.  The first variation along a direction measure is
    available in closed form for cross-checking derivative estimates.
    """

    regularity = "smooth-cylindrical"

    def __init__(self, phis, grads=None, outer=None, outer_grad=None,
                 time_slope: float = 0.0, constant: float = 0.0):
        self.phis = list(phis)
        self.grads = None if grads is None else list(grads)
        self.outer = outer
        self.outer_grad = outer_grad
        self.time_slope = float(time_slope)
        self.constant = float(constant)

    def integrals(self, m: DiscreteMeasure) -> np.ndarray:
        x = m.state()
        return np.asarray([float(m.weights @ phi(x)) for phi in self.phis])

    def evaluate(self, t, m):
        vals = self.integrals(m)
        out = float(np.sum(vals)) if self.outer is None else float(self.outer(vals))
        return out + self.time_slope * float(t) + self.constant

    def first_variation(self, t, eta: DiscreteMeasure) -> float:
        """Closed-form derivative along eta: slope + dPhi . int <grad phi, w> d eta."""
        if self.grads is None:
            raise StructuralError("functional has no gradient oracle")
        x = eta.state()
        w = eta.component("vector")
        inner = np.asarray([
            float(eta.weights @ np.einsum("nd,nd->n", grad(x), w))
            for grad in self.grads])
        vals = self.integrals(eta.marginal((0,), coalesce=False))
        outer_grad = (np.ones(len(self.phis)) if self.outer_grad is None
                      else np.asarray(self.outer_grad(vals)))
        return self.time_slope + float(outer_grad @ inner)


class LambdaFunctional(MeasureFunctional):
    def __init__(self, fn, regularity="black-box", lipschitz=None):
        self._fn = fn
        self.regularity = regularity
        self.lipschitz = lipschitz

    def evaluate(self, t, m):
        return float(self._fn(t, m))


@dataclass(frozen=True)
class DerivativeEstimate:
    """Difference-quotient ladder and its tail estimate."""

    side: str                 # "u" (liminf proxy) or "v" (limsup proxy)
    value: float
    taus: np.ndarray
    quotients: np.ndarray
    converged: bool

    def ladder(self):
        return list(zip(self.taus.tolist(), self.quotients.tolist()))


def _quotient_ladder(psi: MeasureFunctional, s, eta, tau0, length, horizon):
    top = tau0
    if horizon is not None:
        room = horizon - s
        if room <= 0:
            raise StructuralError("no forward room for a derivative ladder",
                                  s=float(s), horizon=float(horizon))
        top = min(top, room)
    taus = top * 0.5 ** np.arange(length)
    base = psi.evaluate(s, eta.marginal((0,), coalesce=False))
    quot = np.empty(length)
    for k, tau in enumerate(taus):
        quot[k] = (psi.evaluate(s + tau, theta_shift(eta, float(tau))) - base) / tau
    return taus, quot


def _estimate(side, taus, quot, tail, jitter_tol):
    tail_q = quot[-tail:]
    value = float(tail_q.max() if side == "v" else tail_q.min())
    spread = float(tail_q.max() - tail_q.min())
    converged = spread <= jitter_tol * max(1.0, abs(value))
    return DerivativeEstimate(side, value, taus, quot, converged)


def v_derivative(psi: MeasureFunctional, s, eta: DiscreteMeasure, *,
                 tau0: float = 0.1, length: int = 12, tail: int = 4,
                 horizon: float | None = None, jitter_tol: float = 1e-3):
    """Upper directional quotient estimate (limsup proxy: tail maximum)."""
    taus, quot = _quotient_ladder(psi, s, eta, tau0, length, horizon)
    return _estimate("v", taus, quot, tail, jitter_tol)


def u_derivative(psi: MeasureFunctional, s, eta: DiscreteMeasure, *,
                 tau0: float = 0.1, length: int = 12, tail: int = 4,
                 horizon: float | None = None, jitter_tol: float = 1e-3):
    """Lower directional quotient estimate (liminf proxy: tail minimum)."""
    taus, quot = _quotient_ladder(psi, s, eta, tau0, length, horizon)
    return _estimate("u", taus, quot, tail, jitter_tol)


class DirectionSampler:
    """Feasible direction measures with the base control marginal fixed.

    For side "F1" the base is alpha over torus x U and every atom gets a
    direction from co{f(s, x, m, u, v) : v in v-grid}; side "F2" mirrors
    with beta over torus x V and the u-grid.  Mixtures parameterize the
    hulls exactly; enumeration walks a simplex grid per atom (generator
    count <= 3), sampling draws Dirichlet mixtures.
    """

    def __init__(self, spec: DynamicsSpec, s: float, base: DiscreteMeasure,
                 side: str, c: float, m: DiscreteMeasure | None = None):
        self.spec = spec
        self.s = float(s)
        self.base = base
        self.side = side
        self.c = float(c)
        m = base.marginal((0,)) if m is None else m
        self.m = m
        xs = base.state()
        labels = base.component("grid")
        grid_all = spec.eval_grid(s, xs, m)
        if side == "F1":
            self.generators = np.stack([grid_all[i, int(labels[i]), :, :]
                                        for i in range(base.n_atoms)])
            ctrl = spec.u_grid()
        elif side == "F2":
            self.generators = np.stack([grid_all[i, :, int(labels[i]), :]
                                        for i in range(base.n_atoms)])
            ctrl = spec.v_grid()
        else:
            raise StructuralError("side must be F1 or F2")
        speeds = np.linalg.norm(self.generators, axis=2)
        if speeds.max(initial=0.0) > self.c + 1e-9:
            raise StructuralError("radius c below attainable speeds; need c >= C_f",
                                  c=self.c, max_speed=float(speeds.max()))
        self.space = direction_space(xs.shape[1], ctrl, self.c)
        self._labels = labels
        self._xs = xs

    @property
    def k_generators(self) -> int:
        return self.generators.shape[1]

    def measure_from_mixtures(self, lambdas: np.ndarray) -> DiscreteMeasure:
        lam = np.atleast_2d(lambdas)
        w = np.einsum("ak,akd->ad", lam, self.generators)
        return DiscreteMeasure(self.space, (self._xs, self._labels, w),
                               self.base.weights, normalize=True)

    def pure(self, assignment) -> DiscreteMeasure:
        lam = np.zeros((self.base.n_atoms, self.k_generators))
        lam[np.arange(self.base.n_atoms), np.asarray(assignment, dtype=int)] = 1.0
        return self.measure_from_mixtures(lam)

    def _simplex_grid(self, resolution: float) -> np.ndarray:
        steps = max(1, int(round(1.0 / resolution)))
        k = self.k_generators
        pts = [np.asarray(comp, dtype=float) / steps
               for comp in _compositions(steps, k)]
        return np.asarray(pts)

    def enumerate(self, resolution: float = 0.25, cap: int = 20000):
        """Full product enumeration, or None when it exceeds `cap`."""
        if self.k_generators > 3:
            return None
        grid = self._simplex_grid(resolution)
        total = grid.shape[0] ** self.base.n_atoms
        if total > cap:
            return None
        out = []
        for combo in itertools.product(range(grid.shape[0]),
                                       repeat=self.base.n_atoms):
            out.append(self.measure_from_mixtures(grid[list(combo)]))
        return out

    def sample(self, rng, count: int):
        lam = rng.dirichlet(np.ones(self.k_generators),
                            size=(count, self.base.n_atoms))
        return [self.measure_from_mixtures(lam[i]) for i in range(count)]

    def candidate_pool(self, rng, budget: int):
        """Deterministic pool: aligned pure vertices first, then Dirichlet."""
        pool = [self.pure([j] * self.base.n_atoms) for j in range(self.k_generators)]
        if self.base.n_atoms <= 4 and self.k_generators ** self.base.n_atoms <= budget:
            pool = [self.pure(list(a)) for a in
                    itertools.product(range(self.k_generators),
                                      repeat=self.base.n_atoms)]
        extra = budget - len(pool)
        if extra > 0:
            pool.extend(self.sample(rng, extra))
        return pool[:budget]


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def feasible_directions_f1(spec, s, alpha, c, m=None) -> DirectionSampler:
    return DirectionSampler(spec, s, alpha, "F1", c, m=m)


def feasible_directions_f2(spec, s, beta, c, m=None) -> DirectionSampler:
    return DirectionSampler(spec, s, beta, "F2", c, m=m)


@dataclass
class StabilityReport:
    verdict: str                    # "pass" | "fail" | "inconclusive"
    side: str                       # "u" | "v"
    mode: str                       # "infinitesimal" | "integral"
    tolerance: float
    best_value: float | None = None
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "side": self.side,
            "mode": self.mode,
            "tolerance": self.tolerance,
            "best_value": self.best_value,
            "witness": self.witness,
            "details": self.details,
        }


def default_tolerance(spec: DynamicsSpec, c: float, n: int) -> float:
    """Mirror of the polygon residual bound: modulus(1/n) + 2 L c / n."""
    return float(spec.modulus(1.0 / n) + 2.0 * spec.lipschitz * c / n)


def _search_directional(psi, s, base, side_tag, sampler_side, spec, c, *, n, tol,
                        horizon, resolution, sample_budget, rng, tau0, length, tail):
    tol = default_tolerance(spec, c, n) if tol is None else float(tol)
    sampler = DirectionSampler(spec, s, base, sampler_side, c)
    deriv = v_derivative if side_tag == "v" else u_derivative
    candidates = sampler.enumerate(resolution=resolution)
    exhaustive = candidates is not None
    if candidates is None:
        rng = np.random.default_rng(0) if rng is None else rng
        candidates = sampler.candidate_pool(rng, sample_budget)
    best = None
    all_certified_bad = True
    ladders = []
    # ladder jitter below a tenth of the decision tolerance still certifies
    jitter = max(1e-3, 0.1 * tol)
    for idx, eta in enumerate(candidates):
        est = deriv(psi, s, eta, tau0=tau0, length=length, tail=tail, horizon=horizon,
                    jitter_tol=jitter)
        score = est.value if side_tag == "v" else -est.value
        key = (score, -est.taus[0], -idx)
        if best is None or key > best[0]:
            best = (key, est, eta)
        if side_tag == "v":
            bad = est.converged and bool(np.all(est.quotients < -tol))
        else:
            bad = est.converged and bool(np.all(est.quotients > tol))
        if not bad:
            all_certified_bad = False
        ladders.append(est)
    est = best[1]
    eta = best[2]
    ok = est.value >= -tol if side_tag == "v" else est.value <= tol
    if ok:
        verdict = "pass"
    elif exhaustive and all_certified_bad:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    witness = {
        "s": float(s),
        "base": base.to_records(),
        "best_eta": eta.to_records(),
        "ladder": est.ladder(),
        "converged": est.converged,
    }
    details = {
        "candidates": len(candidates),
        "exhaustive": exhaustive,
        "radius_c": float(c),
        "n": int(n),
    }
    return StabilityReport(verdict, side_tag, "infinitesimal", tol,
                           best_value=est.value, witness=witness, details=details)


def check_v_stable_infinitesimal(psi, s, alpha, c, spec, *, n: int = 64, tol=None,
                                 horizon=None, resolution: float = 0.25,
                                 sample_budget: int = 64, rng=None, tau0: float = 0.1,
                                 length: int = 12, tail: int = 4) -> StabilityReport:
    """Pass iff the best sampled v-derivative over F1(s, alpha) clears -tol.

    A certified fail needs exhaustive enumeration with every ladder
    uniformly below -tol and converged; anything else is inconclusive.
    """
    return _search_directional(psi, s, alpha, "v", "F1", spec, c, n=n, tol=tol,
                               horizon=horizon, resolution=resolution,
                               sample_budget=sample_budget, rng=rng, tau0=tau0,
                               length=length, tail=tail)


def check_u_stable_infinitesimal(psi, s, beta, c, spec, *, n: int = 64, tol=None,
                                 horizon=None, resolution: float = 0.25,
                                 sample_budget: int = 64, rng=None, tau0: float = 0.1,
                                 length: int = 12, tail: int = 4) -> StabilityReport:
    """Mirror check: best sampled u-derivative over F2(s, beta) must be <= tol."""
    return _search_directional(psi, s, beta, "u", "F2", spec, c, n=n, tol=tol,
                               horizon=horizon, resolution=resolution,
                               sample_budget=sample_budget, rng=rng, tau0=tau0,
                               length=length, tail=tail)


def _integral_search(psi, s, r, base, spec, side_tag, *, search_budget, tol, n, dt,
                     cells, starts, rng):
    tol = default_tolerance(spec, spec.speed_bound, n) if tol is None else float(tol)
    rng = np.random.default_rng(0) if rng is None else rng
    m_star = base.marginal((0,), coalesce=False)
    base_val = psi.evaluate(s, m_star)
    a = base.n_atoms
    if side_tag == "v":
        k_free = spec.v_atoms.shape[0]
        u_size = spec.u_atoms.shape[0]
    else:
        k_free = spec.u_atoms.shape[0]
        v_size = spec.v_atoms.shape[0]
    grid_times = np.linspace(s, r, cells + 1)
    dt = (r - s) / max(8, 4 * cells) if dt is None else dt

    evals = {"count": 0}

    def objective(assign):
        """assign: (a, cells) integer atom choices for the free side."""
        if evals["count"] >= search_budget:
            return None
        evals["count"] += 1
        controls = []
        for i in range(a):
            mix = np.zeros((cells, k_free))
            mix[np.arange(cells), assign[i]] = 1.0
            controls.append(RelaxedControl(grid_times, mix))
        if side_tag == "v":
            kappa = Kappa.from_alpha(base, controls, u_size, s, r)
        else:
            kappa = Kappa.from_beta(base, controls, v_size, s, r)
        _, flow, _ = solve_flow(s, r, m_star, kappa, spec, dt=dt)
        return psi.evaluate(r, flow.at(r))

    sign = 1.0 if side_tag == "v" else -1.0

    def good_enough(val):
        # witness: psi(s) <= psi(r) + tol for v; psi(s) >= psi(r) - tol for u
        return sign * (val - base_val) >= -tol

    start_list = [np.full((a, cells), j, dtype=int) for j in range(k_free)]
    while len(start_list) < starts + k_free:
        start_list.append(rng.integers(0, k_free, size=(a, cells)))
    state = {"best_val": None, "best_assign": None}

    class _Witness(Exception):
        pass

    class _BudgetOut(Exception):
        pass

    def consider(val, assign):
        """Track the best endpoint value; stop the search on a witness."""
        if val is None:
            raise _BudgetOut
        if state["best_val"] is None or sign * val > sign * state["best_val"]:
            state["best_val"] = val
            state["best_assign"] = assign.copy()
        if good_enough(val):
            raise _Witness

    converged_all = True
    found = False
    try:
        for assign in start_list:
            assign = assign.copy()
            val = objective(assign)
            consider(val, assign)
            improved = True
            while improved:
                improved = False
                for i in range(a):
                    for cell in range(cells):
                        for j in range(k_free):
                            if j == assign[i, cell]:
                                continue
                            trial = assign.copy()
                            trial[i, cell] = j
                            tv = objective(trial)
                            consider(tv, trial)
                            if sign * tv > sign * val:
                                val, assign, improved = tv, trial, True
    except _Witness:
        found = True
    except _BudgetOut:
        converged_all = False
    best_val = state["best_val"]
    best_assign = state["best_assign"]
    if found:
        verdict = "pass"
    elif converged_all and best_val is not None:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    witness = {
        "s": float(s), "r": float(r),
        "base": base.to_records(),
        "psi_start": float(base_val),
        "best_endpoint_value": None if best_val is None else float(best_val),
        "best_assignment": None if best_assign is None else best_assign.tolist(),
    }
    details = {"evaluations": evals["count"], "budget": int(search_budget),
               "cells": int(cells), "converged_search": converged_all}
    return StabilityReport(verdict, side_tag, "integral", tol,
                           best_value=best_val, witness=witness, details=details)


def check_v_stable_integral(psi, s, r, alpha, spec, search_budget: int = 200, *,
                            tol=None, n: int = 64, dt=None, cells: int = 4,
                            starts: int = 4, rng=None) -> StabilityReport:
    """Search kappa in D1[alpha] making psi(r, m(r)) >= psi(s, m_*) - tol.

    Passes on the first witness; fails only when the budgeted multi-start
    coordinate ascent converges everywhere below -tol.
    """
    return _integral_search(psi, s, r, alpha, spec, "v", search_budget=search_budget,
                            tol=tol, n=n, dt=dt, cells=cells, starts=starts, rng=rng)


def check_u_stable_integral(psi, s, r, beta, spec, search_budget: int = 200, *,
                            tol=None, n: int = 64, dt=None, cells: int = 4,
                            starts: int = 4, rng=None) -> StabilityReport:
    return _integral_search(psi, s, r, beta, spec, "u", search_budget=search_budget,
                            tol=tol, n=n, dt=dt, cells=cells, starts=starts, rng=rng)


def euler_polygon(psi2: MeasureFunctional, s: float, r: float,
                  alpha_star: DiscreteMeasure, n: int, spec: DynamicsSpec, *,
                  c: float | None = None, rng=None, pool: int = 32,
                  nodes_per_step: int = 5):
    """Constructive sufficiency witness: step-by-step polygonal ensemble.

    At each position, searches the feasible-direction sampler and a step
    ladder in (eps_n, 1/n] for a near-nondecreasing step of psi2, lifts
    the chosen direction measure to straight paths, and glues.  Raises
    PolygonStuckError (falsification evidence) when no step is admissible.
    """
    if not s < r:
        raise StructuralError("polygon needs s < r")
    c = spec.speed_bound if c is None else float(c)
    rng = np.random.default_rng(0) if rng is None else rng
    eps_n = 1.0 / (8.0 * n)
    tau_ladder = [1.0 / n, 1.0 / (2.0 * n), 1.0 / (4.0 * n)]
    m_star = alpha_star.marginal((0,), coalesce=False)
    z_star = psi2.evaluate(s, m_star)
    t_j = float(s)
    alpha_j = alpha_star
    mu_j = alpha_star
    psi_j = z_star
    pieces: list[PathEnsemble] = []
    steps = []
    j = 0
    while t_j < r - 1.0 / n:
        sampler = DirectionSampler(spec, t_j, alpha_j, "F1", c)
        candidates = sampler.candidate_pool(rng, pool)
        best = None
        for tau in tau_ladder:
            for idx, eta in enumerate(candidates):
                val = psi2.evaluate(t_j + tau, theta_shift(eta, tau))
                margin = val - (psi_j - tau / n)
                key = (margin, tau, -idx)
                if best is None or key > best[0]:
                    best = (key, tau, eta, val)
            if best is not None and best[0][0] >= 0.0:
                break  # prefer the largest admissible step
        margin = best[0][0]
        if margin < 0.0:
            raise PolygonStuckError(
                "no admissible (direction, step) at polygon position",
                step=j, time=t_j, best_margin=float(margin),
                candidates=len(candidates))
        _, tau, eta, val = best
        _, pi_j = wasserstein2(mu_j, alpha_j)
        gamma = compose_plan(pi_j, eta)
        nu_piece = line_lift(gamma, t_j, t_j + tau, nodes=nodes_per_step)
        alpha_next = xi_shift(eta, tau)
        mu_next = xi_shift(gamma, tau)
        xi_gap, _ = wasserstein2(xi_shift(eta, tau), alpha_next)
        steps.append({"t": t_j, "tau": float(tau), "margin": float(margin),
                      "candidates": len(candidates), "xi_proximity": float(xi_gap)})
        pieces.append(nu_piece)
        t_j += tau
        alpha_j, mu_j, psi_j = alpha_next, mu_next, float(val)
        j += 1
    # closing segment [t_J, r]: any feasible direction family over mu_J
    sampler = DirectionSampler(spec, t_j, mu_j, "F1", c)
    candidates = sampler.candidate_pool(rng, pool)
    best = None
    tau_last = r - t_j
    for idx, eta in enumerate(candidates):
        # rank closing candidates by psi2 when it is defined on the (possibly
        # plan-split) cloud; every candidate already meets the hull condition
        try:
            val = psi2.evaluate(r, theta_shift(eta, tau_last))
        except StructuralError:
            val = -np.inf
        key = (val, -idx)
        if best is None or key > best[0]:
            best = (key, eta)
    gamma_last = best[1]
    pieces.append(line_lift(gamma_last, t_j, r, nodes=nodes_per_step))
    nu = pieces[0]
    for piece in pieces[1:]:
        nu = concatenate(nu, piece)
    ledger_bound = z_star - (r - s) / n
    ledger_ok = psi_j >= ledger_bound - 1e-12
    diagnostics = {
        "n": int(n), "eps_n": eps_n, "steps": steps,
        "t_final_step": t_j, "psi_final_step": psi_j,
        "monotonicity_bound": ledger_bound, "monotonicity_ok": bool(ledger_ok),
        "psi_start": z_star,
        "endpoint_psi": float(psi2.evaluate(r, nu.measure_at(r))),
        "radius_c": float(c),
    }
    return nu, diagnostics


def check_value_characterization(psi, spec, positions, g, *, c=None, n: int = 64,
                                 tol=None, terminal_tol=None, horizon=None,
                                 rng=None, sample_budget: int = 32,
                                 resolution: float = 0.25) -> StabilityReport:
    """Terminal equality plus both infinitesimal conditions at each position.

    `positions` is a list of (s, alpha, beta) with alpha over torus x U and
    beta over torus x V; terminal equality is checked on each position's
    state marginal at the horizon.
    """
    if horizon is None:
        raise StructuralError("value characterization needs the horizon T")
    c = spec.speed_bound if c is None else float(c)
    tol = default_tolerance(spec, c, n) if tol is None else float(tol)
    terminal_tol = tol if terminal_tol is None else float(terminal_tol)
    failures = []
    worst_terminal = 0.0
    worst_v = np.inf
    worst_u = -np.inf
    any_inconclusive = False
    for k, (s, alpha, beta) in enumerate(positions):
        m = alpha.marginal((0,))
        gap = abs(g.evaluate(horizon, m) - psi.evaluate(horizon, m))
        worst_terminal = max(worst_terminal, gap)
        if gap > terminal_tol:
            failures.append({"position": k, "kind": "terminal", "gap": float(gap)})
        rep_v = check_v_stable_infinitesimal(
            psi, s, alpha, c, spec, n=n, tol=tol, horizon=horizon, rng=rng,
            sample_budget=sample_budget, resolution=resolution)
        rep_u = check_u_stable_infinitesimal(
            psi, s, beta, c, spec, n=n, tol=tol, horizon=horizon, rng=rng,
            sample_budget=sample_budget, resolution=resolution)
        worst_v = min(worst_v, rep_v.best_value)
        worst_u = max(worst_u, rep_u.best_value)
        for tag, rep in (("v", rep_v), ("u", rep_u)):
            if rep.verdict == "fail":
                failures.append({"position": k, "kind": f"{tag}-directional",
                                 "value": rep.best_value})
            elif rep.verdict == "inconclusive":
                any_inconclusive = True
    if failures:
        verdict = "fail"
    elif any_inconclusive:
        verdict = "inconclusive"
    else:
        verdict = "pass"
    details = {
        "positions": len(positions),
        "worst_terminal_gap": float(worst_terminal),
        "worst_v_direction": float(worst_v),
        "worst_u_direction": float(worst_u),
        "failures": failures,
    }
    return StabilityReport(verdict, "uv", "characterization", tol, details=details)


__all__ = [
    "MeasureFunctional", "CylindricalFunctional", "LambdaFunctional",
    "DerivativeEstimate", "v_derivative", "u_derivative",
    "DirectionSampler", "feasible_directions_f1", "feasible_directions_f2",
    "StabilityReport", "default_tolerance",
    "check_v_stable_infinitesimal", "check_u_stable_infinitesimal",
    "check_v_stable_integral", "check_u_stable_integral",
    "euler_polygon", "check_value_characterization",
]
