"""Stepwise feedback play, extremal-shift strategies, pool-restricted
upper/lower value estimates, and a brute-force dynamic-programming value
oracle on tiny 1-d instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .flows import ControlledAtom, Kappa, RelaxedControl, solve_flow
from .game import DynamicsSpec
from .measures import DiscreteMeasure, control_space, measure_space
from .rng import stream
from .stability import MeasureFunctional
from .torus import displacement, wrap
from .transport import wasserstein2


@dataclass(frozen=True)
class Partition:
    """Times of control correction."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.shape[0] < 2 or np.any(np.diff(t) <= 0):
            raise StructuralError("partition needs strictly increasing times")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @staticmethod
    def uniform(t0: float, t1: float, cells: int) -> "Partition":
        return Partition(np.linspace(t0, t1, cells + 1))

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))


class FeedbackStrategy:
    """side "first" maps (t, m) to alpha in A^c[m]; "second" to beta in B^c[m]."""

    side = "first"

    def __call__(self, t: float, m: DiscreteMeasure) -> DiscreteMeasure:
        raise NotImplementedError

    def begin_cell(self, t0: float, t1: float):
        """Hook for stateful strategies; called once per correction cell."""

    def reset(self):
        """Hook: forget play-local state before a fresh play."""


class ConstantControlStrategy(FeedbackStrategy):
    def __init__(self, spec: DynamicsSpec, side: str, index: int):
        self.side = side
        self._grid = spec.u_grid() if side == "first" else spec.v_grid()
        self._index = int(index)

    def __call__(self, t, m):
        pos = m.state()
        labels = np.full(m.n_atoms, self._index, dtype=np.int64)
        return DiscreteMeasure(control_space(pos.shape[1], self._grid),
                               (pos, labels), m.weights, normalize=True)


class CompletionPolicy:
    """Adversary side of stepwise play: completes alpha (or beta) to kappa."""

    def complete(self, t0, t1, m, base, spec, rng):
        raise NotImplementedError


class ConstantCompletion(CompletionPolicy):
    """Every atom answers with one fixed opposing grid atom."""

    def __init__(self, index: int):
        self._index = int(index)

    def complete(self, t0, t1, m, base, spec, rng):
        free_is_v = "U" in {c.name for c in base.space.components if c.kind == "grid"}
        k_free = spec.v_atoms.shape[0] if free_is_v else spec.u_atoms.shape[0]
        ctrl = RelaxedControl.constant(self._index, k_free, t0, t1)
        return [ctrl] * base.n_atoms


class RandomMixtureCompletion(CompletionPolicy):
    """Random per-step Dirichlet mixtures on a sub-grid of the cell."""

    def __init__(self, sub_cells: int = 2):
        self._sub = int(sub_cells)

    def complete(self, t0, t1, m, base, spec, rng):
        free_is_v = "U" in {c.name for c in base.space.components if c.kind == "grid"}
        k_free = spec.v_atoms.shape[0] if free_is_v else spec.u_atoms.shape[0]
        times = np.linspace(t0, t1, self._sub + 1)
        out = []
        for _ in range(base.n_atoms):
            mix = rng.dirichlet(np.ones(k_free), size=self._sub)
            out.append(RelaxedControl(times, mix))
        return out


class GreedyHamiltonianCompletion(CompletionPolicy):
    """Best response to the payoff gradient field, frozen per cell.

    Needs a cylindrical payoff with a gradient oracle; each atom answers
    the grid atom extremizing <grad g(x), f(t, x, m, u_or_v, .)>.
    """

    def __init__(self, payoff, maximize: bool = True):
        self.payoff = payoff
        self.maximize = maximize

    def complete(self, t0, t1, m, base, spec, rng):
        xs = base.state()
        labels = base.component("grid")
        names = {c.name for c in base.space.components if c.kind == "grid"}
        free_is_v = "U" in names
        grad = _payoff_gradient_field(self.payoff, t0, m)(xs)
        grid_all = spec.eval_grid(t0, xs, m)
        out = []
        k_free = spec.v_atoms.shape[0] if free_is_v else spec.u_atoms.shape[0]
        for i in range(base.n_atoms):
            if free_is_v:
                gens = grid_all[i, int(labels[i]), :, :]
            else:
                gens = grid_all[i, :, int(labels[i]), :]
            scores = gens @ grad[i]
            j = int(np.argmax(scores) if self.maximize else np.argmin(scores))
            out.append(RelaxedControl.constant(j, k_free, t0, t1))
        return out


class ExtremalShiftCompletion(CompletionPolicy):
    """Completion policy (c): the opposing side plays extremal shift.

    Wraps a second-player (resp. first-player) ExtremalShiftStrategy built
    on the supplied functional (pass -psi to attack a minimizer's value)
    and answers each atom of the queried base with that strategy's grid
    choice as a constant control on the cell.
    """

    def __init__(self, psi, spec, side: str = "second", **kwargs):
        self._strategy = ExtremalShiftStrategy(psi, side, spec, **kwargs)
        self.side = side

    def reset(self):
        self._strategy.reset()

    def complete(self, t0, t1, m, base, spec, rng):
        free_is_v = "U" in {c.name for c in base.space.components if c.kind == "grid"}
        k_free = spec.v_atoms.shape[0] if free_is_v else spec.u_atoms.shape[0]
        answer = self._strategy(t0, m)
        self._strategy.begin_cell(t0, t1)
        self._strategy.notify_measure(m)
        key_to_choice = {}
        for i in range(answer.n_atoms):
            key_to_choice[answer.state()[i].tobytes()] = int(
                answer.component("grid")[i])
        out = []
        for i in range(base.n_atoms):
            choice = key_to_choice.get(base.state()[i].tobytes())
            if choice is None:  # tolerance-perturbed base: nearest answer atom
                from .torus import torus_distance

                j = int(np.argmin(torus_distance(base.state()[i][None, :],
                                                 answer.state())))
                choice = int(answer.component("grid")[j])
            out.append(RelaxedControl.constant(choice, k_free, t0, t1))
        return out


def _payoff_gradient_field(payoff, t, m):
    if hasattr(payoff, "grads") and payoff.grads is not None:
        def field(xs):
            vals = payoff.integrals(m)
            outer = (np.ones(len(payoff.phis)) if payoff.outer_grad is None
                     else np.asarray(payoff.outer_grad(vals)))
            return sum(c * g(xs) for c, g in zip(outer, payoff.grads))
        return field
    raise StructuralError("payoff has no gradient oracle for greedy completion")


@dataclass
class PlayResult:
    times: np.ndarray
    outcome: float
    flow_pieces: list
    history: list = field(default_factory=list)

    def measure_at(self, t: float) -> DiscreteMeasure:
        for (a, b), piece in self.flow_pieces:
            if a - 1e-12 <= t <= b + 1e-12:
                return piece.at(min(max(t, a), b))
        raise StructuralError("time outside the played horizon", t=float(t))


def play_stepwise(t0, m0, strat: FeedbackStrategy, partition: Partition,
                  adversary: CompletionPolicy, spec: DynamicsSpec,
                  g: MeasureFunctional, *, dt: float = 1e-2, rng=None) -> PlayResult:
    """Advance the stepwise scheme: query, complete, flow, repeat; pay at T.

    Stateful strategies (extremal shift) get `begin_cell` and, when they
    expose it, `notify_measure` with the real measure at each correction
    node (the guide re-anchoring hook).
    """
    if abs(partition.times[0] - t0) > 1e-12:
        raise StructuralError("t0 must be the first partition node")
    rng = np.random.default_rng(0) if rng is None else rng
    if hasattr(strat, "reset"):
        strat.reset()
    if hasattr(adversary, "reset"):
        adversary.reset()
    m = m0
    pieces = []
    history = []
    for k in range(partition.times.shape[0] - 1):
        a, b = float(partition.times[k]), float(partition.times[k + 1])
        base = strat(a, m)
        if not base.marginal((0,)).allclose(m.coalesce(), atol=1e-9):
            raise StructuralError("strategy violated the state-marginal condition",
                                  t=a)
        strat.begin_cell(a, b)
        if hasattr(strat, "notify_measure"):
            strat.notify_measure(m)
        controls = adversary.complete(a, b, m, base, spec, rng)
        names = {c.name for c in base.space.components if c.kind == "grid"}
        if "U" in names:
            kappa = Kappa.from_alpha(base, controls, spec.u_atoms.shape[0], a, b)
        else:
            kappa = Kappa.from_beta(base, controls, spec.v_atoms.shape[0], a, b)
        _, flow, _ = solve_flow(a, b, m.coalesce(), kappa, spec, dt=dt)
        pieces.append(((a, b), flow))
        history.append({"t": a, "atoms": base.n_atoms})
        m = flow.at(b)
    t_end = float(partition.times[-1])
    outcome = g.evaluate(t_end, m)
    return PlayResult(partition.times, float(outcome), pieces, history)


class ExtremalShiftStrategy(FeedbackStrategy):
    """Steer the real flow toward an internal guide via OT displacements.

    The guide advances one partition cell at a time under the witness
    controls of the (claimed) stable function: the oracle's minimax
    policy when available, else a budgeted search.  The guide re-anchors
    to the real measure at every correction node, so drift cannot pile
    up.  Control choice per atom: the grid control minimizing the worst
    opposing-case inner product with the shift vector (real minus guide).
    """

    def __init__(self, psi: MeasureFunctional, side: str, spec: DynamicsSpec, *,
                 guide_dt: float = 5e-3, seed: int = 0, search_budget: int = 12):
        self.side = side
        self.psi = psi
        self.spec = spec
        self.guide_dt = guide_dt
        self.search_budget = search_budget
        self._seed = seed
        self._guide_measure = None
        self._pending = None  # (t0, t1) to advance once the real measure arrives
        self._cell_index = 0

    def reset(self):
        self._guide_measure = None
        self._pending = None
        self._cell_index = 0

    def __call__(self, t, m):
        spec = self.spec
        guide = self._guide_measure if self._guide_measure is not None else m
        shift = self._shift_vectors(m, guide)
        grid_all = spec.eval_grid(t, m.state(), m)
        scores = np.einsum("auvd,ad->auv", grid_all, shift)
        if self.side == "first":
            worst = scores.max(axis=2)      # over v
            choice = worst.argmin(axis=1)   # over u
            ctrl = spec.u_grid()
        else:
            worst = scores.max(axis=1)      # over u
            choice = worst.argmin(axis=1)   # over v
            ctrl = spec.v_grid()
        return DiscreteMeasure(control_space(m.state().shape[1], ctrl),
                               (m.state(), choice.astype(np.int64)), m.weights,
                               normalize=True)

    def begin_cell(self, t0, t1):
        self._pending = (t0, t1)

    def notify_measure(self, m: DiscreteMeasure):
        """Engine callback: advance the guide from the real measure."""
        if self._pending is None:
            return
        t0, t1 = self._pending
        self._pending = None
        rng = stream(self._seed, "guide", self._cell_index)
        self._cell_index += 1
        self._guide_measure = self._advance_guide(t0, t1, m, rng)

    def _shift_vectors(self, m, guide):
        if guide is m or m.allclose(guide, atol=0.0):
            return np.zeros_like(m.state())
        _, plan = wasserstein2(m, guide)
        targets = np.zeros_like(m.state())
        for r, c, mass in zip(plan.rows, plan.cols, plan.mass):
            targets[r] += (mass / m.weights[r]) * displacement(
                m.state()[r], guide.state()[c])
        return -targets  # shift vector: real minus (barycentric) guide

    def _advance_guide(self, t0, t1, m, rng):
        spec = self.spec
        u_size = spec.u_atoms.shape[0]
        v_size = spec.v_atoms.shape[0]
        if hasattr(self.psi, "policy"):
            u_idx, v_idx = self.psi.policy(t0, m)
            atoms = []
            for i in range(m.n_atoms):
                xi = RelaxedControl.constant(int(u_idx[i]), u_size, t0, t1)
                zeta = RelaxedControl.constant(int(v_idx[i]), v_size, t0, t1)
                atoms.append(ControlledAtom(m.state()[i], xi, zeta,
                                            float(m.weights[i])))
            kappa = Kappa(m, atoms)
            _, flow, _ = solve_flow(t0, t1, m, kappa, spec, dt=self.guide_dt)
            return flow.at(t1)
        # budgeted witness search: extremize psi at the cell end over pure
        # own-side controls, opponent frozen at a uniform mixture
        own_size = u_size if self.side == "first" else v_size
        other_size = v_size if self.side == "first" else u_size
        sign = -1.0 if self.side == "first" else 1.0

        def advance(assign):
            atoms = []
            for i in range(m.n_atoms):
                own = RelaxedControl.constant(int(assign[i]), own_size, t0, t1)
                other = RelaxedControl.uniform(other_size, t0, t1)
                xi, zeta = (own, other) if self.side == "first" else (other, own)
                atoms.append(ControlledAtom(m.state()[i], xi, zeta,
                                            float(m.weights[i])))
            _, flow, _ = solve_flow(t0, t1, m, Kappa(m, atoms), spec,
                                    dt=self.guide_dt)
            return flow.at(t1)

        best = None
        candidates = [np.full(m.n_atoms, j) for j in range(own_size)]
        while len(candidates) < self.search_budget:
            candidates.append(rng.integers(0, own_size, size=m.n_atoms))
        for assign in candidates[: self.search_budget]:
            end = advance(assign)
            val = sign * self.psi.evaluate(t1, end)
            if best is None or val > best[0]:
                best = (val, end)
        return best[1]


def extremal_shift_strategy(psi, side, spec, **kwargs) -> ExtremalShiftStrategy:
    return ExtremalShiftStrategy(psi, side, spec, **kwargs)


def _worker_count() -> int:
    import os

    try:
        return max(1, int(os.environ.get("TORUSMFG_WORKERS", "1")))
    except ValueError:
        return 1


def _run_play_matrix(t0, m0, partition, spec, strategy_pool, adversary_pool, g,
                     dt, seed, tag):
    """Outcome matrix over pool pairs; per-pair seed streams keep results
    independent of execution order, so the optional worker pool cannot
    change them."""
    pairs = [(i, j) for i in range(len(strategy_pool))
             for j in range(len(adversary_pool))]

    def one(pair):
        i, j = pair
        rng = stream(seed, tag, i, j)
        return play_stepwise(t0, m0, strategy_pool[i], partition,
                             adversary_pool[j], spec, g, dt=dt, rng=rng).outcome

    outcomes = np.empty((len(strategy_pool), len(adversary_pool)))
    workers = _worker_count()
    stateful = any(hasattr(s, "notify_measure") for s in strategy_pool)
    if workers > 1 and not stateful:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for (i, j), val in zip(pairs, pool.map(one, pairs)):
                outcomes[i, j] = val
    else:
        for pair in pairs:
            outcomes[pair] = one(pair)
    return outcomes


def estimate_gamma1(t0, m0, partition, spec, strategy_pool, adversary_pool, g, *,
                    dt=1e-2, seed: int = 0) -> dict:
    """min over the strategy pool of max over the adversary pool of outcomes.

    A pool-restricted outer approximation of the upper value; never claims
    convergence to the true Gamma_1.
    """
    outcomes = _run_play_matrix(t0, m0, partition, spec, strategy_pool,
                                adversary_pool, g, dt, seed, "gamma1")
    worst = outcomes.max(axis=1)
    i_star = int(worst.argmin())
    return {"estimate": float(worst[i_star]), "matrix": outcomes.tolist(),
            "best_strategy": i_star, "pool_sizes": (len(strategy_pool),
                                                    len(adversary_pool))}


def estimate_gamma2(t0, m0, partition, spec, strategy_pool, adversary_pool, g, *,
                    dt=1e-2, seed: int = 0) -> dict:
    """max over second-player strategies of min over completions (mirror)."""
    outcomes = _run_play_matrix(t0, m0, partition, spec, strategy_pool,
                                adversary_pool, g, dt, seed, "gamma2")
    worst = outcomes.min(axis=1)
    i_star = int(worst.argmax())
    return {"estimate": float(worst[i_star]), "matrix": outcomes.tolist(),
            "best_strategy": i_star, "pool_sizes": (len(strategy_pool),
                                                    len(adversary_pool))}


# ---------------------------------------------------------------------------
# brute-force value oracle


class GridValueFunctional(MeasureFunctional):
    """Value table on particle configurations, multilinearly interpolated.

    Configurations are exchangeable p-particle placements on a periodic
    1-d cell grid; tables are stored symmetrized on the product grid so
    evaluation is plain periodic multilinear interpolation, linear in
    time between DP nodes.
    """

    regularity = "grid-interpolated"

    def __init__(self, times, tables, n_cells, particles, isaacs_gap=0.0,
                 policy_tables=None):
        self.times = np.asarray(times, dtype=np.float64)
        self.tables = np.asarray(tables, dtype=np.float64)
        self.n_cells = int(n_cells)
        self.particles = int(particles)
        self.isaacs_gap = float(isaacs_gap)
        self._policies = policy_tables
        grads = []
        for k in range(self.tables.shape[0]):
            t = self.tables[k]
            for axis in range(self.particles):
                grads.append(np.max(np.abs(np.roll(t, -1, axis=axis) - t)))
        self.lipschitz = float(max(grads) * self.n_cells) if grads else 0.0

    def _positions(self, m: DiscreteMeasure) -> np.ndarray:
        if m.state().shape[1] != 1:
            raise StructuralError("value oracle is 1-d")
        if m.n_atoms != self.particles or not np.allclose(
                m.weights, 1.0 / self.particles, atol=1e-9):
            raise StructuralError(
                "oracle functional needs equal-weight clouds of its particle count",
                expected=self.particles, got=m.n_atoms)
        return m.state()[:, 0]

    def _interp_table(self, table, pts: np.ndarray) -> np.ndarray:
        """Periodic multilinear interpolation; pts (B, p) in [0,1)."""
        n = self.n_cells
        gprime = pts * n
        i0 = np.floor(gprime).astype(np.int64)
        frac = gprime - i0
        out = np.zeros(pts.shape[0])
        for corner in itertools.product((0, 1), repeat=self.particles):
            idx = tuple(((i0[:, ax] + corner[ax]) % n) for ax in range(self.particles))
            weight = np.prod([frac[:, ax] if corner[ax] else 1.0 - frac[:, ax]
                              for ax in range(self.particles)], axis=0)
            out += weight * table[idx]
        return out

    def evaluate_batch(self, t, pts: np.ndarray) -> np.ndarray:
        t = float(min(max(t, self.times[0]), self.times[-1]))
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0,
                        self.times.shape[0] - 2))
        span = self.times[k + 1] - self.times[k]
        lam = (t - self.times[k]) / span
        v0 = self._interp_table(self.tables[k], pts)
        v1 = self._interp_table(self.tables[k + 1], pts)
        return (1.0 - lam) * v0 + lam * v1

    def evaluate(self, t, m):
        pts = self._positions(m)[None, :]
        return float(self.evaluate_batch(t, pts)[0])

    def policy(self, t, m):
        """Per-atom minimax grid actions at the nearest DP node and cells."""
        if self._policies is None:
            raise StructuralError("oracle was built without policy tables")
        pos = self._positions(m)
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0,
                        len(self._policies) - 1))
        cells = np.round(pos * self.n_cells).astype(np.int64) % self.n_cells
        order = np.argsort(cells, kind="stable")
        key = tuple(sorted(cells.tolist()))
        u_joint, v_joint = self._policies[k][key]
        u_idx = np.empty(self.particles, dtype=np.int64)
        v_idx = np.empty(self.particles, dtype=np.int64)
        u_idx[order] = u_joint
        v_idx[order] = v_joint
        return u_idx, v_idx

    def to_json(self) -> dict:
        return {
            "times": self.times.tolist(),
            "tables": self.tables.tolist(),
            "n_cells": self.n_cells,
            "particles": self.particles,
            "isaacs_gap": self.isaacs_gap,
            "lipschitz": self.lipschitz,
        }

    @staticmethod
    def from_json(data: dict) -> "GridValueFunctional":
        return GridValueFunctional(np.asarray(data["times"]),
                                   np.asarray(data["tables"]), data["n_cells"],
                                   data["particles"], data.get("isaacs_gap", 0.0))


def value_oracle_small(spec: DynamicsSpec, g: MeasureFunctional, n_cells: int,
                       time_grid, particles: int, *, order_tol: float = 1e-9,
                       keep_policies: bool = True):
    """Backward minimax DP on exchangeable particle configurations.

    Semi-Lagrangian: each joint control moves the configuration through
    the true dynamics for one step and reads the next table by periodic
    multilinear interpolation (no snapping).  Both orders (min-max and
    max-min) are computed; the gap is reported, a warning flag attached
    when it exceeds `order_tol`.
    """
    if spec.d != 1:
        raise StructuralError("value oracle supports d = 1 only")
    times = np.asarray(time_grid, dtype=np.float64)
    n_steps = times.shape[0] - 1
    if n_cells > 8 or particles > 4 or n_steps > 32:
        raise StructuralError("oracle instance exceeds the desk-scale limits",
                              n_cells=n_cells, particles=particles, steps=n_steps)
    ku = spec.u_atoms.shape[0]
    kv = spec.v_atoms.shape[0]
    centers = np.arange(n_cells) / n_cells
    configs = list(itertools.combinations_with_replacement(range(n_cells), particles))
    u_joints = list(itertools.product(range(ku), repeat=particles))
    v_joints = list(itertools.product(range(kv), repeat=particles))

    def config_measure(cfg):
        pos = centers[np.asarray(cfg)][:, None]
        return DiscreteMeasure(measure_space(1), (pos,),
                               np.full(particles, 1.0 / particles))

    def symmetrize(values_by_cfg):
        table = np.empty((n_cells,) * particles)
        for idx in itertools.product(range(n_cells), repeat=particles):
            table[idx] = values_by_cfg[tuple(sorted(idx))]
        return table

    terminal = {cfg: g.evaluate(times[-1], config_measure(cfg)) for cfg in configs}
    tables = np.empty((n_steps + 1,) + (n_cells,) * particles)
    tables[-1] = symmetrize(terminal)
    oracle = GridValueFunctional(times, tables, n_cells, particles)
    max_gap = 0.0
    policies = [None] * n_steps
    for k in range(n_steps - 1, -1, -1):
        t = float(times[k])
        dt_k = float(times[k + 1] - times[k])
        vals_by_cfg = {}
        pol_by_cfg = {}
        next_table = tables[k + 1]
        for cfg in configs:
            pos = centers[np.asarray(cfg)]
            m_cfg = config_measure(cfg)
            grid_all = spec.eval_grid(t, pos[:, None], m_cfg)  # (p, ku, kv, 1)
            moved = wrap(pos[:, None, None] + dt_k * grid_all[:, :, :, 0])
            pts = np.empty((len(u_joints) * len(v_joints), particles))
            row = 0
            for a_vec in u_joints:
                for b_vec in v_joints:
                    for i in range(particles):
                        pts[row, i] = moved[i, a_vec[i], b_vec[i]]
                    row += 1
            vals = oracle._interp_table(next_table, pts).reshape(len(u_joints),
                                                                 len(v_joints))
            minmax_rows = vals.max(axis=1)
            a_star = int(minmax_rows.argmin())
            minmax = float(minmax_rows[a_star])
            maxmin = float(vals.min(axis=0).max())
            max_gap = max(max_gap, minmax - maxmin)
            b_star = int(vals[a_star].argmax())
            vals_by_cfg[cfg] = minmax
            pol_by_cfg[cfg] = (np.asarray(u_joints[a_star]),
                               np.asarray(v_joints[b_star]))
        tables[k] = symmetrize(vals_by_cfg)
        policies[k] = pol_by_cfg
    out = GridValueFunctional(times, tables, n_cells, particles,
                              isaacs_gap=max_gap,
                              policy_tables=policies if keep_policies else None)
    out.order_warning = bool(max_gap > order_tol)
    return out


__all__ = [
    "Partition", "FeedbackStrategy", "ConstantControlStrategy",
    "CompletionPolicy", "ConstantCompletion", "RandomMixtureCompletion",
    "GreedyHamiltonianCompletion", "ExtremalShiftCompletion", "PlayResult",
    "play_stepwise",
    "ExtremalShiftStrategy", "extremal_shift_strategy",
    "estimate_gamma1", "estimate_gamma2",
    "GridValueFunctional", "value_oracle_small",
]
