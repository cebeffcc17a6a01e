import numpy as np
import pytest

from torusmfg import (DiscreteMeasure, StructuralError, dist_to_vectogram,
                      wasserstein2)
from torusmfg.shifts import (compose_plan, concatenate, difference_quotient,
                             line_lift, theta_shift, xi_shift)

from conftest import spec_u_plus_v


def make_eta(rng, spec, n=5, c=2.0, d=1):
    """Random direction measure over torus x U x B_c."""
    space = spec.direction_space_u(c)
    x = rng.random((n, d))
    u = rng.integers(0, spec.u_atoms.shape[0], size=n)
    w = rng.standard_normal((n, d))
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    w = w * (rng.random((n, 1)) * c / np.maximum(norms, 1e-12))
    wts = rng.random(n) + 0.1
    return DiscreteMeasure(space, (x, u, w), wts / wts.sum())


def make_alpha(rng, spec, n=4, d=1):
    space = spec.control_space_u()
    x = rng.random((n, d))
    u = rng.integers(0, spec.u_atoms.shape[0], size=n)
    wts = rng.random(n) + 0.1
    return DiscreteMeasure(space, (x, u), wts / wts.sum())


class TestThetaXi:
    def test_tau_zero_is_marginal(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec)
        assert theta_shift(eta, 0.0).allclose(eta.marginal((0,)))
        assert xi_shift(eta, 0.0).allclose(eta.marginal((0, 1)))

    def test_single_atom_wraps(self):
        spec = spec_u_plus_v()
        space = spec.direction_space_u(1.0)
        eta = DiscreteMeasure(space, (np.array([[0.9]]), np.array([0]),
                                      np.array([[0.4]])), np.array([1.0]))
        out = theta_shift(eta, 0.5)
        assert np.allclose(out.state(), [[0.1]])

    def test_projection_identity(self, rng):
        spec = spec_u_plus_v()
        for _ in range(10):
            eta = make_eta(rng, spec, n=int(rng.integers(1, 7)))
            tau = float(rng.random())
            assert xi_shift(eta, tau).marginal((0,), coalesce=False).allclose(
                theta_shift(eta, tau))

    def test_shift_bounded_by_radius(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec, n=2, c=1.5)
        base = theta_shift(eta, 0.0)
        moved = theta_shift(eta, 0.1)
        d, _ = wasserstein2(base, moved)
        assert d <= 0.1 * 1.5 + 1e-12

    def test_negative_tau_rejected(self, rng):
        spec = spec_u_plus_v()
        with pytest.raises(StructuralError):
            theta_shift(make_eta(rng, spec), -0.1)


class TestComposePlan:
    def test_identity_plan_returns_input(self, rng):
        from torusmfg.transport import identity_plan

        spec = spec_u_plus_v()
        eta = make_eta(rng, spec)
        alpha = eta.marginal((0, 1), coalesce=False)
        out = compose_plan(identity_plan(alpha), eta)
        assert out.allclose(eta)

    def test_same_cloud_optimal_plan_keeps_eta(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec)
        alpha = eta.marginal((0, 1), coalesce=False)
        _, plan = wasserstein2(alpha, alpha)
        out = compose_plan(plan, eta)
        d, _ = wasserstein2(out, eta)
        assert d <= 1e-9

    def test_off_diagonal_routing_hand_enumerated(self):
        spec = spec_u_plus_v(u_grid=(0.0,), v_grid=(0.0,))
        cs = spec.control_space_u()
        ds = spec.direction_space_u(1.0)
        alpha = DiscreteMeasure(cs, (np.array([[0.2], [0.7]]), np.array([0, 0])),
                                np.array([0.5, 0.5]))
        alpha_prime = DiscreteMeasure(cs, (np.array([[0.69], [0.21]]),
                                           np.array([0, 0])), np.array([0.5, 0.5]))
        eta = DiscreteMeasure(ds, (np.array([[0.2], [0.7]]), np.array([0, 0]),
                                   np.array([[0.3], [-0.5]])), np.array([0.5, 0.5]))
        _, plan = wasserstein2(alpha_prime, alpha)  # optimal plan swaps the atoms
        out = compose_plan(plan, eta).canonical()
        # expected: (0.69 with w=-0.5), (0.21 with w=0.3), each mass 1/2
        got = {(round(float(x), 10), round(float(w), 10)): float(wt)
               for x, w, wt in zip(out.state()[:, 0], out.component("vector")[:, 0],
                                   out.weights)}
        assert got == {(0.69, -0.5): 0.5, (0.21, 0.3): 0.5}

    def test_marginal_mismatch_rejected(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec, n=3)
        other = make_alpha(rng, spec, n=3)
        _, plan = wasserstein2(other, other)
        with pytest.raises(StructuralError):
            compose_plan(plan, eta)


class TestLemma1Fuzz:
    def test_transfer_inequality(self, rng):
        spec = spec_u_plus_v()
        for _ in range(100):
            c = float(rng.uniform(0.5, 3.0))
            n = int(rng.integers(1, 6))
            eta = make_eta(rng, spec, n=n, c=c)
            alpha = eta.marginal((0, 1), coalesce=False)
            alpha_prime = make_alpha(rng, spec, n=int(rng.integers(1, 6)))
            tau, theta = rng.random(2) * 0.5
            w2_alpha, plan = wasserstein2(alpha_prime, alpha)
            eta_prime = compose_plan(plan, eta)
            lhs, _ = wasserstein2(xi_shift(eta, float(tau)),
                                  xi_shift(eta_prime, float(theta)))
            assert lhs <= w2_alpha + abs(tau - theta) * c + 1e-7


class TestLemma2Fuzz:
    def test_vectogram_distance_inequality(self, rng):
        spec = spec_u_plus_v(drift=0.3)
        for _ in range(60):
            c = 2.5
            n = int(rng.integers(1, 5))
            eta = make_eta(rng, spec, n=n, c=c)
            alpha = eta.marginal((0, 1), coalesce=False)
            alpha_prime = make_alpha(rng, spec, n=int(rng.integers(1, 5)))
            t = float(rng.random() * 0.5)
            t_prime = t + float(rng.standard_normal() * 0.1)
            w2_alpha, plan = wasserstein2(alpha_prime, alpha)
            eta_prime = compose_plan(plan, eta)
            m = alpha.marginal((0,))
            m_prime = alpha_prime.marginal((0,))

            def avg_dist(tt, ee, mm):
                xs = ee.state()
                us = ee.component("grid")
                ws = ee.component("vector")
                total = 0.0
                for i in range(ee.n_atoms):
                    vg = spec.eval_F1(tt, xs[i], mm, int(us[i]))
                    total += float(ee.weights[i]) * dist_to_vectogram(ws[i], vg)
                return total

            lhs = abs(avg_dist(t, eta, m) - avg_dist(t_prime, eta_prime, m_prime))
            rhs = spec.modulus(abs(t_prime - t)) + 2 * spec.lipschitz * w2_alpha + 1e-7
            assert lhs <= rhs


class TestLineLiftConcat:
    def test_lift_endpoint_marginals(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec, n=4, c=1.2)
        nu = line_lift(eta, 0.2, 0.7, nodes=11)
        assert nu.control_marginal_at(0.2).allclose(eta.marginal((0, 1),
                                                                 coalesce=False))
        assert nu.control_marginal_at(0.7).allclose(xi_shift(eta, 0.5))
        assert nu.control_marginal_at(0.45).allclose(xi_shift(eta, 0.25))

    def test_zero_direction_constant_paths(self, rng):
        spec = spec_u_plus_v()
        space = spec.direction_space_u(1.0)
        eta = DiscreteMeasure(space, (np.array([[0.3], [0.8]]), np.array([0, 1]),
                                      np.zeros((2, 1))), np.array([0.5, 0.5]))
        nu = line_lift(eta, 0.0, 1.0, nodes=5)
        assert np.allclose(nu.paths, nu.paths[:, :1, :])

    def test_concatenate_shared_provenance(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec, n=3, c=1.0)
        nu1 = line_lift(eta, 0.0, 0.5, nodes=6)
        eta_mid = difference_quotient(nu1)  # same directions, base at 0
        # continue with zero directions from the junction marginal
        mid = xi_shift(eta, 0.5)
        space = spec.direction_space_u(1.0)
        eta2 = DiscreteMeasure(space, (mid.state(), mid.component("grid"),
                                       np.zeros((mid.n_atoms, 1))), mid.weights)
        nu2 = line_lift(eta2, 0.5, 0.8, nodes=4)
        glued = concatenate(nu1, nu2)
        assert glued.times[0] == 0.0 and glued.times[-1] == pytest.approx(0.8)
        assert glued.control_marginal_at(0.0).allclose(nu1.control_marginal_at(0.0))
        assert glued.control_marginal_at(0.8).allclose(nu2.control_marginal_at(0.8))
        # constant tail
        tail = glued.paths[:, -4:, :]
        assert np.allclose(tail, tail[:, :1, :])

    def test_concatenate_junction_mismatch(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec, n=3, c=1.0)
        nu1 = line_lift(eta, 0.0, 0.5, nodes=6)
        eta2 = make_eta(rng, spec, n=3, c=1.0)
        nu2 = line_lift(eta2, 0.5, 0.9, nodes=5)
        with pytest.raises(StructuralError):
            concatenate(nu1, nu2, tol=1e-9)

    def test_single_atom_kink_allowed(self):
        spec = spec_u_plus_v()
        space = spec.direction_space_u(1.0)
        e1 = DiscreteMeasure(space, (np.array([[0.1]]), np.array([0]),
                                     np.array([[0.5]])), np.array([1.0]))
        nu1 = line_lift(e1, 0.0, 0.4, nodes=5)
        e2 = DiscreteMeasure(space, (np.array([[0.3]]), np.array([0]),
                                     np.array([[-0.5]])), np.array([1.0]))
        nu2 = line_lift(e2, 0.4, 0.8, nodes=5)
        glued = concatenate(nu1, nu2)
        assert glued.n_atoms == 1
        assert glued.paths[0, -1, 0] == pytest.approx(0.1)  # back where it started


class TestDifferenceQuotient:
    def test_inverse_of_line_lift(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec, n=4, c=1.3)
        nu = line_lift(eta, 0.1, 0.6, nodes=21)
        back = difference_quotient(nu, radius=1.3)
        assert back.allclose(eta, atol=1e-12)

    def test_constant_paths_zero_directions(self, rng):
        spec = spec_u_plus_v()
        space = spec.direction_space_u(1.0)
        eta = DiscreteMeasure(space, (np.array([[0.3]]), np.array([0]),
                                      np.zeros((1, 1))), np.array([1.0]))
        nu = line_lift(eta, 0.0, 1.0, nodes=40)
        back = difference_quotient(nu)
        assert np.allclose(back.component("vector"), 0.0)

    def test_flow_secants_converge_to_velocity(self):
        from torusmfg.flows import solve_flow
        from conftest import spec_u_plus_v
        from test_flows import sin_drift_spec, uniform_kappa

        spec = sin_drift_spec()
        errs = []
        for r in [0.2, 0.1, 0.05]:
            m_star, kappa = uniform_kappa(spec, [0.15, 0.35, 0.6], 0.0, r)
            ens, _, _ = solve_flow(0.0, r, m_star, kappa, spec, dt=1e-3)
            dq = difference_quotient(ens, radius=1.0)
            secants = dq.component("vector")[:, 0]
            v0 = np.sin(2 * np.pi * np.asarray([0.15, 0.35, 0.6]))
            errs.append(np.max(np.abs(secants - v0)))
        assert errs[0] < 1.0  # bounded by C_f scale
        assert errs[2] < 0.55 * errs[1] < 0.3 * errs[0]  # O(r - s) decay


class TestAssociativity:
    def test_concatenate_associative(self, rng):
        spec = spec_u_plus_v()
        eta = make_eta(rng, spec, n=3, c=1.0)
        nu1 = line_lift(eta, 0.0, 0.3, nodes=4)
        mid1 = xi_shift(eta, 0.3)
        space = spec.direction_space_u(1.0)
        eta2 = DiscreteMeasure(space, (mid1.state(), mid1.component("grid"),
                                       0.5 * np.ones((mid1.n_atoms, 1))), mid1.weights)
        nu2 = line_lift(eta2, 0.3, 0.6, nodes=4)
        mid2 = xi_shift(eta2, 0.3)
        eta3 = DiscreteMeasure(space, (mid2.state(), mid2.component("grid"),
                                       -0.25 * np.ones((mid2.n_atoms, 1))), mid2.weights)
        nu3 = line_lift(eta3, 0.6, 0.9, nodes=4)
        left = concatenate(concatenate(nu1, nu2), nu3)
        right = concatenate(nu1, concatenate(nu2, nu3))
        assert np.allclose(left.times, right.times)
        li = np.lexsort((left.paths[:, 0, 0], left.u_labels))
        ri = np.lexsort((right.paths[:, 0, 0], right.u_labels))
        assert np.allclose(left.paths[li], right.paths[ri], atol=1e-12)
        assert np.allclose(left.weights[li], right.weights[ri], atol=1e-12)
