import numpy as np
import pytest
from scipy.optimize import linprog

from barrierpairs.errors import EnumerationLimitError, InvalidModelError
from barrierpairs.model import (Controller, UncertainPlant, UncertaintyDirection,
                                canonical_realization, closed_loop_matrices,
                                coefficients_at, vertex_parameters)


def mass_spring():
    return UncertainPlant(
        n=2, alpha_bar=[0.0, 10.0], beta_bar=[0.0, 10.0],
        uncertainty_dirs=(UncertaintyDirection([1.0, 0.0], theta_y=-1.0, theta_u=1.0),),
        w_bar=0.05)


class TestCanonicalRealization:
    def test_mass_spring(self):
        real = canonical_realization(mass_spring())
        assert np.array_equal(real.A0, [[0.0, 0.0], [1.0, 0.0]])
        assert np.array_equal(real.c0, [0.0, 1.0])
        assert np.array_equal(real.b_y_bar, [-10.0, 0.0])
        assert np.array_equal(real.b_u_bar, [10.0, 0.0])
        assert np.array_equal(real.A_hat_p, [[0.0, -10.0], [1.0, 0.0]])
        assert np.array_equal(real.b_tilde_p, [[1.0], [0.0]])
        assert np.array_equal(real.theta_y, [-1.0])
        assert np.array_equal(real.theta_u, [1.0])

    def test_first_order(self):
        real = canonical_realization(UncertainPlant(n=1, alpha_bar=[3.0], beta_bar=[2.0]))
        assert np.array_equal(real.A0, [[0.0]])
        assert np.array_equal(real.c0, [1.0])
        assert np.array_equal(real.b_y_bar, [-3.0])
        assert np.array_equal(real.b_u_bar, [2.0])

    def test_third_order_reversal(self):
        real = canonical_realization(
            UncertainPlant(n=3, alpha_bar=[1.0, 2.0, 3.0], beta_bar=[0.0, 0.0, 1.0]))
        assert np.array_equal(real.b_y_bar, [-3.0, -2.0, -1.0])
        # subdiagonal ones, zeros elsewhere
        expected = np.zeros((3, 3))
        expected[1, 0] = expected[2, 1] = 1.0
        assert np.array_equal(real.A0, expected)

    def test_selection_matrices(self):
        real = canonical_realization(mass_spring())
        assert np.array_equal(real.S_p, np.hstack([np.eye(2), np.zeros((2, 2))]))
        assert np.array_equal(real.S_k, np.hstack([np.zeros((2, 2)), np.eye(2)]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidModelError):
            UncertainPlant(n=2, alpha_bar=[0.0, 1.0], beta_bar=[0.0, 1.0],
                           uncertainty_dirs=({"b_tilde": [1.0], "theta_y": 1.0,
                                              "theta_u": 0.0},))

    def test_bad_order_rejected(self):
        with pytest.raises(InvalidModelError):
            UncertainPlant(n=0, alpha_bar=[], beta_bar=[])
        with pytest.raises(InvalidModelError):
            UncertainPlant(n=1, alpha_bar=[1.0], beta_bar=[1.0], w_bar=-0.1)


class TestClosedLoopMatrices:
    def test_zero_controller(self):
        real = canonical_realization(mass_spring())
        A_CL, B_wp, C_q, D_wp = closed_loop_matrices(real, Controller.zero(2))
        assert np.array_equal(A_CL[:2, :2], real.A_hat_p)
        assert np.array_equal(A_CL[:2, 2:], np.zeros((2, 2)))
        assert np.array_equal(A_CL[2:, :], np.zeros((2, 4)))

    def test_no_uncertainty_channel(self):
        plant = UncertainPlant(n=2, alpha_bar=[0.0, 10.0], beta_bar=[0.0, 10.0])
        real = canonical_realization(plant)
        ctrl = Controller(A_k=-np.eye(2), b_k=[1.0, 2.0], c_k=[0.5, 0.0])
        A_CL, B_wp, C_q, D_wp = closed_loop_matrices(real, ctrl)
        assert C_q.shape == (0, 4)
        assert D_wp.shape == (0, 1)
        assert np.array_equal(B_wp, np.array([[-10.0], [0.0], [1.0], [2.0]]))

    def test_blocks_match_definitions(self):
        real = canonical_realization(mass_spring())
        ctrl = Controller(A_k=[[-1.0, 0.5], [0.0, -2.0]], b_k=[1.0, -1.0], c_k=[2.0, 3.0])
        A_CL, B_wp, C_q, D_wp = closed_loop_matrices(real, ctrl)
        assert np.array_equal(A_CL[:2, 2:], np.outer(real.b_u_bar, ctrl.c_k))
        assert np.array_equal(A_CL[2:, :2], np.outer(ctrl.b_k, real.c0))
        assert np.array_equal(A_CL[2:, 2:], ctrl.A_k)
        assert np.array_equal(B_wp[:2, 1:], real.b_tilde_p)
        assert np.array_equal(C_q, [[0.0, -1.0, 2.0, 3.0]])
        assert np.array_equal(D_wp, [[-1.0, 0.0]])

    def test_linearity_in_controller(self):
        real = canonical_realization(mass_spring())
        rng = np.random.default_rng(7)
        c1 = Controller(rng.normal(size=(2, 2)), rng.normal(size=2), rng.normal(size=2))
        c2 = Controller(rng.normal(size=(2, 2)), rng.normal(size=2), rng.normal(size=2))
        csum = Controller(c1.A_k + c2.A_k, c1.b_k + c2.b_k, c1.c_k + c2.c_k)
        a0 = closed_loop_matrices(real, Controller.zero(2))[0]
        a1 = closed_loop_matrices(real, c1)[0]
        a2 = closed_loop_matrices(real, c2)[0]
        asum = closed_loop_matrices(real, csum)[0]
        assert np.allclose(asum - a0, (a1 - a0) + (a2 - a0), atol=1e-12)

    def test_synthesized_loop_is_hurwitz(self, realization, barrier_pair):
        A_CL = closed_loop_matrices(realization, barrier_pair.controller)[0]
        assert np.max(np.linalg.eigvals(A_CL).real) < 0


class TestVertexParameters:
    def test_no_uncertainty_single_vertex(self):
        plant = UncertainPlant(n=2, alpha_bar=[0.0, 10.0], beta_bar=[0.0, 10.0])
        verts = vertex_parameters(plant)
        assert len(verts) == 1
        assert np.array_equal(verts[0][0], [-10.0, 0.0])
        assert np.array_equal(verts[0][1], [10.0, 0.0])

    def test_mass_spring_vertices(self):
        verts = vertex_parameters(mass_spring())
        assert len(verts) == 2
        # delta = -1 first: stiffness 9; then delta = +1: stiffness 11
        assert np.allclose(verts[0][0], [-9.0, 0.0])
        assert np.allclose(verts[0][1], [9.0, 0.0])
        assert np.allclose(verts[1][0], [-11.0, 0.0])
        assert np.allclose(verts[1][1], [11.0, 0.0])

    def test_two_direction_sign_order(self):
        plant = UncertainPlant(
            n=2, alpha_bar=[0.0, 10.0], beta_bar=[0.0, 10.0],
            uncertainty_dirs=(
                UncertaintyDirection([1.0, 0.0], theta_y=1.0, theta_u=0.0),
                UncertaintyDirection([0.0, 1.0], theta_y=1.0, theta_u=0.0),
            ))
        verts = vertex_parameters(plant)
        signs = [(np.sign(v[0][0] + 10.0), np.sign(v[0][1])) for v in verts]
        assert signs == [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]

    def test_enumeration_limit(self):
        dirs = tuple(UncertaintyDirection(np.eye(30)[:, i % 30], 1.0, 0.0)
                     for i in range(21))
        plant = UncertainPlant(n=30, alpha_bar=np.zeros(30), beta_bar=np.zeros(30),
                               uncertainty_dirs=dirs)
        with pytest.raises(EnumerationLimitError):
            vertex_parameters(plant)

    def test_affine_reconstruction_exact(self):
        plant = mass_spring()
        from barrierpairs.model import sign_patterns
        for signs, (b_y, b_u) in zip(sign_patterns(plant.n_p), vertex_parameters(plant)):
            ref_y, ref_u = coefficients_at(plant, signs)
            assert np.abs(b_y - ref_y).max() <= 1e-12
            assert np.abs(b_u - ref_u).max() <= 1e-12

    def test_box_points_inside_vertex_hull(self):
        plant = UncertainPlant(
            n=2, alpha_bar=[1.0, 5.0], beta_bar=[0.5, 2.0],
            uncertainty_dirs=(
                UncertaintyDirection([1.0, 0.3], theta_y=-1.0, theta_u=0.7),
                UncertaintyDirection([0.2, 1.0], theta_y=0.4, theta_u=-1.0),
            ))
        verts = vertex_parameters(plant)
        V = np.array([np.concatenate(v) for v in verts]).T  # (4, 2^np)
        rng = np.random.default_rng(11)
        for _ in range(25):
            delta = rng.uniform(-1.0, 1.0, size=plant.n_p)
            target = np.concatenate(coefficients_at(plant, delta))
            # feasibility: V lam = target, sum lam = 1, lam >= 0
            A_eq = np.vstack([V, np.ones(V.shape[1])])
            b_eq = np.concatenate([target, [1.0]])
            res = linprog(c=np.zeros(V.shape[1]), A_eq=A_eq, b_eq=b_eq,
                          bounds=[(0, None)] * V.shape[1], method="highs")
            assert res.status == 0, f"point outside hull for delta={delta}"
