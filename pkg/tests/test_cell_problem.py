import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from voidrod.cell_problem import (
    CrossSectionMesh,
    Q2Matrix,
    assemble_q2_matrix,
    cell_basis,
    cell_objective,
    richardson,
    saint_venant_torsion_constant,
    solve_cell,
)
from voidrod.errors import InvalidInputError
from voidrod.material import QuadForm3, hat

vecs = arrays(np.float64, (3,), elements=st.floats(-2.0, 2.0, allow_nan=False))
Q0 = QuadForm3(0.0, 1.0)
Q1 = QuadForm3(1.0, 1.0)


def young(q):
    return q.mu * (3 * q.lam + 2 * q.mu) / (q.lam + q.mu)


class TestTorsionOracle:
    def test_square_value(self):
        # tabulated coefficient 0.1406 for a square; series converged to 1e-12
        assert saint_venant_torsion_constant() == pytest.approx(0.140577014956, abs=1e-11)
        assert saint_venant_torsion_constant(terms=2000) == pytest.approx(
            saint_venant_torsion_constant(terms=200), abs=2e-12)

    def test_thin_strip_limit(self):
        # J -> a b^3 / 3 for a >> b
        assert saint_venant_torsion_constant(100.0, 1.0) == pytest.approx(100.0 / 3 * (1 - 0.630 / 100), rel=1e-3)

    def test_symmetric_in_arguments(self):
        assert saint_venant_torsion_constant(2.0, 1.0) == saint_venant_torsion_constant(1.0, 2.0)


class TestMesh:
    def test_geometry(self):
        m = CrossSectionMesh(4)
        assert m.n_nodes == 25
        assert m.element_areas().sum() == pytest.approx(1.0)
        assert m.coords[0] == -0.5 and m.coords[-1] == 0.5

    def test_rejects_bad_n(self):
        with pytest.raises(InvalidInputError):
            CrossSectionMesh(0)


class TestCellSolve:
    def test_bending_exact_for_lambda_zero(self):
        # bilinear elements reproduce the affine minimizers, so E*I = 2 * 1/12 at every n
        for n in (2, 4, 8):
            B = assemble_q2_matrix(Q0, n).B
            assert B[1, 1] == pytest.approx(1 / 6, rel=1e-12)
            assert B[2, 2] == pytest.approx(1 / 6, rel=1e-12)

    def test_bending_converges_to_young_modulus(self):
        B = assemble_q2_matrix(Q1, 32).B
        assert B[1, 1] == pytest.approx(young(Q1) / 12, rel=1e-4)
        assert B[1, 1] == pytest.approx(B[2, 2], rel=1e-12)

    def test_torsion_independent_of_lambda(self):
        assert assemble_q2_matrix(Q1, 16).B[0, 0] == pytest.approx(assemble_q2_matrix(Q0, 16).B[0, 0], rel=1e-10)

    def test_frozen_coarse_values(self):
        # frozen from the n = 8 assembly; torsion approaches 0.1405770 from above
        B = assemble_q2_matrix(Q1, 8).B
        assert B[0, 0] == pytest.approx(0.14247996406009217, rel=1e-10)
        assert B[1, 1] == pytest.approx(0.20865885, rel=1e-7)
        assert np.max(np.abs(B - np.diag(np.diag(B)))) < 1e-12

    def test_skew_matrix_input(self):
        a = np.array([0.3, -0.2, 0.5])
        s1 = solve_cell(a, Q1, 6)
        s2 = solve_cell(hat(a), Q1, 6)
        assert s1.value == pytest.approx(s2.value, rel=1e-12)

    def test_rejects_non_skew(self):
        with pytest.raises(InvalidInputError):
            solve_cell(np.eye(3), Q1, 4)
        with pytest.raises(InvalidInputError):
            solve_cell([np.nan, 0, 0], Q1, 4)

    def test_polarization_matches_value(self):
        basis = cell_basis(Q1, 6)
        a = np.array([0.4, 1.0, -0.7])
        assert solve_cell(a, Q1, 6).value == pytest.approx(basis.matrix(a), rel=1e-10)

    @given(a=vecs, t=st.floats(-3.0, 3.0))
    def test_homogeneity(self, a, t):
        B = assemble_q2_matrix(Q1, 6)
        assert B(t * a) == pytest.approx(t * t * B(a), rel=1e-10, abs=1e-14)

    @given(a=vecs, b=vecs)
    def test_minimizer_linear(self, a, b):
        basis = cell_basis(Q1, 4)
        s = solve_cell(a + b, Q1, 4)
        assert np.allclose(s.alpha, basis.alpha(a) + basis.alpha(b), atol=1e-10)

    @given(a=vecs, seed=st.integers(0, 2**16))
    def test_minimality(self, a, seed):
        s = solve_cell(a, Q1, 4)
        pert = 1e-2 * np.random.default_rng(seed).standard_normal(s.alpha.shape)
        assert cell_objective(a, s.alpha + pert, Q1, s.mesh) >= s.value - 1e-12

    def test_gauge_fixes_in_plane_rotation(self):
        s = solve_cell([1.0, 0.3, 0.0], Q1, 8)
        x = s.mesh.nodes()
        assert abs(np.sum(x[..., 0] * s.alpha[..., 2] - x[..., 1] * s.alpha[..., 1])) < 1e-12

    @given(a=vecs)
    def test_zero_mean(self, a):
        s = solve_cell(a, Q1, 6)
        w = np.full(7, 1.0 / 6)
        w[[0, -1]] = 1.0 / 12  # exact integrals of the bilinear hat functions
        means = np.einsum("i,j,ijk->k", w, w, s.alpha)
        assert np.max(np.abs(means)) < 1e-10

    def test_residual_small(self):
        assert solve_cell([1.0, 0.0, 0.0], Q1, 8).residual < 1e-10


class TestQ2Matrix:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            Q2Matrix(np.eye(2))
        with pytest.raises(InvalidInputError):
            Q2Matrix(np.array([[1.0, 0.1, 0], [0, 1, 0], [0, 0, 1]]))
        with pytest.raises(InvalidInputError):
            Q2Matrix(np.diag([1.0, 0.0, 1.0]))

    def test_diagonal(self):
        B = Q2Matrix.diagonal(1.0, 2.0, 3.0)
        assert B([1.0, 1.0, 1.0]) == pytest.approx(6.0)


class TestRichardson:
    def test_exact_for_quadratic_error(self):
        f = lambda n: 2.0 + 5.0 / n**2
        assert richardson(f(8), f(16)) == pytest.approx(2.0, rel=1e-14)
