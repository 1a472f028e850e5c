import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from voidrod import _kernels_py, kernels
from voidrod.errors import InvalidInputError, PreconditionError
from voidrod.isoperimetry import (
    VoxelSet,
    check_relative_isoperimetric,
    default_T0,
    dominant_component_check,
    exhaustive_isoperimetric,
    interior_faces,
    one_dimensional_exhaustive,
    random_blob,
    random_dominant_suite,
)

grids2 = arrays(bool, (8, 2), elements=st.booleans())
grids3 = arrays(bool, (6, 2, 2), elements=st.booleans())


def brute_force(dims):
    """Independent enumeration through VoxelSet and the single-set check."""
    n = int(np.prod(dims))
    best, n_pre = 0.0, 0
    for bits in itertools.product([False, True], repeat=n):
        P = VoxelSet(np.array(bits).reshape(dims))
        r = check_relative_isoperimetric(P)
        if r.satisfies_precondition:
            n_pre += 1
            if r.rhs_per > 0:
                best = max(best, r.ratio)
    return best, n_pre


class TestVoxelSet:
    def test_geometry(self):
        P = VoxelSet(np.zeros((10, 2), bool), 0.5)
        assert P.sigma == 1.0 and P.half_length == 2.5 and P.total_volume() == 5.0

    def test_long_axis_first(self):
        assert VoxelSet(np.zeros((2, 10), bool)).dims == (10, 2)
        with pytest.raises(InvalidInputError):
            VoxelSet(np.zeros((8, 2, 3), bool))

    def test_face_count(self):
        c = np.zeros((6, 2), bool)
        c[:3] = True
        assert VoxelSet(c).face_count() == 2
        c[0, 0] = False
        assert VoxelSet(c).face_count() == 4

    @given(c=grids3)
    def test_complement_same_perimeter(self, c):
        P = VoxelSet(c)
        assert P.face_count() == P.complement().face_count()

    @given(c=grids2, k=st.integers(1, 3))
    def test_ratio_invariant_under_refinement(self, c, k):
        P = VoxelSet(c, 0.5)
        r0 = check_relative_isoperimetric(P)
        r1 = check_relative_isoperimetric(P.refined(k))
        assert r1.lhs == pytest.approx(r0.lhs)
        assert r1.rhs_per == pytest.approx(r0.rhs_per)
        assert r0.satisfies_precondition == r1.satisfies_precondition

    def test_interior_faces(self):
        u, v = interior_faces((3, 2))
        assert len(u) == 2 * 2 + 3 * 1

    def test_short_cuboid(self):
        with pytest.raises(PreconditionError):
            check_relative_isoperimetric(VoxelSet(np.zeros((2, 2), bool)))


class TestExhaustive:
    @pytest.mark.parametrize("dims", [(4, 2), (6, 2), (5, 2), (4, 2, 2)])
    def test_matches_brute_force(self, dims):
        res = exhaustive_isoperimetric(dims)
        best, n_pre = brute_force(dims)
        assert res.C_hat == pytest.approx(best)
        assert res.n_precondition == n_pre

    def test_strip_is_vacuous(self):
        # with two cross-section cells no nonempty proper subset has fewer than 2 cut faces
        res = exhaustive_isoperimetric((10, 2), C_check=0.0)
        assert res.n_subsets == 2**20
        assert res.n_precondition == 2 and res.n_nontrivial == 0
        assert res.C_hat == 0.0 and res.n_violations == 0

    @pytest.mark.parametrize("dims", [(6, 3), (8, 3), (6, 2, 2)])
    def test_frozen_constants(self, dims):
        # maximizer: one corner cell cut off by d - 1 faces
        res = exhaustive_isoperimetric(dims, C_check=1 / 6)
        assert res.C_hat == pytest.approx(1 / 6, rel=1e-14)
        assert res.n_violations == 0
        arg = res.argmax_set()
        assert min(arg.count(), arg.complement().count()) == 1

    def test_backends_agree(self):
        fu, fv = interior_faces((5, 3))
        p0, v0 = _kernels_py.subset_perimeters(fu, fv, 1000, 5000)
        p1, v1 = kernels.subset_perimeters(fu, fv, 1000, 5000)
        assert np.array_equal(p0, p1) and np.array_equal(v0, v1)
        a = exhaustive_isoperimetric((6, 2), impl=_kernels_py)
        b = exhaustive_isoperimetric((6, 2))
        assert (a.C_hat, a.n_precondition) == (b.C_hat, b.n_precondition)
        assert a.backend == "python"

    def test_cap(self):
        with pytest.raises(InvalidInputError):
            exhaustive_isoperimetric((13, 2))
        with pytest.raises(PreconditionError):
            exhaustive_isoperimetric((3, 3))

    def test_one_dimensional(self):
        assert one_dimensional_exhaustive(12)


class TestDominant:
    def test_default_T0(self):
        assert default_T0(1 / 6) == 1 and default_T0(2.5) == 3

    def test_corner_blob(self):
        c = np.zeros((32, 4, 4), bool)
        c[10, 0, 0] = True
        r = dominant_component_check(VoxelSet(c), 1, 1 / 6)
        assert r.precondition_met and r.holds
        assert r.complement_volume == 1.0 and r.perimeter == 4.0

    def test_threshold_two_cut_through(self):
        # a full slab separates the rod: its boundary is 2 sigma^2, above both caps
        c = np.zeros((32, 4, 4), bool)
        c[10] = True
        assert not dominant_component_check(VoxelSet(c), 2, 1 / 6).precondition_met

    def test_threshold_two_band(self):
        c = np.zeros((32, 4, 4), bool)
        c[10, :2, :] = True
        r = dominant_component_check(VoxelSet(c), 2, 1 / 6)
        assert r.precondition_met and r.holds

    def test_short_rejected(self):
        r = dominant_component_check(VoxelSet(np.zeros((4, 4), bool)), 1, 2.5)
        assert not r.precondition_met and "T0" in r.reason

    def test_blob_reproducible(self):
        a = random_blob((16, 3, 3), np.random.default_rng(1), 2, 6)
        b = random_blob((16, 3, 3), np.random.default_rng(1), 2, 6)
        assert np.array_equal(a, b) and 1 <= a.sum() <= 12

    @pytest.mark.parametrize("threshold", [1, 2])
    def test_random_suite(self, threshold):
        res = random_dominant_suite((32, 4, 4), 400, seed=5, threshold=threshold)
        assert res.checked > 0 and res.checked + res.skipped == 400
        assert res.violations == [] and res.max_ratio <= 1 / 6
        again = random_dominant_suite((32, 4, 4), 400, seed=5, threshold=threshold)
        assert (again.checked, again.max_ratio) == (res.checked, res.max_ratio)


class TestFullRandomSuite:
    @pytest.mark.parametrize("threshold", [1, 2])
    def test_ten_thousand_samples(self, threshold):
        C_hat = exhaustive_isoperimetric((6, 2, 2)).C_hat
        res = random_dominant_suite((64, 4, 4), 10_000, seed=0, C_hat=C_hat, threshold=threshold)
        assert res.violations == []
        assert res.checked > 1000
        assert res.C_reestimated == C_hat
