import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from voidrod.errors import InvalidConfigError, InvalidInputError, PreconditionError, UnsupportedOperationError
from voidrod.material import ElasticDensity, MaterialKind, eval_W, expm_so3
from voidrod.rod3d import (
    RHO0,
    Ball,
    Box,
    Deformation3,
    RodDomain,
    Slab,
    VoidSet,
    classify_cuboids,
    default_alpha,
    eval_elastic,
    eval_Eh,
    eval_surface,
    example_ball_voids,
    icosphere,
    kappa_schedule,
    mesh_area_and_willmore,
    partition_cuboids,
    rigidity_probe,
    voxel_perimeter,
)

SVK = ElasticDensity(MaterialKind.StVenantKirchhoff, 1.0, 1.0)
NH = ElasticDensity(MaterialKind.CompressibleNeoHookeanRegularized, 1.0, 1.0)
vecs = arrays(np.float64, (3,), elements=st.floats(-1.0, 1.0, allow_nan=False))


@pytest.fixture
def dom():
    return RodDomain.from_policy(1.0, 1 / 8, 4)


def _wavy(dom, amp=0.05, seed=0):
    rng = np.random.default_rng(seed)
    y = Deformation3.identity(dom).y
    return Deformation3(dom, y + amp * dom.h * rng.standard_normal(y.shape))


class TestDomain:
    def test_policy(self):
        d = RodDomain.from_policy(1.0, 1 / 16, 8)
        assert d.shape == (128, 8, 8)
        assert np.allclose(d.to_physical(d.spacing), [1 / 128] * 3)

    def test_rejects(self):
        with pytest.raises(InvalidInputError):
            RodDomain(1.0, 1.5, 4, 4)
        with pytest.raises(InvalidInputError):
            RodDomain(-1.0, 0.1, 4, 4)

    def test_kappa_schedule(self):
        assert kappa_schedule(0.5, 2.0) == 0.25


class TestElastic:
    @pytest.mark.parametrize("density", [SVK, NH])
    def test_rigid_motion_zero(self, dom, density, rng):
        Q = expm_so3(rng.standard_normal(3))
        defo = Deformation3.rigid(dom, Q, [1.0, 2.0, 3.0])
        assert abs(eval_elastic(defo, VoidSet(), density)) < 1e-11

    @pytest.mark.parametrize("density", [SVK, NH])
    def test_affine_closed_form(self, dom, density):
        # y = A x in physical coordinates has rescaled gradient A
        A = np.array([[1.05, 0.02, 0.0], [0.01, 0.97, 0.03], [0.0, -0.02, 1.1]])
        defo = Deformation3(dom, Deformation3.identity(dom).y @ A.T)
        assert np.allclose(defo.gradients(), A, atol=1e-13)
        expected = dom.L * eval_W(density, A) / dom.h**2
        assert eval_elastic(defo, VoidSet(), density) == pytest.approx(expected, rel=1e-12)

    def test_void_elements_excluded(self, dom):
        A = np.diag([1.1, 1.0, 1.0])
        defo = Deformation3(dom, Deformation3.identity(dom).y @ A.T)
        full = eval_elastic(defo, VoidSet(), SVK)
        half = eval_elastic(defo, VoidSet([Slab(0.25, 0.75)]), SVK)
        assert half == pytest.approx(0.5 * full, rel=1e-12)

    @given(w=vecs, c=vecs)
    def test_frame_indifference(self, w, c):
        dom = RodDomain.from_policy(0.5, 1 / 4, 2)
        Q = expm_so3(3.0 * w)
        defo = _wavy(dom, 0.3)
        moved = Deformation3(dom, defo.y @ Q.T + 5.0 * c)
        void = VoidSet([Slab(0.2, 0.3)])
        for density in (SVK, NH):
            e0 = eval_elastic(defo, void, density)
            assert abs(eval_elastic(moved, void, density) - e0) <= 1e-12 * max(1.0, e0)

    def test_shape_checks(self, dom):
        with pytest.raises(InvalidInputError):
            Deformation3(dom, np.zeros((2, 2, 2, 3)))
        other = RodDomain.from_policy(1.0, 1 / 8, 2)
        with pytest.raises(InvalidInputError):
            eval_elastic(Deformation3.identity(dom), VoidSet(), SVK, other)


class TestSurface:
    @pytest.mark.parametrize("h", [1 / 8, 1 / 16, 1 / 32, 1 / 64])
    def test_slabs_integer(self, h):
        dom = RodDomain.from_policy(1.0, h, 2)
        void = VoidSet([Slab(0.2, 0.3), Slab(0.5, 0.6), Slab(0.0, 0.1)])
        per, curv = eval_surface(void, dom, kappa_schedule(h))
        assert per == 5.0 and curv == 0.0

    def test_full_section_box_is_slab(self, dom):
        box = Box((0.2, -1.0, -1.0), (0.4, 1.0, 1.0))
        assert eval_surface(VoidSet([box]), dom, 0.01) == (2.0, 0.0)

    def test_partial_box_area(self, dom):
        h = dom.h
        box = Box((0.2, -h / 4, -h / 4), (0.4, h / 4, h / 4))
        area = 2 * (h / 2) ** 2 + 4 * 0.2 * (h / 2)
        per, curv = eval_surface(VoidSet([box]), dom, 0.0)
        assert per == pytest.approx(area / h**2, rel=1e-14)
        with pytest.raises(UnsupportedOperationError):
            eval_surface(VoidSet([box]), dom, 0.1)

    @pytest.mark.parametrize("h", [1 / 8, 1 / 32])
    def test_ball_formula(self, h):
        dom = RodDomain.from_policy(1.0, h, 2)
        r = 0.3 * h
        kappa = kappa_schedule(h)
        per, curv = eval_surface(VoidSet([Ball((0.5, 0.0, 0.0), r)]), dom, kappa)
        assert per + curv == pytest.approx(4 * np.pi * (r**2 / h**2 + 2 * kappa / h**2), rel=1e-14)

    @pytest.mark.parametrize("h", [1 / 8, 1 / 64])
    def test_quarter_ball_with_default_schedule(self, h):
        dom = RodDomain.from_policy(1.0, h, 2)
        rep = eval_Eh(Deformation3.identity(dom), VoidSet([Ball((0.5, 0.0, 0.0), h / 4)]), SVK, dom,
                      kappa_schedule(h))
        assert rep.total == pytest.approx(4 * np.pi * (1 / 16 + 2 * h ** (1 / 25)), rel=1e-13)

    def test_ball_band_area_and_volume(self, dom):
        # Archimedes: the area of a spherical band equals 2 pi r times its width
        ball = Ball((0.5, 0.0, 0.0), 0.04)
        void = VoidSet([ball])
        a, b = 0.48, 0.53
        lo, hi = a - 0.5, b - 0.5
        assert void.boundary_area(dom, a, b) == pytest.approx(2 * np.pi * 0.04 * (b - a), rel=1e-12)
        vol = np.pi * (0.04**2 * (hi - lo) - (hi**3 - lo**3) / 3)
        assert void.volume(dom, a, b) == pytest.approx(vol, rel=1e-12)

    def test_ball_clipped_cross_section(self, dom):
        ball = Ball((0.5, 0.0, 0.0), 0.05)
        void = VoidSet([ball])
        s = 0.03
        # Monte Carlo oracle for the volume inside the square prism
        rng = np.random.default_rng(7)
        p = rng.uniform([-0.05, -s, -s], [0.05, s, s], size=(400_000, 3))
        mc = np.mean(np.sum(p**2, axis=1) < 0.05**2) * 0.1 * (2 * s) ** 2
        assert void.volume(dom, 0.0, 1.0, s) == pytest.approx(mc, rel=1e-2)

    def test_icosphere_validation(self):
        errs = []
        for level in (2, 3, 4):
            V, F = icosphere(level, 0.7, (1.0, 0.0, 0.0))
            area, will = mesh_area_and_willmore(V, F)
            errs.append(abs(will / (8 * np.pi) - 1))
            if level == 4:
                assert area == pytest.approx(4 * np.pi * 0.49, rel=1e-2)
        assert errs[-1] < 1e-2 and errs[0] > errs[1] > errs[2]

    def test_voxel_only(self, dom):
        void = VoidSet([Slab(0.25, 0.5)]).with_mask(dom)
        mask_only = VoidSet(voxel_mask=void.voxel_mask)
        assert eval_surface(mask_only, dom, 0.0) == (2.0, 0.0)
        assert voxel_perimeter(void.voxel_mask, dom) == pytest.approx(2 * dom.h**2)
        with pytest.raises(UnsupportedOperationError):
            eval_surface(mask_only, dom, 0.1)

    def test_example_balls_bounded(self):
        totals = []
        for h in (1 / 8, 1 / 16, 1 / 32, 1 / 64):
            dom = RodDomain.from_policy(1.0, h, 2)
            void = example_ball_voids(h)
            void.validate(dom)
            per, curv = eval_surface(void, dom, kappa_schedule(h))
            assert per == pytest.approx(4 * np.pi / 16, rel=1e-12)
            totals.append(per + curv)
        assert max(totals) < 4 * np.pi / 16 + 16 * np.pi

    def test_validation(self, dom):
        with pytest.raises(InvalidConfigError):
            VoidSet([Ball((0.5, 0.0, 0.0), dom.h)]).validate(dom)
        with pytest.raises(InvalidConfigError):
            VoidSet([Ball((0.5, 0, 0), 0.01), Ball((0.515, 0, 0), 0.01)]).validate(dom)
        with pytest.raises(InvalidConfigError):
            VoidSet([Slab(0.5, 1.5)]).validate(dom)
        with pytest.raises(InvalidInputError):
            VoidSet(voxel_mask=np.zeros((2, 2, 2), bool)).validate(dom)

    def test_eval_Eh_total(self, dom):
        rep = eval_Eh(Deformation3.identity(dom), VoidSet([Slab(0.4, 0.6)]), SVK, dom, 0.01)
        assert rep.total == pytest.approx(2.0, abs=1e-12)


class TestCuboids:
    def test_partition_counts(self):
        dom = RodDomain.from_policy(1.0, 1 / 100, 2)
        part = partition_cuboids(dom, 10)
        assert part.N == 11
        assert part.shrunk_volume_ratio() == pytest.approx(0.95, rel=1e-12)
        assert len(part.overlaps(6)) == 4
        with pytest.raises(PreconditionError):
            partition_cuboids(RodDomain.from_policy(1.0, 1 / 8, 2), 10)
        with pytest.raises(InvalidInputError):
            partition_cuboids(dom, 10, rho=2 * RHO0)

    def test_default_alpha(self):
        assert default_alpha(40, 1.0) == pytest.approx(4 ** (2 / 3))

    def test_empty_void_all_good(self):
        dom = RodDomain.from_policy(1.0, 1 / 32, 2)
        labels = classify_cuboids(partition_cuboids(dom, 4), VoidSet())
        assert [s.label for s in labels[1:-1]] == ["good"] * (len(labels) - 2)
        assert labels[0].label == labels[-1].label == "ugly"

    def test_slab_faces_counted(self):
        dom = RodDomain.from_policy(1.0, 1 / 32, 2)
        part = partition_cuboids(dom, 4)
        labels = classify_cuboids(part, VoidSet([Slab(0.5, 0.6)]), C_iso=1 / 6)
        touched = [s for s in labels if s.area > 0]
        for s in touched:
            lo, hi, _ = part.q3_shrunk(s.i)
            faces = sum(lo < x < hi for x in (0.5, 0.6))
            assert s.area == pytest.approx(faces * ((1 - RHO0) * dom.h) ** 2, rel=1e-12)
        assert all(s.label != "good" for s in touched)

    def test_probe_on_rigid_motion(self, rng):
        dom = RodDomain.from_policy(1.0, 1 / 16, 2)
        Q = expm_so3(rng.standard_normal(3))
        defo = Deformation3.rigid(dom, Q)
        res = rigidity_probe(defo, VoidSet(), partition_cuboids(dom, 4))
        for s in res.stats:
            if s.label != "ugly":
                assert np.allclose(s.R, Q, atol=1e-12)
                assert s.residual_full < 1e-24 and s.eps < 1e-24
            else:
                assert np.isnan(s.residual_sym)
        assert all(v < 1e-24 for v in res.adjacent.values())
        assert len(res.as_rows()[0]) == 7
