import numpy as np
import pytest

from voidrod.cell_problem import assemble_q2_matrix, cell_basis
from voidrod.errors import DependencyError, InvalidInputError, PreconditionError
from voidrod.material import ElasticDensity
from voidrod.recovery import (
    STUDY_COLUMNS,
    build_recovery_deformation,
    build_recovery_pair,
    build_recovery_void,
    convergence_study,
    recovery_proxies,
)
from voidrod.rod1d import arc_config, eval_E0, helix_config, straight_config
from voidrod.rod3d import RodDomain, Slab, VoidSet, eval_Eh, eval_elastic, kappa_schedule

SVK = ElasticDensity("StVenantKirchhoff", 1.0, 1.0)
Q = SVK.quad_form


@pytest.fixture(scope="module")
def basis4():
    return cell_basis(Q, 4)


class TestRecoveryVoid:
    def test_slabs(self):
        cfg = straight_config(1.0, breakpoints=[0.75], voids=[(0.25, 0.5)])
        void = build_recovery_void(cfg, 1 / 16)
        assert void.primitives == [Slab(0.25, 0.5), Slab(0.75 - 1 / 16, 0.75 + 1 / 16)]

    def test_breakpoint_on_void_end_not_widened(self):
        cfg = straight_config(1.0, breakpoints=[0.5], voids=[(0.25, 0.5)])
        assert build_recovery_void(cfg, 1 / 16).primitives == [Slab(0.25, 0.5)]

    def test_too_coarse(self):
        with pytest.raises(PreconditionError):
            build_recovery_void(straight_config(1.0, breakpoints=[0.1]), 1 / 8)
        with pytest.raises(PreconditionError):
            build_recovery_void(straight_config(1.0, breakpoints=[0.55], voids=[(0.3, 0.5)]), 1 / 8)


class TestRecoveryDeformation:
    def test_needs_basis(self):
        cfg = arc_config(1.0, 1.0)
        dom = RodDomain.from_policy(1.0, 1 / 8, 4)
        with pytest.raises(DependencyError):
            build_recovery_deformation(cfg, None, 1 / 8, dom)

    def test_mesh_compatibility(self):
        cfg = arc_config(1.0, 1.0)
        dom = RodDomain.from_policy(1.0, 1 / 8, 4)
        with pytest.raises(InvalidInputError):
            build_recovery_deformation(cfg, cell_basis(Q, 3), 1 / 8, dom)

    def test_coarse_sampling_rejected(self, basis4):
        cfg = arc_config(1.0, 1.0, n_samples=4)
        with pytest.raises(PreconditionError):
            build_recovery_pair(cfg, 1 / 8, basis4, 4)

    def test_sup_bound(self, basis4):
        cfg = straight_config(1.0, M=1.0)
        with pytest.raises(PreconditionError):
            build_recovery_pair(cfg, 1 / 8, basis4, 4)

    def test_straight_is_identity(self, basis4):
        pair = build_recovery_pair(straight_config(1.0, voids=[(0.3, 0.6)]), 1 / 16, basis4, 4)
        assert eval_elastic(pair.defo, pair.void, SVK) < 1e-20
        rep = eval_Eh(pair.defo, pair.void, SVK, None, kappa_schedule(1 / 16))
        assert rep.total == pytest.approx(2.0, abs=1e-12)

    def test_corrector_lowers_energy(self, basis4):
        cfg = arc_config(1.0, 1.0)
        with_c = build_recovery_pair(cfg, 1 / 16, basis4, 4, corrector=True)
        without = build_recovery_pair(cfg, 1 / 16, None, 4, corrector=False)
        assert eval_elastic(with_c.defo, with_c.void, SVK) < eval_elastic(without.defo, without.void, SVK)

    def test_proxies_shrink_linearly(self, basis4):
        cfg = helix_config(1.0, 0.7, 1.0)
        devs = [recovery_proxies(build_recovery_pair(cfg, h, basis4, 4)) for h in (1 / 8, 1 / 16, 1 / 32)]
        for (d0, g0), (d1, g1) in zip(devs[:-1], devs[1:]):
            assert d1 / d0 == pytest.approx(0.5, rel=0.05)
            assert g1 / g0 == pytest.approx(0.25, rel=0.1)


class TestConvergenceStudy:
    def test_columns_and_monotone_gap(self, basis4):
        rows = convergence_study(arc_config(1.0, 1.0), SVK, [1 / 8, 1 / 16, 1 / 32], n2=4,
                                 basis=basis4, B=assemble_q2_matrix(Q, 32))
        assert tuple(rows[0]) == STUDY_COLUMNS
        gaps = [r["gap"] for r in rows]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[-1] < 0.05

    def test_frozen_arc_values(self):
        # frozen from the default grid policy (n2 = 8, E0 with the n = 64 cell matrix)
        rows = convergence_study(arc_config(1.0, 1.0), SVK, [1 / 8, 1 / 16])
        assert rows[0]["gap"] == pytest.approx(0.008159753189, rel=1e-6)
        assert rows[1]["elastic"] == pytest.approx(0.104990151074, rel=1e-8)
        assert rows[0]["E0"] == pytest.approx(0.5 * assemble_q2_matrix(Q, 64).B[2, 2], rel=1e-12)

    def test_discontinuous_fixture_exact(self, basis4):
        cfg = straight_config(1.0, breakpoints=[0.75], voids=[(0.25, 0.5)])
        rows = convergence_study(cfg, SVK, [1 / 8, 1 / 16], n2=4, basis=basis4)
        assert [r["total"] for r in rows] == pytest.approx([4.0, 4.0], abs=1e-12)
        assert eval_E0(cfg, assemble_q2_matrix(Q, 8)).total == 4.0

    def test_rejects_unsorted(self):
        with pytest.raises(InvalidInputError):
            convergence_study(straight_config(), SVK, [1 / 16, 1 / 8], n2=2)
