"""Recovery pairs built from a limit configuration, and the h-sweep study.

The void is the limit void set plus a slab of width ``2h`` around every
breakpoint. Outside the void the deformation is the bending-rod ansatz

    y_h(x) = y(x1) + h x2 d2(x1) + h x3 d3(x1) + h^2 R(x1) alpha_{A(x1)}(x2, x3)

where ``alpha_A`` is the cell minimizer for ``A = R^T R'``. The corrector is
rotated with the frame so that the rescaled gradient reads
``R (Id + h G_A) + O(h^2)`` with ``G_A`` the cell-problem strain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell_problem import DEFAULT_CELL_N, CellBasis, Q2Matrix, assemble_q2_matrix, cell_basis
from .errors import DependencyError, InvalidInputError, PreconditionError
from .material import ElasticDensity
from .rod1d import COINCIDENCE_TOL, LimitConfig, eval_E0
from .rod3d import (
    DEFAULT_KAPPA_EXPONENT,
    Deformation3,
    RodDomain,
    Slab,
    VoidSet,
    eval_Eh,
    kappa_schedule,
)

__all__ = [
    "RecoveryPair",
    "build_recovery_void",
    "build_recovery_deformation",
    "build_recovery_pair",
    "convergence_study",
    "recovery_proxies",
    "STUDY_COLUMNS",
]

STUDY_COLUMNS = ("h", "elastic", "perimeter", "curvature", "total", "E0", "gap")


@dataclass
class RecoveryPair:
    h: float
    void: VoidSet
    defo: Deformation3
    source: LimitConfig
    basis: CellBasis | None


def build_recovery_void(cfg: LimitConfig, h: float) -> VoidSet:
    """Slabs over the void intervals and width-``2h`` slabs at the breakpoints."""
    slabs = [Slab(a, b) for a, b in cfg.voids]
    widened = [(t - h, t + h) for t in cfg.collapsed_breakpoints()]
    for a, b in widened:
        if a <= 0.0 or b >= cfg.L:
            raise PreconditionError(f"h = {h} too large: slab ({a}, {b}) leaves (0, L)")
    blocks = sorted(widened + [(a, b) for a, b in cfg.voids])
    for (a0, b0), (a1, b1) in zip(blocks[:-1], blocks[1:]):
        if a1 <= b0:
            raise PreconditionError(f"h = {h} too large: widened breakpoints overlap other voids")
    slabs += [Slab(a, b) for a, b in widened]
    slabs.sort(key=lambda s: s.x_lo)
    return VoidSet(slabs)


def _column_segments(cfg: LimitConfig, dom: RodDomain, col_void: np.ndarray) -> np.ndarray:
    """Segment index per element column along x1, or -1 for void columns."""
    cx = dom.center_axes()[0]
    out = np.full(dom.n1, -1, dtype=int)
    for k, seg in enumerate(cfg.segments):
        m = (cx >= seg.start - COINCIDENCE_TOL) & (cx <= seg.end + COINCIDENCE_TOL) & ~col_void
        out[m] = k
    if np.any((out < 0) & ~col_void):
        raise PreconditionError("material element outside every segment of the limit configuration")
    return out


def _node_segments(col_seg: np.ndarray) -> np.ndarray:
    n1 = len(col_seg)
    left = np.concatenate([[-1], col_seg])
    right = np.concatenate([col_seg, [-1]])
    node = np.where(right >= 0, right, left)
    both = (left >= 0) & (right >= 0) & (left != right)
    if np.any(both):
        raise PreconditionError("two segments meet without a void element between them")
    assert len(node) == n1 + 1
    return node


def _smoothed_curvature(seg, s):
    """Piecewise-linear interpolation of the sample-interval curvatures."""
    A = seg.curvature()
    mids = seg.start + (np.arange(len(A)) + 0.5) * seg.ds
    return np.stack([np.interp(s, mids, A[:, k]) for k in range(3)], axis=-1)


def build_recovery_deformation(cfg: LimitConfig, basis: CellBasis | None, h: float,
                               dom: RodDomain, corrector: bool = True,
                               void: VoidSet | None = None) -> Deformation3:
    """Nodal recovery deformation on ``dom``.

    The cell minimizers must live on a cross-section mesh whose subdivision
    count is a multiple of ``dom.n2`` (coincident nodes are sampled). Nodes
    whose adjacent elements are all void are set to ``T_h(id)``.
    """
    if corrector and basis is None:
        raise DependencyError("cell minimizers are required for the h^2 corrector")
    if abs(dom.h - h) > 1e-15:
        raise InvalidInputError("grid was built for a different h")
    if cfg.sup_norm() >= cfg.M:
        raise PreconditionError("the recovery construction needs |y| < M strictly")
    for seg in cfg.segments:
        if seg.ds > h * (1 + 1e-12):
            raise PreconditionError(f"frame sampling ds = {seg.ds} is coarser than h = {h}")
    if void is None:
        void = build_recovery_void(cfg, h)
    mask = void.element_mask(dom)
    col_void = mask.all(axis=(1, 2))
    if np.any(mask.any(axis=(1, 2)) & ~col_void):
        raise InvalidInputError("recovery voids must be full cross-section slabs")
    node_seg = _node_segments(_column_segments(cfg, dom, col_void))

    x1, x2, x3 = dom.node_axes()
    alpha = None
    if corrector:
        step, rem = divmod(basis.mesh.n, dom.n2)
        if rem:
            raise InvalidInputError(
                f"cell mesh n = {basis.mesh.n} is not a multiple of the grid n2 = {dom.n2}"
            )
        alphas = basis.alphas[:, ::step, ::step, :]  # (3, n2+1, n3+1, 3)

    y = Deformation3.identity(dom).y.copy()
    for k, seg in enumerate(cfg.segments):
        idx = np.nonzero(node_seg == k)[0]
        if not len(idx):
            continue
        s = x1[idx]
        R = seg.frame_at(s)
        mid = seg.position_at(s)
        d2, d3 = R[:, :, 1], R[:, :, 2]
        block = (mid[:, None, None, :]
                 + h * x2[None, :, None, None] * d2[:, None, None, :]
                 + h * x3[None, None, :, None] * d3[:, None, None, :])
        if corrector:
            A = _smoothed_curvature(seg, s)
            alpha = np.tensordot(A, alphas, axes=(1, 0))  # (m, n2+1, n3+1, 3)
            block = block + h**2 * np.einsum("mij,mabj->mabi", R, alpha)
        y[idx] = block
    defo = Deformation3(dom, y)
    vn = defo.void_nodes(mask)
    ident = Deformation3.identity(dom).y
    defo.y[vn] = ident[vn]
    return defo


def build_recovery_pair(cfg: LimitConfig, h: float, basis: CellBasis | None, n2: int = 8,
                        corrector: bool = True) -> RecoveryPair:
    dom = RodDomain.from_policy(cfg.L, h, n2)
    void = build_recovery_void(cfg, h)
    defo = build_recovery_deformation(cfg, basis, h, dom, corrector, void)
    return RecoveryPair(h, void, defo, cfg, basis)


def recovery_proxies(pair: RecoveryPair) -> tuple[float, float]:
    """Max deviation from ``y(x1)`` and mean-square deviation of the gradient from ``R(x1)``.

    Both are taken over material nodes / elements of the recovery pair.
    """
    dom = pair.defo.dom
    mask = pair.void.element_mask(dom)
    vn = pair.defo.void_nodes(mask)
    x1 = dom.node_axes()[0]
    cfg = pair.source
    ybar = np.zeros((dom.n1 + 1, 3))
    for seg in cfg.segments:
        m = (x1 >= seg.start - pair.h) & (x1 <= seg.end + pair.h)
        ybar[m] = seg.position_at(x1[m])
    dev = np.linalg.norm(pair.defo.y - ybar[:, None, None, :], axis=-1)
    max_dev = float(np.max(dev[~vn]))
    F = pair.defo.gradients()
    cx = dom.center_axes()[0]
    Rbar = np.tile(np.eye(3), (dom.n1, 1, 1))
    for seg in cfg.segments:
        m = (cx > seg.start) & (cx < seg.end)
        Rbar[m] = seg.frame_at(cx[m])
    diff = np.sum((F - Rbar[:, None, None, None]) ** 2, axis=(-1, -2)).mean(axis=-1)
    mat = ~mask
    ms = float(np.sum(diff[mat]) * dom.element_volume)
    return max_dev, ms


def convergence_study(cfg: LimitConfig, density: ElasticDensity, h_list, n2: int = 8,
                      kappa_exponent: float = DEFAULT_KAPPA_EXPONENT, B: Q2Matrix | None = None,
                      basis: CellBasis | None = None, corrector: bool = True,
                      cell_n: int = DEFAULT_CELL_N) -> list[dict]:
    """Rows ``(h, elastic, perimeter, curvature, total, E0, gap)`` along ``h_list``.

    ``E0`` uses ``B`` (default: the cell problem on an ``cell_n`` mesh); the
    3D corrector uses minimizers on a mesh matching the grid cross-section.
    """
    hs = [float(h) for h in h_list]
    if any(b >= a for a, b in zip(hs[:-1], hs[1:])):
        raise InvalidInputError("h list must be strictly decreasing")
    q = density.quad_form
    if B is None:
        B = assemble_q2_matrix(q, cell_n)
    if basis is None and corrector:
        basis = cell_basis(q, n2)
    E0 = eval_E0(cfg, B).total
    rows = []
    for h in hs:
        pair = build_recovery_pair(cfg, h, basis, n2, corrector)
        rep = eval_Eh(pair.defo, pair.void, density, pair.defo.dom, kappa_schedule(h, kappa_exponent))
        gap = abs(rep.total - E0) / E0 if E0 > 0 else abs(rep.total - E0)
        rows.append(dict(h=h, elastic=rep.elastic, perimeter=rep.perimeter,
                         curvature=rep.curvature, total=rep.total, E0=E0, gap=gap))
    return rows
