"""Rescaled 3D energy on hexahedral grids, void primitives and cuboid bookkeeping.

Coordinates: the rescaled domain is ``Omega = (0, L) x (-1/2, 1/2)^2`` and the
physical rod is its image under ``T_h = diag(1, h, h)``. Void primitives are
given in physical coordinates; deformations are nodal fields on the rescaled
grid with the rescaled gradient ``(d1 y, d2 y / h, d3 y / h)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import (
    DegenerateProjectionError,
    InvalidConfigError,
    InvalidInputError,
    PreconditionError,
    UnsupportedOperationError,
)
from .material import ElasticDensity, MaterialKind, dist_SO3, eval_W, project_SO3

__all__ = [
    "RodDomain",
    "Ball",
    "Slab",
    "Box",
    "VoidSet",
    "Deformation3",
    "EnergyReport3D",
    "CuboidPartition",
    "CuboidStats",
    "ProbeResult",
    "eval_elastic",
    "eval_surface",
    "eval_Eh",
    "partition_cuboids",
    "classify_cuboids",
    "rigidity_probe",
    "kappa_schedule",
    "example_ball_voids",
    "icosphere",
    "mesh_area_and_willmore",
    "voxel_perimeter",
    "default_alpha",
    "RHO0",
    "DEFAULT_KAPPA_EXPONENT",
]

RHO0 = 1.0 - (19.0 / 20.0) ** (1.0 / 3.0)
DEFAULT_KAPPA_EXPONENT = 51.0 / 25.0


def kappa_schedule(h: float, exponent: float = DEFAULT_KAPPA_EXPONENT) -> float:
    return float(h) ** exponent


@dataclass(frozen=True)
class RodDomain:
    """Uniform hexahedral grid on the rescaled domain."""

    L: float
    h: float
    n1: int
    n2: int

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidInputError("L must be positive")
        if not 0.0 < self.h < 1.0:
            raise InvalidInputError("h must lie in (0, 1)")
        if self.n1 < 1 or self.n2 < 1:
            raise InvalidInputError("grid needs at least one element per direction")

    @classmethod
    def from_policy(cls, L: float, h: float, n2: int = 8) -> "RodDomain":
        """Elements that are cubes in physical space: ``n1 = n2 L / h``."""
        return cls(L, h, max(1, int(round(n2 * L / h))), n2)

    @property
    def n3(self) -> int:
        return self.n2

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n2)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.L / self.n1, 1.0 / self.n2, 1.0 / self.n2)

    @property
    def scale(self) -> tuple[float, float, float]:
        return (1.0, 1.0 / self.h, 1.0 / self.h)

    @property
    def element_volume(self) -> float:
        d = self.spacing
        return d[0] * d[1] * d[2]

    def node_axes(self):
        return (
            np.linspace(0.0, self.L, self.n1 + 1),
            np.linspace(-0.5, 0.5, self.n2 + 1),
            np.linspace(-0.5, 0.5, self.n2 + 1),
        )

    def center_axes(self):
        return tuple(0.5 * (a[1:] + a[:-1]) for a in self.node_axes())

    def nodes(self) -> np.ndarray:
        """Rescaled node coordinates, shape (n1+1, n2+1, n3+1, 3)."""
        return np.stack(np.meshgrid(*self.node_axes(), indexing="ij"), axis=-1)

    def to_physical(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) * np.array([1.0, self.h, self.h])


# ---------------------------------------------------------------------------
# void primitives (physical coordinates)


@dataclass(frozen=True)
class Ball:
    center: tuple
    r: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.r > 0:
            raise InvalidConfigError("ball radius must be positive")

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.sum((p - np.array(self.center)) ** 2, axis=-1) < self.r**2

    def x_range(self):
        return self.center[0] - self.r, self.center[0] + self.r


@dataclass(frozen=True)
class Slab:
    """Full cross-section void ``(x_lo, x_hi) x (-h/2, h/2)^2``."""

    x_lo: float
    x_hi: float

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise InvalidConfigError("slab needs x_lo < x_hi")

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return (p[..., 0] > self.x_lo) & (p[..., 0] < self.x_hi)

    def x_range(self):
        return self.x_lo, self.x_hi


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in self.hi))
        if not all(a < b for a, b in zip(self.lo, self.hi)):
            raise InvalidConfigError("box needs lo < hi in every coordinate")

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.all((p > np.array(self.lo)) & (p < np.array(self.hi)), axis=-1)

    def x_range(self):
        return self.lo[0], self.hi[0]

    def clipped(self, h: float) -> "Box":
        half = 0.5 * h
        lo = (self.lo[0], max(self.lo[1], -half), max(self.lo[2], -half))
        hi = (self.hi[0], min(self.hi[1], half), min(self.hi[2], half))
        return Box(lo, hi)

    def is_full_section(self, h: float, tol: float = 1e-14) -> bool:
        half = 0.5 * h
        return (self.lo[1] <= -half + tol and self.lo[2] <= -half + tol
                and self.hi[1] >= half - tol and self.hi[2] >= half - tol)


def _interval_overlap(a0, a1, b0, b1) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def _merge_intervals(ivs):
    out: list[list[float]] = []
    for a, b in sorted(ivs):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [tuple(x) for x in out]


def _ball_box_volume(ball: Ball, lo, hi, n: int = 64) -> float:
    """Volume of ``ball`` intersected with the axis-aligned box ``[lo, hi]``.

    Exact when the box clips the ball in ``x`` only; otherwise Gauss-Legendre
    in (x, y) over the overlap rectangle with exact chord length in z.
    """
    c = np.array(ball.center)
    r = ball.r
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if np.all(c - r >= lo) and np.all(c + r <= hi):
        return 4.0 / 3.0 * np.pi * r**3
    blo = np.maximum(lo, c - r)
    bhi = np.minimum(hi, c + r)
    if np.any(bhi <= blo):
        return 0.0
    if np.all(c[1:] - r >= lo[1:]) and np.all(c[1:] + r <= hi[1:]):
        # clipped in x only: difference of two spherical caps
        u0, u1 = blo[0] - c[0], bhi[0] - c[0]
        return float(np.pi * (r**2 * (u1 - u0) - (u1**3 - u0**3) / 3.0))
    g, w = np.polynomial.legendre.leggauss(n)
    xs = 0.5 * (bhi[0] - blo[0]) * g + 0.5 * (bhi[0] + blo[0])
    ys = 0.5 * (bhi[1] - blo[1]) * g + 0.5 * (bhi[1] + blo[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    rho2 = r**2 - (X - c[0]) ** 2 - (Y - c[1]) ** 2
    half = np.sqrt(np.maximum(rho2, 0.0))
    z0 = np.maximum(c[2] - half, lo[2])
    z1 = np.minimum(c[2] + half, hi[2])
    chord = np.maximum(z1 - z0, 0.0)
    W = np.outer(w, w) * 0.25 * (bhi[0] - blo[0]) * (bhi[1] - blo[1])
    return float(np.sum(W * chord))


def _ball_box_area(ball: Ball, lo, hi, n: int = 96) -> float:
    """Area of the sphere ``dB`` inside the box, by quadrature in (cos theta, phi)."""
    c = np.array(ball.center)
    r = ball.r
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if np.all(c - r >= lo) and np.all(c + r <= hi):
        return 4.0 * np.pi * r**2
    if np.any(np.minimum(hi, c + r) <= np.maximum(lo, c - r)):
        return 0.0
    # axis e1 as polar axis: the sphere area is uniform in x = cos(theta)
    x0 = max(lo[0], c[0] - r)
    x1 = min(hi[0], c[0] + r)
    g, w = np.polynomial.legendre.leggauss(n)
    xs = 0.5 * (x1 - x0) * g + 0.5 * (x0 + x1)
    phi = (np.arange(4 * n) + 0.5) * (2 * np.pi / (4 * n))
    X, P = np.meshgrid(xs, phi, indexing="ij")
    s = np.sqrt(np.maximum(r**2 - (X - c[0]) ** 2, 0.0))
    Y = c[1] + s * np.cos(P)
    Z = c[2] + s * np.sin(P)
    inside = (Y >= lo[1]) & (Y <= hi[1]) & (Z >= lo[2]) & (Z <= hi[2])
    frac = inside.mean(axis=1)
    return float(2.0 * np.pi * r * 0.5 * (x1 - x0) * np.sum(w * frac))


@dataclass
class VoidSet:
    """Union of primitives, optionally with a per-element indicator.

    ``voxel_mask`` may also be supplied alone (voxel-only void); the
    curvature term is then undefined.
    """

    primitives: list = field(default_factory=list)
    voxel_mask: np.ndarray | None = None

    def __post_init__(self):
        self.primitives = list(self.primitives)
        if self.voxel_mask is not None:
            self.voxel_mask = np.asarray(self.voxel_mask, dtype=bool)

    @property
    def balls(self):
        return [p for p in self.primitives if isinstance(p, Ball)]

    @property
    def is_voxel_only(self) -> bool:
        return not self.primitives and self.voxel_mask is not None

    def __eq__(self, other):
        if not isinstance(other, VoidSet):
            return NotImplemented
        if self.primitives != other.primitives:
            return False
        if (self.voxel_mask is None) != (other.voxel_mask is None):
            return False
        return self.voxel_mask is None or np.array_equal(self.voxel_mask, other.voxel_mask)

    def validate(self, dom: RodDomain) -> None:
        h, L = dom.h, dom.L
        half = 0.5 * h
        for p in self.primitives:
            a, b = p.x_range()
            if a < 0.0 or b > L:
                raise InvalidConfigError(f"{p} leaves [0, L]")
            if isinstance(p, Ball):
                c = np.array(p.center)
                if not (c[0] - p.r > 0 and c[0] + p.r < L and abs(c[1]) + p.r < half
                        and abs(c[2]) + p.r < half):
                    raise InvalidConfigError(f"{p} is not compactly contained in the rod")
            if isinstance(p, Box):
                if min(p.lo[1:]) < -half - 1e-14 or max(p.hi[1:]) > half + 1e-14:
                    raise InvalidConfigError(f"{p} leaves the cross-section")
        balls = self.balls
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                d = np.linalg.norm(np.subtract(balls[i].center, balls[j].center))
                if d <= balls[i].r + balls[j].r:
                    raise InvalidConfigError("balls must be pairwise disjoint")
        if self.voxel_mask is not None:
            if self.voxel_mask.shape != dom.shape:
                raise InvalidInputError("voxel mask does not match the grid")
            if self.primitives and not np.array_equal(self.voxel_mask, self.primitive_mask(dom)):
                raise InvalidConfigError("voxel mask is inconsistent with the primitives")

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1], dtype=bool)
        for prim in self.primitives:
            out |= prim.contains(p)
        return out

    def primitive_mask(self, dom: RodDomain) -> np.ndarray:
        """Center-sampling rule: an element is void iff its center is."""
        cx, cy, cz = dom.center_axes()
        out = np.zeros(dom.shape, dtype=bool)
        for prim in self.primitives:
            if isinstance(prim, Ball):
                X, Y, Z = np.meshgrid(cx, cy * dom.h, cz * dom.h, indexing="ij")
                c = prim.center
                out |= (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2 < prim.r**2
            else:
                if isinstance(prim, Slab):
                    lo = (prim.x_lo, -np.inf, -np.inf)
                    hi = (prim.x_hi, np.inf, np.inf)
                else:
                    lo, hi = prim.lo, prim.hi
                mx = (cx > lo[0]) & (cx < hi[0])
                my = (cy * dom.h > lo[1]) & (cy * dom.h < hi[1])
                mz = (cz * dom.h > lo[2]) & (cz * dom.h < hi[2])
                out |= mx[:, None, None] & my[None, :, None] & mz[None, None, :]
        return out

    def element_mask(self, dom: RodDomain) -> np.ndarray:
        if self.voxel_mask is not None:
            if self.voxel_mask.shape != dom.shape:
                raise InvalidInputError("voxel mask does not match the grid")
            return self.voxel_mask
        return self.primitive_mask(dom)

    def with_mask(self, dom: RodDomain) -> "VoidSet":
        return VoidSet(list(self.primitives), self.primitive_mask(dom))

    # per-region geometric queries --------------------------------------

    def _slab_like_intervals(self, h: float):
        ivs = []
        for p in self.primitives:
            if isinstance(p, Slab):
                ivs.append((p.x_lo, p.x_hi))
            elif isinstance(p, Box) and p.is_full_section(h):
                ivs.append((p.lo[0], p.hi[0]))
        return _merge_intervals(ivs)

    def _partial_boxes(self, h: float):
        return [p.clipped(h) for p in self.primitives if isinstance(p, Box) and not p.is_full_section(h)]

    def boundary_area(self, dom: RodDomain, x_lo: float = None, x_hi: float = None,
                      section_half: float = None) -> float:
        """Physical area of ``dE`` inside ``(x_lo, x_hi) x (-s, s)^2``.

        Defaults to the whole rod; faces on the lateral boundary or on the
        end caps of the rod are not part of ``dE inside Omega_h``.
        """
        if self.is_voxel_only:
            raise UnsupportedOperationError("area queries need primitives")
        L, h = dom.L, dom.h
        x_lo = 0.0 if x_lo is None else x_lo
        x_hi = L if x_hi is None else x_hi
        s = 0.5 * h if section_half is None else section_half
        area = 0.0
        for a, b in self._slab_like_intervals(h):
            for x in (a, b):
                if 0.0 < x < L and x_lo < x < x_hi:
                    area += (2.0 * s) ** 2
        half = 0.5 * h
        for bx in self._partial_boxes(h):
            area += _box_area(bx, L, half, (x_lo, -s, -s), (x_hi, s, s))
        for ball in self.balls:
            area += _ball_box_area(ball, (x_lo, -s, -s), (x_hi, s, s))
        return area

    def volume(self, dom: RodDomain, x_lo: float = None, x_hi: float = None,
               section_half: float = None) -> float:
        """Physical void volume inside the region; primitives assumed disjoint."""
        if self.is_voxel_only:
            raise UnsupportedOperationError("volume queries need primitives")
        L, h = dom.L, dom.h
        x_lo = 0.0 if x_lo is None else x_lo
        x_hi = L if x_hi is None else x_hi
        s = 0.5 * h if section_half is None else section_half
        vol = 0.0
        for a, b in self._slab_like_intervals(h):
            vol += _interval_overlap(a, b, x_lo, x_hi) * (2.0 * s) ** 2
        for bx in self._partial_boxes(h):
            lo = np.maximum(bx.lo, (x_lo, -s, -s))
            hi = np.minimum(bx.hi, (x_hi, s, s))
            vol += float(np.prod(np.maximum(hi - lo, 0.0)))
        for ball in self.balls:
            vol += _ball_box_volume(ball, (x_lo, -s, -s), (x_hi, s, s))
        return vol

    def willmore(self, h: float) -> float:
        """``int |A|^2`` over the primitive boundaries (flat faces contribute 0)."""
        if self.is_voxel_only:
            raise UnsupportedOperationError("curvature is undefined for voxel-only voids")
        if self._partial_boxes(h):
            raise UnsupportedOperationError(
                "curvature of boxes is only defined for full cross-section boxes"
            )
        return 8.0 * np.pi * len(self.balls)


def _box_area(bx: Box, L, half, lo, hi) -> float:
    """Area of the faces of ``bx`` inside the open rod and the region ``[lo, hi]``."""
    area = 0.0
    for axis in range(3):
        others = [k for k in range(3) if k != axis]
        extent = 1.0
        for k in others:
            extent *= _interval_overlap(bx.lo[k], bx.hi[k], lo[k], hi[k])
        if extent == 0.0:
            continue
        for x in (bx.lo[axis], bx.hi[axis]):
            bound = (0.0, L) if axis == 0 else (-half, half)
            if bound[0] < x < bound[1] and lo[axis] < x < hi[axis]:
                area += extent
    return area


def voxel_perimeter(mask: np.ndarray, dom: RodDomain) -> float:
    """Physical area of interior faces between void and material elements."""
    d = dom.to_physical(dom.spacing)
    m = mask.astype(np.int8)
    a1 = np.count_nonzero(np.diff(m, axis=0)) * d[1] * d[2]
    a2 = np.count_nonzero(np.diff(m, axis=1)) * d[0] * d[2]
    a3 = np.count_nonzero(np.diff(m, axis=2)) * d[0] * d[1]
    return float(a1 + a2 + a3)


# ---------------------------------------------------------------------------
# deformations


@dataclass
class Deformation3:
    """Nodal values ``y`` of shape (n1+1, n2+1, n3+1, 3) on ``dom``'s grid."""

    dom: RodDomain
    y: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        n1, n2, n3 = self.dom.shape
        if self.y.shape != (n1 + 1, n2 + 1, n3 + 1, 3):
            raise InvalidInputError(f"nodal field has shape {self.y.shape}, grid needs {(n1 + 1, n2 + 1, n3 + 1, 3)}")

    def __eq__(self, other):
        if not isinstance(other, Deformation3):
            return NotImplemented
        return self.dom == other.dom and np.array_equal(self.y, other.y)

    @classmethod
    def identity(cls, dom: RodDomain) -> "Deformation3":
        """``T_h(id)``: the rescaled gradient is the identity."""
        return cls(dom, dom.to_physical(dom.nodes()))

    @classmethod
    def rigid(cls, dom: RodDomain, R, c=(0.0, 0.0, 0.0)) -> "Deformation3":
        ident = cls.identity(dom)
        return cls(dom, ident.y @ np.asarray(R, float).T + np.asarray(c, float))

    def gradients(self) -> np.ndarray:
        """Rescaled gradients at the Gauss points, shape (n1, n2, n3, 8, 3, 3)."""
        return kernels.hex_gauss_gradients(self.y, self.dom.spacing, self.dom.scale)

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.y, axis=-1)))

    def void_nodes(self, mask: np.ndarray) -> np.ndarray:
        """Nodes all of whose adjacent elements are void."""
        n1, n2, n3 = mask.shape
        pad = np.ones((n1 + 2, n2 + 2, n3 + 2), dtype=bool)
        pad[1:-1, 1:-1, 1:-1] = mask
        out = np.ones((n1 + 1, n2 + 1, n3 + 1), dtype=bool)
        for a in (0, 1):
            for b in (0, 1):
                for c in (0, 1):
                    out &= pad[a:a + n1 + 1, b:b + n2 + 1, c:c + n3 + 1]
        # domain-exterior padding counts as void, so an all-void neighbourhood is required
        return out


@dataclass(frozen=True)
class EnergyReport3D:
    elastic: float
    perimeter: float
    curvature: float

    @property
    def total(self) -> float:
        return self.elastic + self.perimeter + self.curvature


def _element_energies(defo: Deformation3, density: ElasticDensity) -> np.ndarray:
    dom = defo.dom
    if density.kind is MaterialKind.StVenantKirchhoff:
        return kernels.svk_hex_energy(defo.y, dom.spacing, dom.scale, density.lam, density.mu)
    F = defo.gradients()
    return dom.element_volume * eval_W(density, F).mean(axis=-1)


def eval_elastic(defo: Deformation3, void: VoidSet, density: ElasticDensity, dom: RodDomain | None = None) -> float:
    """``h^-2`` times the Gauss-quadrature integral of ``W`` over material elements."""
    dom = defo.dom if dom is None else dom
    if dom != defo.dom:
        raise InvalidInputError("deformation lives on a different grid")
    mask = void.element_mask(dom)
    e = _element_energies(defo, density)
    return float(np.sum(e[~mask])) / dom.h**2


def eval_surface(void: VoidSet, dom: RodDomain, kappa_h: float) -> tuple[float, float]:
    """Rescaled perimeter part and curvature part of the void energy.

    Perimeter: ``h^-2`` times the physical area of ``dE`` inside the rod.
    Curvature: ``h^-2 kappa_h int |A|^2``. A voxel-only void supports the
    perimeter part (face counting) only when ``kappa_h == 0``.
    """
    h = dom.h
    if void.is_voxel_only:
        if kappa_h != 0.0:
            raise UnsupportedOperationError("curvature is undefined for voxel-only voids")
        return voxel_perimeter(void.voxel_mask, dom) / h**2, 0.0
    per = void.boundary_area(dom) / h**2
    if kappa_h == 0.0 and void._partial_boxes(h):
        return per, 0.0
    return per, kappa_h * void.willmore(h) / h**2


def eval_Eh(defo: Deformation3, void: VoidSet, density: ElasticDensity, dom: RodDomain | None,
            kappa_h: float) -> EnergyReport3D:
    dom = defo.dom if dom is None else dom
    el = eval_elastic(defo, void, density, dom)
    per, curv = eval_surface(void, dom, kappa_h)
    return EnergyReport3D(el, per, curv)


def example_ball_voids(h: float, L: float = 1.0, kappa_exponent: float = DEFAULT_KAPPA_EXPONENT,
                       fill: float = 0.25) -> VoidSet:
    """Many small balls with equi-bounded surface energy.

    ``N_h = ceil(h^{-(52/25 - exponent)})`` balls of radius ``fill h N_h^{-1/2}``
    on the axis, equally spaced. For the default exponent the curvature part
    ``8 pi N_h h^{-2} kappa_h`` stays below ``16 pi`` and the perimeter part
    is ``4 pi fill^2``.
    """
    n = int(np.ceil(h ** (-(52.0 / 25.0 - kappa_exponent)) - 1e-12))
    r = fill * h / np.sqrt(n)
    gap = L / n
    if gap <= 2 * r:
        raise PreconditionError("balls do not fit along the rod")
    return VoidSet([Ball(((k + 0.5) * gap, 0.0, 0.0), r) for k in range(n)])


# ---------------------------------------------------------------------------
# triangulated sphere (validation of the discrete curvature path)


def icosphere(level: int, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
    """Icosahedron subdivided ``level`` times and projected to the sphere."""
    t = (1.0 + 5**0.5) / 2.0
    v = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(p, float) / np.linalg.norm(p) for p in v]
    faces = list(f)
    for _ in range(level):
        cache: dict = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    V = np.array(verts) * radius + np.asarray(center, float)
    return V, np.array(faces, dtype=np.int64)


def mesh_area_and_willmore(V: np.ndarray, F: np.ndarray) -> tuple[float, float]:
    """Area and discrete ``int |A|^2`` of a closed triangle mesh.

    ``|A|^2 = 4 H^2 - 2 K`` per vertex, with the cotangent mean-curvature
    vector, the angle-defect Gauss curvature and barycentric vertex areas.
    """
    nv = len(V)
    p0, p1, p2 = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    tri_area = 0.5 * np.linalg.norm(cross, axis=1)
    vert_area = np.zeros(nv)
    np.add.at(vert_area, F.ravel(), np.repeat(tri_area / 3.0, 3))
    lap = np.zeros((nv, 3))
    angle_sum = np.zeros(nv)
    for k in range(3):
        i, j, l = F[:, k], F[:, (k + 1) % 3], F[:, (k + 2) % 3]
        u = V[j] - V[i]
        w = V[l] - V[i]
        cosang = np.einsum("ij,ij->i", u, w)
        sinang = np.linalg.norm(np.cross(u, w), axis=1)
        np.add.at(angle_sum, i, np.arctan2(sinang, cosang))
        cot = cosang / sinang  # cotangent of the angle at i, opposite edge (j, l)
        e = V[l] - V[j]
        np.add.at(lap, j, (cot[:, None] * e))
        np.add.at(lap, l, (-cot[:, None] * e))
    # lap_i = sum (cot a + cot b)(x_j - x_i) / 2 ; mean-curvature vector 2 H n = -lap / area
    Hn = 0.5 * lap / vert_area[:, None]
    H2 = np.sum(Hn**2, axis=1) / 4.0
    K = (2.0 * np.pi - angle_sum) / vert_area
    willmore = np.sum((4.0 * H2 - 2.0 * K) * vert_area)
    return float(tri_area.sum()), float(willmore)


# ---------------------------------------------------------------------------
# cuboids


@dataclass(frozen=True)
class CuboidPartition:
    """T-cuboids ``[(i-1)Th, iTh)`` and shrunken 3T-cuboids, ``i = 1..N``."""

    dom: RodDomain
    T: int
    rho: float

    @property
    def Th(self) -> float:
        return self.T * self.dom.h

    @property
    def N(self) -> int:
        return int(np.floor(self.dom.L / self.Th + 1e-12)) + 1

    def indices(self) -> range:
        return range(1, self.N + 1)

    def interior(self) -> range:
        return range(2, self.N)

    def center(self, i: int) -> float:
        return (i - 0.5) * self.Th

    def t_cuboid(self, i: int) -> tuple[float, float]:
        return ((i - 1) * self.Th, i * self.Th)

    def q3(self, i: int) -> tuple[float, float]:
        return ((i - 2) * self.Th, (i + 1) * self.Th)

    def q3_shrunk(self, i: int) -> tuple[float, float, float]:
        """``(x_lo, x_hi, section_half)`` of the shrunken 3T-cuboid."""
        c = self.center(i)
        w = 1.5 * self.Th * (1.0 - self.rho)
        return (c - w, c + w, 0.5 * (1.0 - self.rho) * self.dom.h)

    def shrunk_volume_ratio(self) -> float:
        return (1.0 - self.rho) ** 3

    def overlaps(self, i: int) -> list[int]:
        lo, hi, _ = self.q3_shrunk(i)
        out = []
        for j in self.interior():
            if j == i:
                continue
            a, b, _ = self.q3_shrunk(j)
            if min(hi, b) > max(lo, a):
                out.append(j)
        return out


def partition_cuboids(dom: RodDomain, T: int = 10, rho: float = RHO0) -> CuboidPartition:
    if int(T) != T or T < 2:
        raise InvalidInputError("T must be an integer >= 2")
    if not 0.0 < rho <= RHO0 + 1e-15:
        raise InvalidInputError(f"rho must lie in (0, 1 - (19/20)^(1/3)] = (0, {RHO0:.17g}]")
    if T * dom.h >= dom.L:
        raise PreconditionError("degenerate partition: T h >= L")
    return CuboidPartition(dom, int(T), float(rho))


def default_alpha(T: int, c_T: float = 4.0) -> float:
    """Good-cuboid threshold ``(T / (10 c_T))^{2/3}``; ``c_T`` is a user constant."""
    return (T / (10.0 * c_T)) ** (2.0 / 3.0)


@dataclass
class CuboidStats:
    i: int
    label: str
    area: float
    volume: float
    eps: float = float("nan")
    residual_sym: float = float("nan")
    residual_full: float = float("nan")
    R: np.ndarray | None = None


def classify_cuboids(partition: CuboidPartition, void: VoidSet, alpha: float | None = None,
                     C_iso: float = 1.0) -> list[CuboidStats]:
    """Label cuboids good / bad / ugly from area and volume in ``Q3_{h,rho}(i)``.

    The void itself plays the role of the thickened set.
    """
    h = partition.dom.h
    rho = partition.rho
    alpha = default_alpha(partition.T) if alpha is None else alpha
    out = []
    for i in partition.indices():
        lo, hi, s = partition.q3_shrunk(i)
        area = void.boundary_area(partition.dom, lo, hi, s)
        vol = void.volume(partition.dom, lo, hi, s)
        if i in (1, partition.N):
            label = "ugly"
        elif area <= alpha * h**2:
            label = "good"
        elif area < (1 - rho) ** 2 * h**2:
            label = "bad"
        elif area < 2 * (1 - rho) ** 2 * h**2 and vol <= 2 * C_iso * h**3:
            label = "bad"
        else:
            label = "ugly"
        out.append(CuboidStats(i, label, area, vol))
    return out


# ---------------------------------------------------------------------------
# rigidity probe


@dataclass
class ProbeResult:
    stats: list
    adjacent: dict  # (i, i+1) -> |R_i - R_{i+1}|^2

    def as_rows(self):
        return [(s.i, s.label, s.area, s.volume, s.eps, s.residual_sym, s.residual_full) for s in self.stats]


def _element_x_ranges(dom: RodDomain, lo: float, hi: float, strict: bool = True):
    cx = dom.center_axes()[0]
    return np.nonzero((cx > lo) & (cx < hi))[0]


def rigidity_probe(defo: Deformation3, void: VoidSet, partition: CuboidPartition,
                   labels: list | None = None, alpha: float | None = None,
                   C_iso: float = 1.0) -> ProbeResult:
    """Best-fit rotations and residuals on the dominant components.

    Integrals are physical (rescaled volume times ``h^2``). ``eps`` uses the
    full 3T-cuboid minus the void; the residuals use the largest
    6-connected material component inside the shrunken cuboid. Ugly cuboids
    and empty components carry NaN.
    """
    dom = defo.dom
    h = dom.h
    if labels is None:
        labels = classify_cuboids(partition, void, alpha, C_iso)
    mask = void.element_mask(dom)
    F = defo.gradients()
    dvol = dom.element_volume * h**2 / 8.0  # physical weight per Gauss point
    d2 = dist_SO3(F) ** 2
    cy = dom.center_axes()[1] * h
    stats = []
    for st in labels:
        i = st.i
        st = CuboidStats(st.i, st.label, st.area, st.volume)
        a, b = partition.q3(i)
        idx = _element_x_ranges(dom, a, b)
        if len(idx):
            mat = ~mask[idx]
            st.eps = float(np.sum(d2[idx][mat]) * dvol)
        else:
            st.eps = 0.0
        if st.label != "ugly":
            lo, hi, s = partition.q3_shrunk(i)
            ix = _element_x_ranges(dom, lo, hi)
            iy = np.nonzero(np.abs(cy) < s)[0]
            if len(ix) and len(iy):
                sub = ~mask[np.ix_(ix, iy, iy)]
                lab, n = ndimage.label(sub)
                if n > 0:
                    sizes = np.bincount(lab.ravel())[1:]
                    dominant = lab == (1 + int(np.argmax(sizes)))
                    Fi = F[np.ix_(ix, iy, iy)][dominant]  # (m, 8, 3, 3)
                    Fbar = Fi.mean(axis=(0, 1))
                    try:
                        R = project_SO3(Fbar)
                    except DegenerateProjectionError:
                        R = None
                    if R is not None:
                        st.R = R
                        st.residual_full = float(np.sum((Fi - R) ** 2) * dvol)
                        G = np.einsum("ji,mgjk->mgik", R, Fi) - np.eye(3)
                        S = 0.5 * (G + np.swapaxes(G, -1, -2))
                        st.residual_sym = float(np.sum(S**2) * dvol)
        stats.append(st)
    adjacent = {}
    for s0, s1 in zip(stats[:-1], stats[1:]):
        if s0.R is not None and s1.R is not None:
            adjacent[(s0.i, s1.i)] = float(np.sum((s0.R - s1.R) ** 2))
    return ProbeResult(stats, adjacent)
