"""Cross-sectional cell problem and the effective bending-torsion matrix.

For a skew matrix ``A = hat(a)`` the effective energy density is

    Q2(A) = min_alpha  int_S Q3( A (0, x2, x3)^T | d2 alpha | d3 alpha )

over ``alpha: S -> R^3`` on the unit square ``S = (-1/2, 1/2)^2``. The problem
is discretized with bilinear quadrilaterals on a uniform grid and 2x2 Gauss
quadrature (exact for the piecewise quadratic integrand). Constants lie in
the kernel together with the in-plane rotation ``(0, -x3, x2)``; both are
removed by linear constraints imposed with Lagrange multipliers.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, InvalidInputError
from .kernels import GAUSS_1D
from .material import QuadForm3

__all__ = [
    "CrossSectionMesh",
    "CellSolution",
    "Q2Matrix",
    "CellBasis",
    "solve_cell",
    "cell_objective",
    "assemble_q2_matrix",
    "cell_basis",
    "refinement_table",
    "richardson",
    "saint_venant_torsion_constant",
    "DEFAULT_CELL_N",
]

DEFAULT_CELL_N = 64
REFINEMENT_NS = (8, 16, 32, 64, 128)


@dataclass(frozen=True)
class CrossSectionMesh:
    """Uniform ``(n+1) x (n+1)`` node grid on the unit square."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"mesh subdivisions must be a positive integer, got {self.n}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def coords(self) -> np.ndarray:
        """1D node coordinates along either axis."""
        return np.linspace(-0.5, 0.5, self.n + 1)

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 2

    def nodes(self) -> np.ndarray:
        """(n+1, n+1, 2) array; ``nodes[i, j] = (x2_i, x3_j)``."""
        c = self.coords
        return np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1)

    def element_areas(self) -> np.ndarray:
        return np.full((self.n, self.n), self.spacing**2)

    def element_nodes(self) -> np.ndarray:
        """(n*n, 4) node indices ordered (0,0), (1,0), (0,1), (1,1) locally."""
        n = self.n
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        i, j = i.ravel(), j.ravel()
        base = i * (n + 1) + j
        return np.stack([base, base + (n + 1), base + 1, base + (n + 2)], axis=1)

    def gauss_points(self) -> np.ndarray:
        """(n*n, 4, 2) physical Gauss point coordinates per element."""
        n, d = self.n, self.spacing
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        x0 = -0.5 + d * i.ravel()
        y0 = -0.5 + d * j.ravel()
        gp = np.array([(s, t) for s in GAUSS_1D for t in GAUSS_1D])
        return np.stack(
            [x0[:, None] + d * gp[None, :, 0], y0[:, None] + d * gp[None, :, 1]], axis=-1
        )


def _local_operators(mesh: CrossSectionMesh):
    """Per-Gauss-point maps from element dofs to vec(G) and shape values.

    Returns ``D`` with shape (4, 9, 12) and ``N`` with shape (4, 4); element dof
    ``3*k + r`` is component ``r`` at local node ``k``.
    """
    d = mesh.spacing
    local = [(0, 0), (1, 0), (0, 1), (1, 1)]
    D = np.zeros((4, 9, 12))
    N = np.zeros((4, 4))
    for g, (s, t) in enumerate((s, t) for s in GAUSS_1D for t in GAUSS_1D):
        for k, (a, b) in enumerate(local):
            ws = s if a else 1.0 - s
            wt = t if b else 1.0 - t
            dws = (1.0 if a else -1.0) / d
            dwt = (1.0 if b else -1.0) / d
            N[g, k] = ws * wt
            for r in range(3):
                D[g, 3 * r + 1, 3 * k + r] = dws * wt
                D[g, 3 * r + 2, 3 * k + r] = ws * dwt
    return D, N


def _forcing_columns(points: np.ndarray) -> np.ndarray:
    """vec(G0) for the three unit skew parameters at ``points`` (..., 2).

    Returns shape (..., 3, 9): row ``k`` is the forcing for ``a = e_k``.
    """
    x2, x3 = points[..., 0], points[..., 1]
    out = np.zeros(points.shape[:-1] + (3, 9))
    # first column of G is a x (0, x2, x3) = (a2 x3 - a3 x2, -a1 x3, a1 x2)
    out[..., 0, 3] = -x3
    out[..., 0, 6] = x2
    out[..., 1, 0] = x3
    out[..., 2, 0] = -x2
    return out


@dataclass
class _CellSystem:
    mesh: CrossSectionMesh
    q: QuadForm3
    lu: object
    system: sp.csc_matrix
    rhs_basis: np.ndarray  # (ndof + 4, 3)
    D: np.ndarray
    weights: float


@functools.lru_cache(maxsize=16)
def _system(lam: float, mu: float, n: int) -> _CellSystem:
    mesh = CrossSectionMesh(n)
    q = QuadForm3(lam, mu)
    C = q.matrix()
    D, N = _local_operators(mesh)
    w = mesh.spacing**2 / 4.0
    Ke = w * np.einsum("gik,ij,gjl->kl", D, C, D)
    conn = mesh.element_nodes()
    dofs = (3 * conn[:, :, None] + np.arange(3)[None, None, :]).reshape(len(conn), 12)
    rows = np.repeat(dofs, 12, axis=1).ravel()
    cols = np.tile(dofs, (1, 12)).ravel()
    vals = np.tile(Ke.ravel(), len(conn))
    ndof = 3 * mesh.n_nodes
    K = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()

    # forcing f_k = sum_gp w D^T C g0(e_k)
    gps = mesh.gauss_points()  # (ne, 4, 2)
    g0 = _forcing_columns(gps)  # (ne, 4, 3, 9)
    fe = w * np.einsum("gik,ij,egaj->eak", D, C, g0)  # (ne, 3, 12)
    F = np.zeros((ndof, 3))
    for a in range(3):
        np.add.at(F[:, a], dofs.ravel(), fe[:, a, :].ravel())

    # zero-mean constraints: sum_nodes (int N_node) alpha_node[r] = 0, plus a
    # gauge for the in-plane rotation (0, -x3, x2), which leaves sym G unchanged
    mass_e = w * N.sum(axis=0)  # (4,)
    mass = np.zeros(mesh.n_nodes)
    np.add.at(mass, conn.ravel(), np.tile(mass_e, len(conn)))
    xy = mesh.nodes().reshape(-1, 2)
    Cc = sp.lil_matrix((4, ndof))
    for r in range(3):
        Cc[r, r::3] = mass
    Cc[3, 1::3] = -mass * xy[:, 1]
    Cc[3, 2::3] = mass * xy[:, 0]
    Cc = Cc.tocsr()
    system = sp.bmat([[K, Cc.T], [Cc, None]], format="csc")
    try:
        lu = spla.splu(system)
    except RuntimeError as exc:
        raise AssemblyError(f"singular cell-problem system at n={n}: {exc}") from exc
    rhs = np.zeros((ndof + 4, 3))
    rhs[:ndof] = -F
    return _CellSystem(mesh, q, lu, system, rhs, D, w)


@dataclass
class CellSolution:
    """Minimizer of the cell problem for one skew parameter."""

    a: np.ndarray
    value: float
    alpha: np.ndarray  # (n+1, n+1, 3) nodal field
    mesh: CrossSectionMesh
    residual: float


@dataclass(frozen=True)
class Q2Matrix:
    """Symmetric matrix ``B`` with ``Q2(hat(a)) = a . B a``."""

    B: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.shape != (3, 3):
            raise InvalidInputError("Q2 matrix must be 3x3")
        if np.max(np.abs(B - B.T)) > 1e-12 * max(1.0, np.max(np.abs(B))):
            raise InvalidInputError("Q2 matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (B + B.T))) <= 0.0:
            raise InvalidInputError("Q2 matrix must be positive definite")
        object.__setattr__(self, "B", B)

    def __call__(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return np.einsum("...i,ij,...j->...", a, self.B, a)

    @classmethod
    def diagonal(cls, torsion: float, bend2: float, bend3: float) -> "Q2Matrix":
        return cls(np.diag([torsion, bend2, bend3]))


@dataclass
class CellBasis:
    """Cell minimizers for the three unit skew parameters on one mesh.

    By linearity the minimizer for ``a`` is ``sum_k a[k] * alphas[k]``.
    """

    q: QuadForm3
    mesh: CrossSectionMesh
    alphas: np.ndarray  # (3, n+1, n+1, 3)
    matrix: Q2Matrix = field(repr=False)

    def alpha(self, a) -> np.ndarray:
        """Nodal minimizer(s) for parameter(s) ``a`` with shape (..., 3)."""
        return np.tensordot(np.asarray(a, dtype=float), self.alphas, axes=(-1, 0))


def _check_mesh(mesh) -> CrossSectionMesh:
    if isinstance(mesh, int):
        mesh = CrossSectionMesh(mesh)
    if not isinstance(mesh, CrossSectionMesh):
        raise InvalidInputError("mesh must be a CrossSectionMesh")
    return mesh


def cell_objective(a, alpha, q: QuadForm3, mesh: CrossSectionMesh) -> float:
    """Quadrature value of the cell functional at a nodal field ``alpha``."""
    mesh = _check_mesh(mesh)
    a = np.asarray(a, dtype=float)
    sysm = _system(float(q.lam), float(q.mu), mesh.n)
    conn = mesh.element_nodes()
    u = np.asarray(alpha, dtype=float).reshape(-1, 3)[conn].reshape(len(conn), 12)
    G = np.einsum("gik,ek->egi", sysm.D, u)
    G = G + np.einsum("egaj,a->egj", _forcing_columns(mesh.gauss_points()), a)
    return float(sysm.weights * q(G.reshape(G.shape[:-1] + (3, 3))).sum())


def solve_cell(a, q: QuadForm3, mesh: CrossSectionMesh | int = DEFAULT_CELL_N) -> CellSolution:
    """Minimize the cell functional for the skew parameter ``a``.

    ``a`` may be a 3-vector or a skew matrix.
    """
    mesh = _check_mesh(mesh)
    a = np.asarray(a, dtype=float)
    if a.shape == (3, 3):
        if np.max(np.abs(a + a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
            raise InvalidInputError("cell problem needs a skew-symmetric matrix")
        a = np.array([a[2, 1], a[0, 2], a[1, 0]])
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise InvalidInputError("skew parameter must be a finite 3-vector")
    sysm = _system(float(q.lam), float(q.mu), mesh.n)
    rhs = sysm.rhs_basis @ a
    x = sysm.lu.solve(rhs)
    residual = float(np.linalg.norm(sysm.system @ x - rhs))
    if not np.all(np.isfinite(x)):
        raise AssemblyError("cell problem solve produced non-finite values")
    ndof = 3 * mesh.n_nodes
    alpha = x[:ndof].reshape(mesh.n + 1, mesh.n + 1, 3)
    value = cell_objective(a, alpha, q, mesh)
    return CellSolution(a=a, value=max(value, 0.0), alpha=alpha, mesh=mesh, residual=residual)


def cell_basis(q: QuadForm3, mesh: CrossSectionMesh | int = DEFAULT_CELL_N) -> CellBasis:
    """Solve the three basis problems and assemble ``B`` by polarization."""
    mesh = _check_mesh(mesh)
    sols = [solve_cell(e, q, mesh) for e in np.eye(3)]
    sysm = _system(float(q.lam), float(q.mu), mesh.n)
    conn = mesh.element_nodes()
    g0 = _forcing_columns(mesh.gauss_points())  # (ne, 4, 3, 9)
    Gs = []
    for k, s in enumerate(sols):
        u = s.alpha.reshape(-1, 3)[conn].reshape(len(conn), 12)
        Gs.append(np.einsum("gik,ek->egi", sysm.D, u) + g0[:, :, k, :])
    C = q.matrix()
    B = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            B[i, j] = sysm.weights * np.einsum("egi,ij,egj->", Gs[i], C, Gs[j])
    B = 0.5 * (B + B.T)
    alphas = np.stack([s.alpha for s in sols])
    return CellBasis(q=q, mesh=mesh, alphas=alphas, matrix=Q2Matrix(B))


def assemble_q2_matrix(q: QuadForm3, mesh: CrossSectionMesh | int = DEFAULT_CELL_N) -> Q2Matrix:
    return cell_basis(q, mesh).matrix


def richardson(coarse: float, fine: float, order: int = 2) -> float:
    """Extrapolate two values on meshes ``n`` and ``2n`` with error ``O(n^-order)``."""
    f = 2.0**order
    return (f * fine - coarse) / (f - 1.0)


def refinement_table(q: QuadForm3, ns=REFINEMENT_NS) -> list[dict]:
    """Diagonal of ``B`` per mesh, plus Richardson extrapolants from consecutive pairs."""
    rows = []
    prev = None
    for n in ns:
        B = assemble_q2_matrix(q, n).B
        row = {"n": n, "B11": B[0, 0], "B22": B[1, 1], "B33": B[2, 2]}
        for key in ("B11", "B22", "B33"):
            row[key + "_extrap"] = richardson(prev[key], row[key]) if prev else math.nan
        rows.append(row)
        prev = row
    return rows


def saint_venant_torsion_constant(width: float = 1.0, height: float = 1.0, terms: int = 200) -> float:
    """Torsion constant of a ``width x height`` rectangle from the Fourier series solution."""
    a, b = max(width, height), min(width, height)
    s = 0.0
    for k in range(terms):
        m = 2 * k + 1
        s += math.tanh(m * math.pi * a / (2.0 * b)) / m**5
    return a * b**3 / 3.0 * (1.0 - 192.0 / math.pi**5 * (b / a) * s)

