"""Stored energy densities, the linearized quadratic form and SO(3) helpers.

The toolkit fixes two concrete densities with a single energy well at SO(3):

* ``StVenantKirchhoff``: ``W(F) = mu |E|^2 + lambda/2 (tr E)^2`` with the
  Green-Lagrange strain ``E = (F^T F - Id) / 2``;
* ``CompressibleNeoHookeanRegularized``:
  ``W(F) = mu/2 (|F|^2 - 3) - mu g(J) + lambda/2 g(J)^2`` where ``g`` is
  ``log J`` for ``J >= J_REG`` and its second-order Taylor continuation below.

Both linearize to ``Q3(G) = 2 mu |sym G|^2 + lambda (tr G)^2`` at the identity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateProjectionError, InvalidInputError

__all__ = [
    "MaterialKind",
    "ElasticDensity",
    "QuadForm3",
    "eval_W",
    "dist_SO3",
    "project_SO3",
    "eval_Q3",
    "hat",
    "unhat",
    "expm_so3",
    "logm_so3",
    "random_rotation",
    "VALIDITY_RADIUS",
]

#: Neighbourhood of SO(3) (in Frobenius distance) where coercivity is declared.
VALIDITY_RADIUS = 0.5

#: Below this determinant the neo-Hookean log term is continued quadratically.
J_REG = 0.1


class MaterialKind(str, enum.Enum):
    StVenantKirchhoff = "StVenantKirchhoff"
    CompressibleNeoHookeanRegularized = "CompressibleNeoHookeanRegularized"


@dataclass(frozen=True)
class ElasticDensity:
    """Isotropic stored energy density with Lamé parameters ``lam`` and ``mu``."""

    kind: MaterialKind = MaterialKind.StVenantKirchhoff
    lam: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MaterialKind(self.kind))
        if not (np.isfinite(self.lam) and np.isfinite(self.mu)):
            raise InvalidInputError("Lamé parameters must be finite")
        if self.mu <= 0:
            raise InvalidInputError(f"mu must be positive, got {self.mu}")
        if 3 * self.lam + 2 * self.mu <= 0:
            raise InvalidInputError("need 3*lambda + 2*mu > 0")

    @property
    def quad_form(self) -> "QuadForm3":
        return QuadForm3(self.lam, self.mu)

    def coercivity_constant(self) -> float:
        """Documented lower bound ``c`` with ``W(F) >= c dist^2(F, SO(3))``.

        Valid for ``dist(F, SO(3)) <= VALIDITY_RADIUS`` and ``lambda >= 0``.
        For StVenantKirchhoff, singular values lie in ``[1/2, 3/2]`` there, so
        ``|E|^2 = sum (s-1)^2 (s+1)^2 / 4 >= 9/16 dist^2``; we declare ``mu/2``.
        For the neo-Hookean law the sampled minimum of ``W / dist^2`` is
        about ``0.88 mu`` (at ``lambda = 0``); we declare ``mu/4``.
        """
        if self.lam < 0:
            raise InvalidInputError("coercivity constant documented for lambda >= 0 only")
        if self.kind is MaterialKind.StVenantKirchhoff:
            return 0.5 * self.mu
        return 0.25 * self.mu

    def __call__(self, F) -> np.ndarray:
        return eval_W(self, F)


@dataclass(frozen=True)
class QuadForm3:
    """``Q3(G) = 2 mu |sym G|^2 + lambda (tr G)^2``."""

    lam: float = 0.0
    mu: float = 1.0

    def __call__(self, G) -> np.ndarray:
        return eval_Q3(self, G)

    def matrix(self) -> np.ndarray:
        """9x9 matrix ``C`` with ``Q3(G) = vec(G) . C vec(G)`` (row-major vec)."""
        eye9 = np.eye(9)
        transpose = np.zeros((9, 9))
        for i in range(3):
            for j in range(3):
                transpose[3 * i + j, 3 * j + i] = 1.0
        vec_id = np.eye(3).reshape(9)
        return self.mu * (eye9 + transpose) + self.lam * np.outer(vec_id, vec_id)


def _as_matrices(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.shape[-2:] != (3, 3):
        raise InvalidInputError(f"expected (...,3,3) array, got shape {F.shape}")
    if not np.all(np.isfinite(F)):
        raise InvalidInputError("non-finite entries in deformation gradient")
    return F


def _log_reg(J):
    """C^2 continuation of log below ``J_REG``."""
    J = np.asarray(J, dtype=float)
    safe = np.maximum(J, J_REG)
    d = J - J_REG
    below = np.log(J_REG) + d / J_REG - d * d / (2 * J_REG**2)
    return np.where(J >= J_REG, np.log(safe), below)


def eval_W(density: ElasticDensity, F) -> np.ndarray:
    """Stored energy ``W(F)`` for one matrix or a stack of matrices."""
    F = _as_matrices(F)
    if density.kind is MaterialKind.StVenantKirchhoff:
        return kernels.svk_density(F, density.lam, density.mu)
    J = np.linalg.det(F)
    g = _log_reg(J)
    frob2 = np.einsum("...ij,...ij->...", F, F)
    return 0.5 * density.mu * (frob2 - 3.0) - density.mu * g + 0.5 * density.lam * g * g


def _signed_singular_values(F):
    s = np.linalg.svd(F, compute_uv=False)
    det = np.linalg.det(F)
    s = np.array(s, dtype=float, copy=True)
    s[..., 2] = np.where(det < 0, -s[..., 2], s[..., 2])
    return s


def dist_SO3(F) -> np.ndarray:
    """Frobenius distance from ``F`` to SO(3)."""
    F = _as_matrices(F)
    s = _signed_singular_values(F)
    return np.sqrt(np.sum((s - 1.0) ** 2, axis=-1))


def project_SO3(F, rank_tol: float = 1e-12) -> np.ndarray:
    """Nearest rotation (polar factor with determinant correction)."""
    F = _as_matrices(F)
    U, s, Vt = np.linalg.svd(F)
    if np.any(s[..., 2] <= rank_tol * np.maximum(s[..., 0], 1e-300)):
        raise DegenerateProjectionError("rank-deficient matrix has no unique nearest rotation")
    d = np.sign(np.linalg.det(U @ Vt))
    D = np.ones(s.shape)
    D[..., 2] = d
    return (U * D[..., None, :]) @ Vt


def eval_Q3(q: QuadForm3, G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    sym = 0.5 * (G + np.swapaxes(G, -1, -2))
    tr = np.trace(G, axis1=-2, axis2=-1)
    return 2.0 * q.mu * np.einsum("...ij,...ij->...", sym, sym) + q.lam * tr * tr


def hat(a) -> np.ndarray:
    """Skew matrix with ``hat(a) @ v == cross(a, v)``; ``a[0]`` is the twist."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape[:-1] + (3, 3))
    out[..., 0, 1] = -a[..., 2]
    out[..., 0, 2] = a[..., 1]
    out[..., 1, 0] = a[..., 2]
    out[..., 1, 2] = -a[..., 0]
    out[..., 2, 0] = -a[..., 1]
    out[..., 2, 1] = a[..., 0]
    return out


def unhat(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)


def expm_so3(w) -> np.ndarray:
    """Rodrigues formula, vectorized over leading axes of ``w`` (shape (...,3))."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    W = hat(w)
    small = theta < 1e-6
    t = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(t) / t)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(t)) / t**2)
    return np.eye(3) + a[..., None, None] * W + b[..., None, None] * (W @ W)


def logm_so3(R) -> np.ndarray:
    """Rotation vector ``w`` with ``expm_so3(w) == R`` and ``|w| <= pi``."""
    R = np.asarray(R, dtype=float)
    lead = R.shape[:-2]
    Rf = R.reshape(-1, 3, 3)
    cos = np.clip((np.trace(Rf, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    v = unhat(0.5 * (Rf - np.swapaxes(Rf, -1, -2)))
    theta = np.arctan2(np.linalg.norm(v, axis=-1), cos)
    small = theta < 1e-6
    sin = np.where(small, 1.0, np.sin(theta))
    factor = np.where(small, 1.0 + theta**2 / 6.0, theta / sin)
    w = factor[:, None] * v
    # sin(theta) ~ 0 near pi: recover the axis from the symmetric part instead.
    for k in np.nonzero(theta > np.pi - 1e-4)[0]:
        B = 0.5 * (Rf[k] + Rf[k].T) - cos[k] * np.eye(3)
        col = int(np.argmax(np.diag(B)))
        axis = B[:, col] / np.linalg.norm(B[:, col])
        if np.dot(axis, v[k]) < 0:
            axis = -axis
        w[k] = theta[k] * axis
    return w.reshape(lead + (3,))


def random_rotation(rng: np.random.Generator, size=None) -> np.ndarray:
    """Haar-distributed rotations from normalized Gaussian quaternions."""
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    R = np.empty(shape + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - z * w)
    R[..., 0, 2] = 2 * (x * z + y * w)
    R[..., 1, 0] = 2 * (x * y + z * w)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - x * w)
    R[..., 2, 0] = 2 * (x * z - y * w)
    R[..., 2, 1] = 2 * (y * z + x * w)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R
