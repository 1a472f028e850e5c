"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; used when
the extension is not built or ``VOIDROD_PURE_PYTHON=1`` is set.
"""

import numpy as np

BACKEND = "python"

_G = 0.5 / np.sqrt(3.0)
#: Gauss abscissae of the 2-point rule mapped to [0, 1].
GAUSS_1D = np.array([0.5 - _G, 0.5 + _G])


def svk_density(F, lam, mu):
    C = np.einsum("...ki,...kj->...ij", F, F)
    E = 0.5 * (C - np.eye(3))
    trE = np.trace(E, axis1=-2, axis2=-1)
    return mu * np.einsum("...ij,...ij->...", E, E) + 0.5 * lam * trE * trE


def hex_gauss_gradients(y, spacing, scale):
    """Gradients of the trilinear interpolant at the 2x2x2 Gauss points.

    ``y`` has shape (n1+1, n2+1, n3+1, 3); the result has shape
    (n1, n2, n3, 8, 3, 3) with Gauss points ordered (g1, g2, g3) row-major and
    column ``k`` of each matrix multiplied by ``scale[k] / spacing[k]``.
    """
    y = np.asarray(y, dtype=float)
    d1 = y[1:, :, :] - y[:-1, :, :]
    d2 = y[:, 1:, :] - y[:, :-1, :]
    d3 = y[:, :, 1:] - y[:, :, :-1]
    n1, n2, n3 = y.shape[0] - 1, y.shape[1] - 1, y.shape[2] - 1
    out = np.empty((n1, n2, n3, 8, 3, 3))
    c = [scale[k] / spacing[k] for k in range(3)]
    for g1 in range(2):
        for g2 in range(2):
            for g3 in range(2):
                t1, t2, t3 = GAUSS_1D[g1], GAUSS_1D[g2], GAUSS_1D[g3]
                gp = 4 * g1 + 2 * g2 + g3
                col1 = ((1 - t2) * (1 - t3) * d1[:, :-1, :-1] + t2 * (1 - t3) * d1[:, 1:, :-1]
                        + (1 - t2) * t3 * d1[:, :-1, 1:] + t2 * t3 * d1[:, 1:, 1:])
                col2 = ((1 - t1) * (1 - t3) * d2[:-1, :, :-1] + t1 * (1 - t3) * d2[1:, :, :-1]
                        + (1 - t1) * t3 * d2[:-1, :, 1:] + t1 * t3 * d2[1:, :, 1:])
                col3 = ((1 - t1) * (1 - t2) * d3[:-1, :-1, :] + t1 * (1 - t2) * d3[1:, :-1, :]
                        + (1 - t1) * t2 * d3[:-1, 1:, :] + t1 * t2 * d3[1:, 1:, :])
                out[:, :, :, gp, :, 0] = c[0] * col1
                out[:, :, :, gp, :, 1] = c[1] * col2
                out[:, :, :, gp, :, 2] = c[2] * col3
    return out


def svk_hex_energy(y, spacing, scale, lam, mu):
    """Per-element Gauss-quadrature integral of the SVK density.

    Returns an (n1, n2, n3) array; each entry is the element volume (product of
    ``spacing``) times the mean of ``W`` over the eight Gauss points.
    """
    F = hex_gauss_gradients(y, spacing, scale)
    vol = spacing[0] * spacing[1] * spacing[2]
    return vol * svk_density(F, lam, mu).mean(axis=-1)


def subset_perimeters(face_u, face_v, start, count):
    """Relative perimeter (number of cut faces) and volume of bitmask subsets.

    Subset ``m`` (for ``m`` in ``start .. start+count-1``) contains cell ``c``
    iff bit ``c`` of ``m`` is set. ``face_u[f], face_v[f]`` are the two cells
    sharing interior face ``f``.
    """
    masks = np.arange(start, start + count, dtype=np.int64)
    per = np.zeros(count, dtype=np.int32)
    for u, v in zip(np.asarray(face_u), np.asarray(face_v)):
        per += (((masks >> int(u)) ^ (masks >> int(v))) & 1).astype(np.int32)
    vol = np.zeros(count, dtype=np.int32)
    m = masks.copy()
    while np.any(m):
        vol += (m & 1).astype(np.int32)
        m >>= 1
    return per, vol
