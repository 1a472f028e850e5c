"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``VOIDROD_PURE_PYTHON=1`` before import to force the numpy path.
"""

import os

from . import _kernels_py

_impl = _kernels_py

if os.environ.get("VOIDROD_PURE_PYTHON", "0") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
GAUSS_1D = _kernels_py.GAUSS_1D


def svk_density(F, lam, mu):
    return _impl.svk_density(F, lam, mu)


def hex_gauss_gradients(y, spacing, scale):
    return _impl.hex_gauss_gradients(y, spacing, scale)


def svk_hex_energy(y, spacing, scale, lam, mu):
    return _impl.svk_hex_energy(y, spacing, scale, lam, mu)


def subset_perimeters(face_u, face_v, start, count):
    return _impl.subset_perimeters(face_u, face_v, start, count)
