"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--h 0.015625]
"""

import argparse
import timeit

import numpy as np

from voidrod import _kernels_py
from voidrod.isoperimetry import interior_faces
from voidrod.rod3d import Deformation3, RodDomain

try:
    from voidrod import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(h: float):
    dom = RodDomain.from_policy(1.0, h, 8)
    rng = np.random.default_rng(0)
    y = Deformation3.identity(dom).y
    y = y + 0.01 * h * rng.standard_normal(y.shape)
    F = np.eye(3) + 0.1 * rng.standard_normal((200_000, 3, 3))
    fu, fv = interior_faces((10, 2))
    return {
        "svk_density (2e5 matrices)": lambda m: m.svk_density(F, 1.0, 1.0),
        f"hex_gauss_gradients {dom.shape}": lambda m: m.hex_gauss_gradients(y, dom.spacing, dom.scale),
        f"svk_hex_energy {dom.shape}": lambda m: m.svk_hex_energy(y, dom.spacing, dom.scale, 1.0, 1.0),
        "subset_perimeters 10x2 (2^20)": lambda m: m.subset_perimeters(fu, fv, 0, 1 << 20),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--h", type=float, default=1 / 64)
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the numpy timings are shown")
    print(f"{'kernel':40s} {'numpy [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(args.h).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:40s} {t_py:12.2f} {'-':>12s} {'-':>8s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:40s} {t_py:12.2f} {t_c:12.2f} {t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
