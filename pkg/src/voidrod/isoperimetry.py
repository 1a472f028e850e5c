"""Relative isoperimetric checks on voxelized long cuboids.

A grid of ``dims`` cells (long axis first after normalization) with cell size
``a`` represents ``S = (-l, l) x (-sigma/2, sigma/2)^{d-1}`` where
``2 l = dims[0] a`` and ``sigma = dims[1] a``. The relative perimeter of a set
of cells counts only faces between two cells of the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import InvalidInputError, PreconditionError

__all__ = [
    "VoxelSet",
    "IsoCheck",
    "ExhaustiveResult",
    "DominantResult",
    "RandomSuiteResult",
    "interior_faces",
    "check_relative_isoperimetric",
    "exhaustive_isoperimetric",
    "one_dimensional_exhaustive",
    "dominant_component_check",
    "random_blob",
    "random_dominant_suite",
    "default_T0",
    "EXHAUSTIVE_CAP",
]

EXHAUSTIVE_CAP = 24  # at most 2**24 subsets


def _normalize_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(n) for n in dims)
    if not 1 <= len(dims) <= 3 or min(dims) < 1:
        raise InvalidInputError(f"dims must have 1 to 3 positive entries, got {dims}")
    k = int(np.argmax(dims))
    dims = (dims[k],) + dims[:k] + dims[k + 1:]
    if len(set(dims[1:])) > 1:
        raise InvalidInputError("the cross-section must be a square grid")
    return dims


@dataclass
class VoxelSet:
    """Occupied cells of a grid; the first axis is the long one."""

    cells: np.ndarray
    cell_size: float = 1.0

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        dims = _normalize_dims(cells.shape)
        if dims != cells.shape:
            k = int(np.argmax(cells.shape))
            cells = np.moveaxis(cells, k, 0)
        self.cells = cells
        if not self.cell_size > 0:
            raise InvalidInputError("cell size must be positive")

    @classmethod
    def empty(cls, dims, cell_size: float = 1.0) -> "VoxelSet":
        return cls(np.zeros(_normalize_dims(dims), dtype=bool), cell_size)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.cells.shape

    @property
    def d(self) -> int:
        return self.cells.ndim

    @property
    def n_cross(self) -> int:
        return self.dims[1] if self.d > 1 else 1

    @property
    def sigma(self) -> float:
        return self.n_cross * self.cell_size

    @property
    def half_length(self) -> float:
        return 0.5 * self.dims[0] * self.cell_size

    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    def volume(self) -> float:
        return self.count() * self.cell_size**self.d

    def total_volume(self) -> float:
        return self.cells.size * self.cell_size**self.d

    def face_count(self) -> int:
        """Interior faces with exactly one adjacent occupied cell."""
        c = self.cells.astype(np.int8)
        return int(sum(np.count_nonzero(np.diff(c, axis=k)) for k in range(self.d)))

    def relative_perimeter(self) -> float:
        return self.face_count() * self.cell_size ** (self.d - 1)

    def complement(self) -> "VoxelSet":
        return VoxelSet(~self.cells, self.cell_size)

    def refined(self, k: int = 2) -> "VoxelSet":
        """Each cell split into ``k^d`` cells of size ``a / k``."""
        c = self.cells
        for ax in range(self.d):
            c = np.repeat(c, k, axis=ax)
        return VoxelSet(c, self.cell_size / k)


def interior_faces(dims) -> tuple[np.ndarray, np.ndarray]:
    """Flat C-order indices ``(u, v)`` of the cell pairs sharing a face."""
    dims = tuple(dims)
    idx = np.arange(int(np.prod(dims))).reshape(dims)
    us, vs = [], []
    for ax in range(len(dims)):
        a = np.take(idx, np.arange(dims[ax] - 1), axis=ax).ravel()
        b = np.take(idx, np.arange(1, dims[ax]), axis=ax).ravel()
        us.append(a)
        vs.append(b)
    return np.concatenate(us).astype(np.int64), np.concatenate(vs).astype(np.int64)


@dataclass(frozen=True)
class IsoCheck:
    lhs: float
    rhs_per: float
    satisfies_precondition: bool
    ratio: float  # NaN when rhs_per == 0


def check_relative_isoperimetric(P: VoxelSet, sigma: float | None = None) -> IsoCheck:
    """``min(|P|, |S \\ P|)``, relative perimeter and their ratio in units of ``sigma``."""
    sigma = P.sigma if sigma is None else float(sigma)
    if P.half_length / sigma < 1.0:
        raise PreconditionError(f"cuboid too short: l / sigma = {P.half_length / sigma:.3g} < 1")
    vol = P.volume()
    lhs = min(vol, P.total_volume() - vol)
    per = P.relative_perimeter()
    pre = per < sigma ** (P.d - 1)
    ratio = lhs / (sigma * per) if per > 0 else float("nan")
    return IsoCheck(lhs, per, bool(pre), ratio)


@dataclass
class ExhaustiveResult:
    dims: tuple
    cell_size: float
    n_subsets: int
    n_precondition: int
    n_nontrivial: int  # precondition holds and the perimeter is positive
    C_hat: float
    argmax: int | None
    n_violations: int | None = None
    backend: str = "python"

    def argmax_set(self) -> VoxelSet | None:
        if self.argmax is None:
            return None
        n = int(np.prod(self.dims))
        bits = (self.argmax >> np.arange(n)) & 1
        return VoxelSet(bits.reshape(self.dims).astype(bool), self.cell_size)


def exhaustive_isoperimetric(dims, cell_size: float = 1.0, C_check: float | None = None,
                             chunk: int = 1 << 18, impl=None) -> ExhaustiveResult:
    """Maximal ratio over all subsets satisfying the small-perimeter condition.

    The ratio ``min(|P|, |S \\ P|) / (sigma per(P))`` is independent of the
    cell size. With ``C_check`` the number of qualifying subsets whose ratio
    exceeds it is also counted. ``impl`` selects a kernel module (defaults to
    the dispatcher).
    """
    dims = _normalize_dims(dims)
    n = int(np.prod(dims))
    if n > EXHAUSTIVE_CAP:
        raise InvalidInputError(f"exhaustive search is capped at {EXHAUSTIVE_CAP} cells, got {n}")
    impl = kernels if impl is None else impl
    ncross = dims[1] if len(dims) > 1 else 1
    if 0.5 * dims[0] / ncross < 1.0:
        raise PreconditionError("cuboid too short: l / sigma < 1")
    cap = ncross ** (len(dims) - 1)
    fu, fv = interior_faces(dims)
    total = 1 << n
    best = -1.0
    arg = None
    n_pre = 0
    n_nontriv = 0
    n_viol = 0
    for start in range(0, total, chunk):
        count = min(chunk, total - start)
        per, vol = impl.subset_perimeters(fu, fv, start, count)
        pre = per < cap
        n_pre += int(np.count_nonzero(pre))
        sel = pre & (per > 0)
        n_nontriv += int(np.count_nonzero(sel))
        if not np.any(sel):
            continue
        lhs = np.minimum(vol[sel], n - vol[sel]).astype(float)
        ratio = lhs / (ncross * per[sel].astype(float))
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best = float(ratio[k])
            arg = start + int(np.nonzero(sel)[0][k])
        if C_check is not None:
            n_viol += int(np.count_nonzero(ratio > C_check * (1 + 1e-12)))
    return ExhaustiveResult(
        dims, float(cell_size), total, n_pre, n_nontriv, max(best, 0.0), arg,
        n_viol if C_check is not None else None,
        impl.BACKEND,
    )


def one_dimensional_exhaustive(n: int) -> bool:
    """Every subset of ``n`` cells with no cut face is empty or everything."""
    fu, fv = interior_faces((n,))
    per, vol = kernels.subset_perimeters(fu, fv, 0, 1 << n)
    small = per < 1
    lhs = np.minimum(vol, n - vol)
    return bool(np.all(lhs[small] == 0))


# ---------------------------------------------------------------------------
# dominant components


def default_T0(C_hat: float) -> int:
    """Smallest integer exceeding ``C_hat``: the length ratio needed by the counting argument."""
    return int(np.floor(C_hat)) + 1


@dataclass
class DominantResult:
    precondition_met: bool
    reason: str = ""
    largest_component: float = float("nan")
    complement_volume: float = float("nan")
    complement_bound: float = float("nan")
    perimeter: float = float("nan")
    holds: bool | None = None
    ratio: float = float("nan")  # complement excess over the void term, in units of sigma*per


def _components(free: np.ndarray):
    structure = ndimage.generate_binary_structure(free.ndim, 1)
    return ndimage.label(free, structure=structure)


def dominant_component_check(E: VoxelSet, threshold: int = 1, C_hat: float = 1.0,
                             T0: int | None = None, volume_cap: float | None = 0.25) -> DominantResult:
    """Dominant component of the partition ``{E} + components(S \\ E)``.

    ``threshold = 1``: the partition boundary must be shorter than
    ``sigma^{d-1}``; the largest part ``P1`` must exceed half the volume and
    ``|S \\ P1| <= C_hat sigma per(P1)``. ``threshold = 2``: boundary shorter
    than ``2 sigma^{d-1}`` and ``|E| <= volume_cap |S|``; ``P1`` is the largest
    component of ``S \\ E`` and ``|S \\ P1| <= C_hat sigma per + |E|``.
    """
    if threshold not in (1, 2):
        raise InvalidInputError("threshold must be 1 or 2")
    T0 = default_T0(C_hat) if T0 is None else int(T0)
    sigma = E.sigma
    d = E.d
    a = E.cell_size
    if E.half_length / sigma < T0:
        return DominantResult(False, f"l / sigma = {E.half_length / sigma:.6g} < T0 = {T0}")
    per = E.relative_perimeter()  # equals the partition boundary (6-connected components)
    if per >= threshold * sigma ** (d - 1):
        return DominantResult(False, f"partition boundary {per:.6g} >= {threshold} sigma^(d-1)", perimeter=per)
    vol_E = E.volume()
    total = E.total_volume()
    if threshold == 2 and volume_cap is not None and vol_E > volume_cap * total:
        return DominantResult(False, f"void volume {vol_E:.6g} exceeds {volume_cap} |S|", perimeter=per)
    lab, n = _components(~E.cells)
    sizes = np.bincount(lab.ravel(), minlength=n + 1)[1:] * a**d
    cand = float(sizes.max()) if n else 0.0
    if threshold == 1:
        if vol_E > cand:
            P1 = E.cells
        else:
            P1 = lab == (1 + int(np.argmax(sizes))) if n else np.zeros_like(E.cells)
        p1 = VoxelSet(P1, a)
        vol_P1 = p1.volume()
        comp = total - vol_P1
        bound = C_hat * sigma * p1.relative_perimeter()
        excess = comp
        rhs_per = p1.relative_perimeter()
    else:
        vol_P1 = cand
        comp = total - vol_P1
        bound = C_hat * sigma * per + vol_E
        excess = comp - vol_E
        rhs_per = per
    holds = bool(comp <= bound * (1 + 1e-12) + 1e-300 and vol_P1 > 0.5 * total)
    ratio = excess / (sigma * rhs_per) if rhs_per > 0 else (0.0 if excess <= 0 else float("inf"))
    return DominantResult(True, "", vol_P1, comp, bound, per, holds, ratio)


def random_blob(dims, rng: np.random.Generator, n_blobs: int, max_cells: int) -> np.ndarray:
    """Union of random face-connected growth blobs; each seed prefers the boundary."""
    dims = tuple(dims)
    cells = np.zeros(dims, dtype=bool)
    offsets = []
    for ax in range(len(dims)):
        for s in (-1, 1):
            o = [0] * len(dims)
            o[ax] = s
            offsets.append(tuple(o))
    for _ in range(n_blobs):
        seed = []
        for ax, n in enumerate(dims):
            if ax > 0 and rng.random() < 0.7:
                seed.append(int(rng.choice([0, n - 1])))
            else:
                seed.append(int(rng.integers(n)))
        blob = [tuple(seed)]
        members = {tuple(seed)}
        target = int(rng.integers(1, max_cells + 1))
        while len(members) < target:
            base = blob[int(rng.integers(len(blob)))]
            o = offsets[int(rng.integers(len(offsets)))]
            nxt = tuple(b + d for b, d in zip(base, o))
            if all(0 <= x < n for x, n in zip(nxt, dims)) and nxt not in members:
                members.add(nxt)
                blob.append(nxt)
        for m in members:
            cells[m] = True
    return cells


@dataclass
class RandomSuiteResult:
    dims: tuple
    samples: int
    seed: int
    threshold: int
    C_hat: float
    checked: int = 0
    skipped: int = 0
    violations: list = field(default_factory=list)
    max_ratio: float = 0.0
    log: list = field(default_factory=list)

    @property
    def C_reestimated(self) -> float:
        return max(self.C_hat, self.max_ratio)


def random_dominant_suite(dims=(64, 4, 4), samples: int = 10_000, seed: int = 0,
                          C_hat: float = 1.0 / 6.0, threshold: int = 1, T0: int | None = None,
                          max_blobs: int = 3, max_cells: int = 12) -> RandomSuiteResult:
    """Randomized check of the dominant-component bounds on blob voids.

    Samples violating the perimeter or volume caps are skipped; any violation
    is logged together with the ratio that a re-estimated constant would need.
    """
    dims = _normalize_dims(dims)
    rng = np.random.default_rng(seed)
    res = RandomSuiteResult(dims, samples, seed, threshold, C_hat)
    for k in range(samples):
        cells = random_blob(dims, rng, int(rng.integers(1, max_blobs + 1)), max_cells)
        r = dominant_component_check(VoxelSet(cells), threshold, C_hat, T0)
        if not r.precondition_met:
            res.skipped += 1
            continue
        res.checked += 1
        if np.isfinite(r.ratio):
            res.max_ratio = max(res.max_ratio, r.ratio)
        if not r.holds:
            res.violations.append(k)
            res.log.append(f"sample {k}: |S minus P1| = {r.complement_volume:.6g} > bound "
                           f"{r.complement_bound:.6g}; ratio {r.ratio:.6g}")
    if res.violations:
        res.log.append(f"re-estimated constant {res.C_reestimated:.17g}")
    return res
