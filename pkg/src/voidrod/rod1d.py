"""Limit configurations of the rod and the 1D Blake-Zisserman type energy.

A configuration on ``(0, L)`` consists of a void set ``I`` (finitely many open
intervals), a list of breakpoints (jumps of the midline or of the frame) and,
on every material interval between consecutive cut points, a sampled frame
field ``R(s) = (y' | d2 | d3)`` in SO(3) together with the midline ``y``.
Between samples the frame follows the geodesic ``R_i exp(t log(R_i^T R_{i+1}))``,
so constant curvature fields are represented exactly.

The energy is

    E0 = 1/2 int_{(0,L) minus I} Q2(R^T R')  +  #(interior endpoints of I)
         + 2 #(breakpoints that are not endpoints of I).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cell_problem import Q2Matrix
from .errors import InfeasibleError, InvalidConfigError, InvalidInputError
from .material import expm_so3, hat, logm_so3, project_SO3

__all__ = [
    "VoidIntervals",
    "Segment",
    "LimitConfig",
    "EnergyBreakdown1D",
    "SegmentResult",
    "BoundaryClamps",
    "MinimizeResult",
    "eval_E0",
    "minimize_segment",
    "minimize_E0",
    "straight_config",
    "arc_config",
    "helix_config",
    "so3_V",
    "enumerate_placements",
    "COINCIDENCE_TOL",
]

COINCIDENCE_TOL = 1e-9
SO3_TOL = 1e-10
DEFAULT_SAMPLES = 512


def so3_V(w) -> np.ndarray:
    """``int_0^1 exp(t hat(w)) dt`` (the left Jacobian of SO(3))."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    W = hat(w)
    small = theta < 1e-5
    t = np.where(small, 1.0, theta)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(t)) / t**2)
    c = np.where(small, 1.0 / 6.0 - theta**2 / 120.0, (t - np.sin(t)) / t**3)
    return np.eye(3) + b[..., None, None] * W + c[..., None, None] * (W @ W)


@dataclass(frozen=True)
class VoidIntervals:
    """Sorted, pairwise disjoint open intervals; touching intervals are merged."""

    intervals: tuple = ()

    def __post_init__(self):
        ivs = sorted((float(a), float(b)) for a, b in self.intervals)
        merged: list[tuple[float, float]] = []
        for a, b in ivs:
            if not a < b:
                raise InvalidConfigError(f"void interval ({a}, {b}) is empty")
            if merged and a < merged[-1][1]:
                raise InvalidConfigError("void intervals overlap")
            if merged and a == merged[-1][1]:
                merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def contains(self, s) -> np.ndarray:
        """Membership in the open void set, vectorized."""
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (s > a) & (s < b)
        return out

    def endpoints(self) -> list[float]:
        return [x for ab in self.intervals for x in ab]

    def interior_endpoints(self, L: float) -> list[float]:
        return [x for x in self.endpoints() if 0.0 < x < L]

    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)


@dataclass
class Segment:
    """Frame samples ``R`` (k+1, 3, 3) and midline ``y`` (k+1, 3) on ``[start, end]``."""

    start: float
    end: float
    R: np.ndarray
    y: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Segment):
            return NotImplemented
        return (self.start == other.start and self.end == other.end
                and np.array_equal(self.R, other.R) and np.array_equal(self.y, other.y))

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not self.end > self.start:
            raise InvalidConfigError("segment must have positive length")
        if self.R.ndim != 3 or self.R.shape[1:] != (3, 3) or len(self.R) < 2:
            raise InvalidConfigError("segment needs at least two 3x3 frame samples")
        if self.y.shape != (len(self.R), 3):
            raise InvalidConfigError("midline samples must match frame samples")

    @classmethod
    def from_frames(cls, start: float, end: float, R, y0=None) -> "Segment":
        R = np.asarray(R, dtype=float)
        k = len(R) - 1
        ds = (end - start) / k
        y0 = np.array([start, 0.0, 0.0]) if y0 is None else np.asarray(y0, dtype=float)
        w = logm_so3(np.einsum("nji,njk->nik", R[:-1], R[1:]))
        steps = ds * np.einsum("nij,njk,k->ni", R[:-1], so3_V(w), np.array([1.0, 0.0, 0.0]))
        y = np.vstack([y0, y0 + np.cumsum(steps, axis=0)])
        return cls(start, end, R, y)

    @property
    def n_intervals(self) -> int:
        return len(self.R) - 1

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def ds(self) -> float:
        return self.length / self.n_intervals

    @property
    def s(self) -> np.ndarray:
        return np.linspace(self.start, self.end, len(self.R))

    def increments(self) -> np.ndarray:
        """Rotation vectors ``log(R_i^T R_{i+1})``, shape (k, 3)."""
        return logm_so3(np.einsum("nji,njk->nik", self.R[:-1], self.R[1:]))

    def curvature(self) -> np.ndarray:
        """Piecewise constant ``unhat(R^T R')`` per sample interval, shape (k, 3)."""
        return self.increments() / self.ds

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        i = np.clip(np.floor((s - self.start) / self.ds).astype(int), 0, self.n_intervals - 1)
        tau = (s - (self.start + i * self.ds)) / self.ds
        return i, tau

    def frame_at(self, s) -> np.ndarray:
        """Geodesically interpolated frame; extrapolates past the ends."""
        i, tau = self._locate(s)
        w = self.increments()[i]
        return self.R[i] @ expm_so3(tau[..., None] * w)

    def position_at(self, s) -> np.ndarray:
        i, tau = self._locate(s)
        w = self.increments()[i]
        V = so3_V(tau[..., None] * w)
        e1 = np.array([1.0, 0.0, 0.0])
        return self.y[i] + (tau * self.ds)[..., None] * np.einsum("...ij,...jk,k->...i", self.R[i], V, e1)

    def curvature_at(self, s) -> np.ndarray:
        i, _ = self._locate(s)
        return self.curvature()[i]

    def so3_defect(self) -> float:
        RtR = np.einsum("nji,njk->nik", self.R, self.R)
        dets = np.linalg.det(self.R)
        return float(max(np.max(np.abs(RtR - np.eye(3))), np.max(np.abs(dets - 1.0))))

    def transformed(self, Q, c) -> "Segment":
        Q = np.asarray(Q, dtype=float)
        return Segment(self.start, self.end, Q @ self.R, self.y @ Q.T + np.asarray(c, dtype=float))


@dataclass
class LimitConfig:
    """A framed midline with breakpoints and void intervals on ``(0, L)``."""

    L: float
    segments: list
    breakpoints: tuple = ()
    voids: VoidIntervals = field(default_factory=VoidIntervals)
    M: float | None = None

    def __post_init__(self):
        self.L = float(self.L)
        if not self.L > 0:
            raise InvalidConfigError("rod length must be positive")
        if not isinstance(self.voids, VoidIntervals):
            self.voids = VoidIntervals(tuple(self.voids))
        self.breakpoints = tuple(sorted(float(t) for t in self.breakpoints))
        if self.M is None:
            self.M = 10.0 * self.L
        self.M = float(self.M)

    def material_intervals(self) -> list[tuple[float, float]]:
        """Maximal subintervals of ``(0, L)`` outside ``I`` and between breakpoints."""
        cuts = sorted({0.0, self.L, *self.breakpoints, *self.voids.endpoints()})
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= COINCIDENCE_TOL:
                continue
            if self.voids.contains(0.5 * (a + b)):
                continue
            out.append((a, b))
        return out

    def validate(self) -> None:
        """Raise :class:`InvalidConfigError` if a structural invariant fails."""
        for t in self.breakpoints:
            if not 0.0 < t < self.L:
                raise InvalidConfigError(f"breakpoint {t} outside (0, L)")
            if self.voids.contains(t):
                raise InvalidConfigError(f"breakpoint {t} lies inside a void interval")
        for a, b in self.voids:
            if a < 0.0 or b > self.L:
                raise InvalidConfigError("void interval outside [0, L]")
        expected = self.material_intervals()
        if len(expected) != len(self.segments):
            raise InvalidConfigError(
                f"expected {len(expected)} material segments, got {len(self.segments)}"
            )
        for (a, b), seg in zip(expected, self.segments):
            if abs(seg.start - a) > 1e-12 * max(1.0, self.L) or abs(seg.end - b) > 1e-12 * max(1.0, self.L):
                raise InvalidConfigError(f"segment [{seg.start}, {seg.end}] does not match [{a}, {b}]")
            if seg.so3_defect() > SO3_TOL:
                raise InvalidConfigError("frame samples leave SO(3)")
            rebuilt = Segment.from_frames(seg.start, seg.end, seg.R, seg.y[0])
            if np.max(np.abs(rebuilt.y - seg.y)) > 1e-9 * max(1.0, self.L):
                raise InvalidConfigError("midline is not the integral of R e1")
        if self.sup_norm() > self.M:
            raise InvalidConfigError(f"|y| exceeds the bound M = {self.M}")

    def sup_norm(self) -> float:
        vals = [np.max(np.abs(seg.y)) for seg in self.segments]
        for a, b in self.voids:
            vals.append(max(abs(a), abs(b)))
        return float(max(vals)) if vals else 0.0

    def segment_at(self, s: float) -> Segment | None:
        for seg in self.segments:
            if seg.start - COINCIDENCE_TOL <= s <= seg.end + COINCIDENCE_TOL:
                return seg
        return None

    def frame_at(self, s) -> np.ndarray:
        """Frame at scalar or array positions; the identity inside voids."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.tile(np.eye(3), (len(s), 1, 1))
        for seg in self.segments:
            m = (s >= seg.start) & (s <= seg.end) & ~self.voids.contains(s)
            if np.any(m):
                out[m] = seg.frame_at(s[m])
        return out

    def transformed(self, Q, c) -> "LimitConfig":
        """Rigid motion ``(Q y + c, Q R)``; only meaningful without voids."""
        return LimitConfig(
            self.L,
            [seg.transformed(Q, c) for seg in self.segments],
            self.breakpoints,
            self.voids,
            self.M,
        )

    def collapsed_breakpoints(self) -> list[float]:
        ends = self.voids.endpoints()
        return [t for t in self.breakpoints if all(abs(t - e) > COINCIDENCE_TOL for e in ends)]


@dataclass(frozen=True)
class EnergyBreakdown1D:
    elastic: float
    void_endpoints: int
    collapsed: int
    surface_weight: float = 1.0

    @property
    def total(self) -> float:
        return self.elastic + self.surface_weight * (self.void_endpoints + self.collapsed)


def eval_E0(cfg: LimitConfig, B: Q2Matrix, surface_weight: float = 1.0) -> EnergyBreakdown1D:
    """Evaluate the limit energy; ``surface_weight`` is the anisotropic prefactor."""
    elastic = 0.0
    for seg in cfg.segments:
        if seg.so3_defect() > SO3_TOL:
            raise InvalidConfigError("frame samples leave SO(3)")
        w = seg.increments()
        elastic += 0.5 * float(np.sum(B(w))) / seg.ds
    n_ends = len(cfg.voids.interior_endpoints(cfg.L))
    collapsed = 2 * len(cfg.collapsed_breakpoints())
    return EnergyBreakdown1D(elastic, n_ends, collapsed, surface_weight)


# ---------------------------------------------------------------------------
# per-segment minimization


def _jr_inv(w):
    """Inverse right Jacobian of SO(3), vectorized over (..., 3)."""
    theta = np.linalg.norm(w, axis=-1)
    W = hat(w)
    small = theta < 1e-4
    t = np.where(small, 1.0, theta)
    coef = np.where(small, 1.0 / 12.0 + theta**2 / 720.0,
                    1.0 / t**2 - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t)))
    return np.eye(3) + 0.5 * W + coef[..., None, None] * (W @ W)


def _chain_energy(R, B, ds):
    w = logm_so3(np.einsum("nji,njk->nik", R[:-1], R[1:]))
    return 0.5 * float(np.sum(B(w))) / ds, w


def _chain_gradient(w, B, ds, k):
    Bw = w @ B.B.T  # B symmetric
    Jr = _jr_inv(w)
    Jl = np.swapaxes(Jr, -1, -2)  # inverse left Jacobian
    g = np.zeros((k + 1, 3))
    g[1:] += np.einsum("nji,nj->ni", Jr, Bw) / ds
    g[:-1] -= np.einsum("nji,nj->ni", Jl, Bw) / ds
    return g


@dataclass
class SegmentResult:
    R: np.ndarray
    energy: float
    initial_energy: float
    converged: bool
    iterations: int
    grad_norm: float


def _interpolated_init(left, right, k):
    t = np.linspace(0.0, 1.0, k + 1)[:, None, None]
    return project_SO3((1.0 - t) * left + t * right)


def minimize_segment(
    left_frame,
    right_frame,
    length: float,
    B: Q2Matrix,
    n_samples: int = 64,
    init=None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> SegmentResult:
    """Minimize ``1/2 int Q2(R^T R')`` over frame fields on ``[0, length]``.

    ``left_frame``/``right_frame`` are rotations or ``None`` (free end). The
    iteration is Riemannian gradient descent on the product of rotation groups
    with updates ``R_j <- R_j exp(tau hat(d_j))``; the descent direction is the
    gradient taken in the discrete H^1 metric ``(Laplacian kron B)/ds``, which
    keeps the iteration count independent of ``n_samples``. Armijo backtracking
    picks ``tau``. Without any clamp the minimum is any constant field and the
    identity (or the first ``init`` sample) is returned.
    """
    if not length > 0:
        raise InvalidInputError("segment length must be positive")
    k = int(n_samples)
    if k < 1:
        raise InvalidInputError("need at least one sample interval")
    ds = length / k
    if init is not None:
        R = np.array(init, dtype=float)
    elif left_frame is not None and right_frame is not None:
        R = _interpolated_init(np.asarray(left_frame, float), np.asarray(right_frame, float), k)
    else:
        base = left_frame if left_frame is not None else right_frame
        base = np.eye(3) if base is None else np.asarray(base, float)
        R = np.tile(base, (k + 1, 1, 1))
    if left_frame is not None:
        R[0] = left_frame
    if right_frame is not None:
        R[-1] = right_frame
    E, w = _chain_energy(R, B, ds)
    E0 = E
    if left_frame is None and right_frame is None:
        R = np.tile(R[0], (k + 1, 1, 1))
        return SegmentResult(R, 0.0, E0, True, 0, 0.0)

    free = np.ones(k + 1, dtype=bool)
    if left_frame is not None:
        free[0] = False
    if right_frame is not None:
        free[-1] = False
    idx = np.nonzero(free)[0]
    # path-graph Laplacian restricted to free nodes (Dirichlet at clamps)
    deg = np.zeros(k + 1)
    deg[:-1] += 1.0
    deg[1:] += 1.0
    lap = sp.diags([-np.ones(k), deg, -np.ones(k)], [-1, 0, 1], format="csr")
    lap = lap[idx][:, idx]
    P = (sp.kron(lap, sp.csr_matrix(B.B)) / ds).tocsc()
    solve = spla.factorized(P)

    converged = False
    gnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = _chain_gradient(w, B, ds, k)
        g[~free] = 0.0
        gnorm = float(np.linalg.norm(g))
        if gnorm < tol:
            converged = True
            break
        d = np.zeros_like(g)
        d[idx] = -solve(g[idx].ravel()).reshape(-1, 3)
        slope = float(np.sum(g * d))
        tau = 1.0
        while True:
            Rn = R @ expm_so3(tau * d)
            En, wn = _chain_energy(Rn, B, ds)
            if En <= E + 1e-4 * tau * slope or tau < 1e-12:
                break
            tau *= 0.5
        if tau < 1e-12 and En > E:
            break
        R, E, w = Rn, En, wn
        if it % 50 == 0:
            R[free] = project_SO3(R[free])
            E, w = _chain_energy(R, B, ds)
    if not converged:
        warnings.warn(
            f"minimize_segment stopped at |grad| = {gnorm:.3e} after {it} iterations",
            RuntimeWarning,
            stacklevel=2,
        )
    return SegmentResult(R, E, E0, converged, it, gnorm)


# ---------------------------------------------------------------------------
# global search over break/void placements


@dataclass(frozen=True)
class BoundaryClamps:
    """Clamped frames (and optionally positions) at both ends of ``(0, L)``."""

    left: np.ndarray
    right: np.ndarray
    y_left: np.ndarray | None = None
    y_right: np.ndarray | None = None


@dataclass
class MinimizeResult:
    config: LimitConfig
    energy: EnergyBreakdown1D
    explored: list  # (placement, total or None if infeasible)

    @property
    def total(self) -> float:
        return self.energy.total


def _placements(cands, max_disc):
    """Yield (breaks, voids) over labelings of the candidate positions.

    Voids run between two candidates; breaks cost one discontinuity, voids two.
    """
    c = len(cands)
    out = []

    def rec(pos, breaks, voids, open_at, used):
        if pos == c:
            if open_at is None:
                out.append((tuple(breaks), tuple(voids)))
            return
        p = cands[pos]
        if open_at is None:
            rec(pos + 1, breaks, voids, None, used)
            if used + 1 <= max_disc:
                rec(pos + 1, breaks + [p], voids, None, used + 1)
            if used + 2 <= max_disc:
                rec(pos + 1, breaks, voids, p, used + 2)
        else:
            rec(pos + 1, breaks, voids, open_at, used)
            rec(pos + 1, breaks, voids + [(open_at, p)], None, used)

    rec(0, [], [], None, 0)
    return out


def minimize_E0(
    clamps: BoundaryClamps,
    L: float,
    B: Q2Matrix,
    candidates=(),
    max_discontinuities: int = 2,
    n_samples: int = DEFAULT_SAMPLES,
    M: float | None = None,
    position_tol: float = 1e-6,
) -> MinimizeResult:
    """Exhaustive search over breaks and voids placed on ``candidates``.

    Returns the least-energy explored configuration: an upper bound for the
    minimum over the candidate set. Each material piece is solved with
    :func:`minimize_segment`; pieces touching an end inherit its clamp. If the
    clamps fix both end positions, an unbroken rod must reach ``y_right``.
    """
    cands = sorted(float(p) for p in candidates)
    if any(not 0.0 < p < L for p in cands):
        raise InvalidInputError("candidate positions must lie in (0, L)")
    if max_discontinuities > 6:
        raise InvalidInputError("max_discontinuities is limited to 6")
    M = 10.0 * L if M is None else M
    left = np.asarray(clamps.left, dtype=float)
    right = np.asarray(clamps.right, dtype=float)
    y_left = np.zeros(3) if clamps.y_left is None else np.asarray(clamps.y_left, dtype=float)

    cache: dict = {}

    def piece(a, b):
        key = (a == 0.0, b == L, round(b - a, 14))
        if key not in cache:
            lf = left if a == 0.0 else None
            rf = right if b == L else None
            ns = max(8, int(round(n_samples * (b - a) / L)))
            cache[key] = minimize_segment(lf, rf, b - a, B, n_samples=ns)
        return cache[key]

    best = None
    explored = []
    for breaks, voids in _placements(cands, max_discontinuities):
        trial = LimitConfig(L, [], breaks, VoidIntervals(voids), M)
        segs = []
        for a, b in trial.material_intervals():
            res = piece(a, b)
            if a == 0.0:
                y0 = y_left
            else:
                y0 = np.array([a, 0.0, 0.0])
            seg = Segment.from_frames(a, b, res.R, y0)
            if b == L and a != 0.0 and clamps.y_right is not None:
                seg = Segment(a, b, seg.R, seg.y - seg.y[-1] + np.asarray(clamps.y_right, float))
            segs.append(seg)
        trial.segments = segs
        feasible = True
        decoupled = bool(breaks or voids)
        if not decoupled and clamps.y_right is not None:
            gap = np.linalg.norm(segs[-1].y[-1] - np.asarray(clamps.y_right, float))
            feasible = gap <= position_tol * max(1.0, L)
        if feasible and trial.sup_norm() > M:
            feasible = False
        if not feasible:
            explored.append(((breaks, voids), None))
            continue
        energy = eval_E0(trial, B)
        explored.append(((breaks, voids), energy.total))
        if best is None or energy.total < best[1].total - 1e-12:
            best = (trial, energy)
    if best is None:
        raise InfeasibleError("no admissible placement on the candidate grid satisfies the clamps")
    return MinimizeResult(best[0], best[1], explored)


# ---------------------------------------------------------------------------
# fixtures


def straight_config(L: float = 1.0, breakpoints=(), voids=(), n_samples: int = DEFAULT_SAMPLES, M=None) -> LimitConfig:
    """Straight rod ``y(s) = s e1`` with identity frames."""
    cfg = LimitConfig(L, [], breakpoints, VoidIntervals(tuple(voids)), M)
    segs = []
    for a, b in cfg.material_intervals():
        k = max(2, int(round(n_samples * (b - a) / L)))
        segs.append(Segment.from_frames(a, b, np.tile(np.eye(3), (k + 1, 1, 1)), [a, 0.0, 0.0]))
    cfg.segments = segs
    return cfg


def _constant_curvature_config(L, a, breakpoints, voids, n_samples, M):
    cfg = LimitConfig(L, [], breakpoints, VoidIntervals(tuple(voids)), M)
    a = np.asarray(a, dtype=float)
    segs = []
    y0 = np.zeros(3)
    for lo, hi in cfg.material_intervals():
        k = max(2, int(round(n_samples * (hi - lo) / L)))
        s = np.linspace(lo, hi, k + 1)
        R = expm_so3((s - lo)[:, None] * a[None, :])
        seg = Segment.from_frames(lo, hi, R, y0 if lo == 0.0 else [lo, 0.0, 0.0])
        segs.append(seg)
    cfg.segments = segs
    return cfg


def arc_config(L: float = 1.0, kappa: float = 1.0, axis: int = 2, breakpoints=(), voids=(),
               n_samples: int = DEFAULT_SAMPLES, M=None) -> LimitConfig:
    """Circular arc with curvature ``kappa`` about ``e_{axis+1}`` (default ``e3``)."""
    a = np.zeros(3)
    a[axis] = kappa
    return _constant_curvature_config(L, a, breakpoints, voids, n_samples, M)


def helix_config(L: float = 1.0, torsion: float = 1.0, bending: float = 1.0, breakpoints=(),
                 voids=(), n_samples: int = DEFAULT_SAMPLES, M=None) -> LimitConfig:
    """Constant twist plus bending about ``e3``: the midline is a helix."""
    return _constant_curvature_config(L, [torsion, 0.0, bending], breakpoints, voids, n_samples, M)


def enumerate_placements(candidates, max_discontinuities):
    """Public view of the placement enumeration used by :func:`minimize_E0`."""
    return _placements(sorted(candidates), max_discontinuities)

