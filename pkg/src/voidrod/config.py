"""Experiment configuration: ``[section]`` headers with ``key = value`` lines.

Grammar (comments start with ``#`` or ``;``; numbers accept fractions such
as ``1/8``; lists are comma separated)::

    [material]     kind, lambda, mu
    [geometry]     L, M, T, rho, c_T
    [mesh]         cell_n, cell_refinement, rod_samples, n2
    [study]        h_list, kappa_exponent, validate_regime, corrector
    [input]        limit_config, fixture
    [rod1d]        left_frame, right_frame, y_left, y_right, candidates, max_discontinuities
    [isoperimetry] dims, mode, seed, samples, threshold, C_hat
    [output]       dir

Every key is optional; missing keys take the defaults of ``ExperimentConfig``.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .material import MaterialKind
from .rod3d import DEFAULT_KAPPA_EXPONENT, RHO0

__all__ = ["ExperimentConfig", "load_config", "parse_config", "parse_number", "parse_list", "REGIME_BOUND"]

#: The curvature weight must satisfy kappa_h h^(-52/25) -> infinity.
REGIME_BOUND = 52.0 / 25.0

_KEYS = {
    "material": {"kind": "kind", "lambda": "lam", "mu": "mu"},
    "geometry": {"L": "L", "M": "M", "T": "T", "rho": "rho", "c_T": "c_T"},
    "mesh": {"cell_n": "cell_n", "cell_refinement": "cell_refinement",
             "rod_samples": "rod_samples", "n2": "n2"},
    "study": {"h_list": "h_list", "kappa_exponent": "kappa_exponent",
              "validate_regime": "validate_regime", "corrector": "corrector"},
    "input": {"limit_config": "limit_config", "fixture": "fixture"},
    "rod1d": {"left_frame": "left_frame", "right_frame": "right_frame", "y_left": "y_left",
              "y_right": "y_right", "candidates": "candidates",
              "max_discontinuities": "max_discontinuities"},
    "isoperimetry": {"dims": "dims", "mode": "iso_mode", "seed": "seed", "samples": "samples",
                     "threshold": "threshold", "C_hat": "C_hat"},
    "output": {"dir": "output_dir"},
}


def parse_number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_list(text: str) -> list[float]:
    return [parse_number(t) for t in text.split(",") if t.strip()]


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def _parse_vector(text: str):
    v = parse_list(text.replace(" ", ",")) if "," not in text else parse_list(text)
    if len(v) != 3:
        raise ConfigError(f"expected three numbers, got {text!r}")
    return tuple(v)


def _parse_dims(text: str):
    try:
        dims = tuple(int(t) for t in text.lower().replace(",", "x").split("x") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"malformed dims {text!r}") from exc
    if not dims:
        raise ConfigError("empty dims")
    return dims


@dataclass
class ExperimentConfig:
    kind: MaterialKind = MaterialKind.StVenantKirchhoff
    lam: float = 1.0
    mu: float = 1.0
    L: float = 1.0
    M: float | None = None
    T: int = 10
    rho: float = RHO0
    c_T: float = 4.0
    cell_n: int = 64
    cell_refinement: tuple = (8, 16, 32, 64, 128)
    rod_samples: int = 512
    n2: int = 8
    h_list: tuple = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
    kappa_exponent: float = DEFAULT_KAPPA_EXPONENT
    validate_regime: bool = True
    corrector: bool = True
    limit_config: str | None = None
    fixture: str = "arc"
    left_frame: tuple = (0.0, 0.0, 0.0)  # rotation vectors
    right_frame: tuple = (0.0, 0.0, 0.0)
    y_left: tuple | None = None
    y_right: tuple | None = None
    candidates: tuple = ()
    max_discontinuities: int = 2
    dims: tuple = (10, 2)
    iso_mode: str = "exhaustive"
    seed: int = 0
    samples: int = 10_000
    threshold: int = 1
    C_hat: float | None = None
    output_dir: str = "."
    source: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    @property
    def M_value(self) -> float:
        return 10.0 * self.L if self.M is None else self.M

    def validate(self) -> None:
        if self.mu <= 0 or 3 * self.lam + 2 * self.mu <= 0:
            raise ConfigError("material needs mu > 0 and 3 lambda + 2 mu > 0")
        if self.L <= 0:
            raise ConfigError("L must be positive")
        if self.M is not None and self.M <= 0:
            raise ConfigError("M must be positive")
        if not 0.0 < self.rho <= RHO0 * (1 + 1e-15):
            raise ConfigError(f"rho = {self.rho} outside (0, 1 - (19/20)^(1/3)] = (0, {RHO0:.17g}]")
        if self.T < 2:
            raise ConfigError("T must be an integer >= 2")
        hs = list(self.h_list)
        if not hs or any(not 0.0 < h < 1.0 for h in hs):
            raise ConfigError("h list entries must lie in (0, 1)")
        if any(b >= a for a, b in zip(hs[:-1], hs[1:])):
            raise ConfigError("h list must be strictly decreasing")
        if self.validate_regime and not self.kappa_exponent < REGIME_BOUND:
            raise ConfigError(
                f"kappa exponent {self.kappa_exponent} must be < 52/25 so that kappa_h h^(-52/25) diverges"
            )
        if self.cell_n < 1 or self.n2 < 1 or self.rod_samples < 2:
            raise ConfigError("mesh sizes must be positive")
        if self.iso_mode not in ("exhaustive", "random"):
            raise ConfigError("isoperimetry mode must be exhaustive or random")
        if self.threshold not in (1, 2):
            raise ConfigError("isoperimetry threshold must be 1 or 2")
        if not 0 <= self.max_discontinuities <= 6:
            raise ConfigError("max_discontinuities must lie in 0..6")

    def canonical(self) -> str:
        """Deterministic text of all resolved values (input of the config hash)."""
        out = []
        for f in fields(self):
            if f.name == "source":
                continue
            v = getattr(self, f.name)
            if isinstance(v, MaterialKind):
                v = v.value
            elif isinstance(v, float):
                v = format(v, ".17g")
            elif isinstance(v, tuple):
                v = ",".join(format(x, ".17g") if isinstance(x, float) else str(x) for x in v)
            out.append(f"{f.name}={v}")
        return "\n".join(out) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keys are case sensitive (L, M, T)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    kw: dict = {}
    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            name = _KEYS[section][key]
            kw[name] = _convert(name, raw, base_dir)
    try:
        return ExperimentConfig(**kw, source=text)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _convert(name: str, raw: str, base_dir: Path | None):
    raw = raw.strip()
    if name == "kind":
        try:
            return MaterialKind(raw)
        except ValueError as exc:
            raise ConfigError(f"unknown material kind {raw!r}") from exc
    if name in ("T", "cell_n", "rod_samples", "n2", "max_discontinuities", "seed", "samples", "threshold"):
        return _parse_int(raw)
    if name == "cell_refinement":
        return tuple(_parse_int(t) for t in raw.split(","))
    if name in ("h_list", "candidates"):
        return tuple(parse_list(raw))
    if name in ("validate_regime", "corrector"):
        return _parse_bool(raw)
    if name in ("left_frame", "right_frame", "y_left", "y_right"):
        return _parse_vector(raw)
    if name == "dims":
        return _parse_dims(raw)
    if name in ("limit_config",):
        p = Path(raw)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return str(p)
    if name in ("fixture", "iso_mode", "output_dir"):
        return raw
    return parse_number(raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, path.parent)
