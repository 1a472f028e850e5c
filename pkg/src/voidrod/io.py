"""Plain-text block formats for limit configurations, void sets and 3D deformations.

All floats are written with 17 significant digits, so ``parse(dump(x)) == x``
and ``dump(parse(text)) == text`` for text produced by ``dump``.

LimitConfig::

    # voidrod limit-config v1
    L <L>
    M <M>
    breakpoints <m> <t_1> ... <t_m>
    voids <k>
    void <a> <b>                      (k lines)
    segments <count>
    segment <start> <end> <samples>
    <s> <R00> <R01> ... <R22> <y0> <y1> <y2>   (samples rows)
    end

VoidSet::

    # voidrod void-set v1
    ball <cx> <cy> <cz> <r>
    slab <x_lo> <x_hi>
    box <lx> <ly> <lz> <hx> <hy> <hz>
    mask <n1> <n2> <n3>               (optional, then n1*n2 rows of n3 digits 0/1)
    end

Deformation3::

    # voidrod deformation3 v1
    grid <L> <h> <n1> <n2>
    <i> <j> <k> <y0> <y1> <y2>        ((n1+1)(n2+1)(n3+1) rows, C order)
    end
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .rod1d import LimitConfig, Segment, VoidIntervals
from .rod3d import Ball, Box, Deformation3, RodDomain, Slab, VoidSet

__all__ = [
    "fmt",
    "dump_limit_config",
    "parse_limit_config",
    "dump_void_set",
    "parse_void_set",
    "dump_deformation",
    "parse_deformation",
    "read_limit_config",
    "write_text",
]

LC_MAGIC = "# voidrod limit-config v1"
VS_MAGIC = "# voidrod void-set v1"
DF_MAGIC = "# voidrod deformation3 v1"


def fmt(x) -> str:
    """Float with 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


def _row(values) -> str:
    return " ".join(fmt(v) for v in values)


class _Lines:
    def __init__(self, text: str, magic: str):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        # leading comment lines (output headers) are skipped
        start = 0
        while start < len(lines) and lines[start].startswith("#") and lines[start].strip() != magic:
            start += 1
        if start >= len(lines):
            raise InvalidInputError(f"missing format line {magic!r}")
        self.lines = lines
        self.pos = start + 1

    def next(self, keyword: str | None = None) -> list[str]:
        if self.pos >= len(self.lines):
            raise InvalidInputError("unexpected end of input")
        toks = self.lines[self.pos].split()
        self.pos += 1
        if keyword is not None and toks[0] != keyword:
            raise InvalidInputError(f"line {self.pos}: expected {keyword!r}, got {toks[0]!r}")
        return toks


def _floats(toks, n=None):
    try:
        vals = [float(t) for t in toks]
    except ValueError as exc:
        raise InvalidInputError(f"malformed number in {' '.join(toks)!r}") from exc
    if n is not None and len(vals) != n:
        raise InvalidInputError(f"expected {n} numbers, got {len(vals)}")
    return vals


# ---------------------------------------------------------------------------


def dump_limit_config(cfg: LimitConfig) -> str:
    out = [LC_MAGIC, f"L {fmt(cfg.L)}", f"M {fmt(cfg.M)}"]
    out.append(" ".join(["breakpoints", str(len(cfg.breakpoints))] + [fmt(t) for t in cfg.breakpoints]))
    out.append(f"voids {len(cfg.voids)}")
    out += [f"void {fmt(a)} {fmt(b)}" for a, b in cfg.voids]
    out.append(f"segments {len(cfg.segments)}")
    for seg in cfg.segments:
        out.append(f"segment {fmt(seg.start)} {fmt(seg.end)} {len(seg.R)}")
        s = seg.s
        for k in range(len(seg.R)):
            out.append(_row([s[k], *seg.R[k].ravel(), *seg.y[k]]))
    out.append("end")
    return "\n".join(out) + "\n"


def parse_limit_config(text: str) -> LimitConfig:
    lines = _Lines(text, LC_MAGIC)
    L = _floats(lines.next("L")[1:], 1)[0]
    M = _floats(lines.next("M")[1:], 1)[0]
    toks = lines.next("breakpoints")
    m = int(toks[1])
    bps = _floats(toks[2:], m)
    k = int(lines.next("voids")[1])
    voids = [tuple(_floats(lines.next("void")[1:], 2)) for _ in range(k)]
    nseg = int(lines.next("segments")[1])
    segs = []
    for _ in range(nseg):
        toks = lines.next("segment")
        start, end = _floats(toks[1:3], 2)
        ns = int(toks[3])
        rows = np.array([_floats(lines.next(), 13) for _ in range(ns)])
        segs.append(Segment(start, end, rows[:, 1:10].reshape(-1, 3, 3), rows[:, 10:13]))
    lines.next("end")
    return LimitConfig(L, segs, tuple(bps), VoidIntervals(tuple(voids)), M)


def read_limit_config(path) -> LimitConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = parse_limit_config(fh.read())
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------


def dump_void_set(void: VoidSet) -> str:
    out = [VS_MAGIC]
    for p in void.primitives:
        if isinstance(p, Ball):
            out.append("ball " + _row([*p.center, p.r]))
        elif isinstance(p, Slab):
            out.append("slab " + _row([p.x_lo, p.x_hi]))
        elif isinstance(p, Box):
            out.append("box " + _row([*p.lo, *p.hi]))
        else:
            raise InvalidInputError(f"unknown primitive {p!r}")
    if void.voxel_mask is not None:
        n1, n2, n3 = void.voxel_mask.shape
        out.append(f"mask {n1} {n2} {n3}")
        for i in range(n1):
            for j in range(n2):
                out.append("".join("1" if v else "0" for v in void.voxel_mask[i, j]))
    out.append("end")
    return "\n".join(out) + "\n"


def parse_void_set(text: str) -> VoidSet:
    lines = _Lines(text, VS_MAGIC)
    prims = []
    mask = None
    while True:
        toks = lines.next()
        kw = toks[0]
        if kw == "end":
            break
        if kw == "ball":
            v = _floats(toks[1:], 4)
            prims.append(Ball(tuple(v[:3]), v[3]))
        elif kw == "slab":
            v = _floats(toks[1:], 2)
            prims.append(Slab(v[0], v[1]))
        elif kw == "box":
            v = _floats(toks[1:], 6)
            prims.append(Box(tuple(v[:3]), tuple(v[3:])))
        elif kw == "mask":
            n1, n2, n3 = (int(t) for t in toks[1:4])
            rows = []
            for _ in range(n1 * n2):
                row = lines.next()[0]
                if len(row) != n3 or set(row) - {"0", "1"}:
                    raise InvalidInputError("malformed mask row")
                rows.append([c == "1" for c in row])
            mask = np.array(rows, dtype=bool).reshape(n1, n2, n3)
        else:
            raise InvalidInputError(f"unknown void-set keyword {kw!r}")
    return VoidSet(prims, mask)


# ---------------------------------------------------------------------------


def dump_deformation(defo: Deformation3) -> str:
    dom = defo.dom
    out = [DF_MAGIC, f"grid {fmt(dom.L)} {fmt(dom.h)} {dom.n1} {dom.n2}"]
    n1, n2, n3 = (n + 1 for n in dom.shape)
    y = defo.y
    for i in range(n1):
        for j in range(n2):
            for k in range(n3):
                out.append(f"{i} {j} {k} " + _row(y[i, j, k]))
    out.append("end")
    return "\n".join(out) + "\n"


def parse_deformation(text: str) -> Deformation3:
    lines = _Lines(text, DF_MAGIC)
    toks = lines.next("grid")
    L, h = _floats(toks[1:3], 2)
    dom = RodDomain(L, h, int(toks[3]), int(toks[4]))
    shape = tuple(n + 1 for n in dom.shape)
    n = int(np.prod(shape))
    rows = [lines.next() for _ in range(n)]
    lines.next("end")
    idx = np.array([[int(t) for t in r[:3]] for r in rows])
    expected = np.stack(np.unravel_index(np.arange(n), shape), axis=1)
    if not np.array_equal(idx, expected):
        raise InvalidInputError("deformation rows must be listed in C order")
    y = np.array([_floats(r[3:], 3) for r in rows]).reshape(*shape, 3)
    return Deformation3(dom, y)


def write_text(path, text: str, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(header)
        fh.write(text)
