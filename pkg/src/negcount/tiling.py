"""Measure-balanced adaptive partition of the unit square.

The partition splits the unit square Q into tiles that are either squares or
"steps" (a square with a smaller square, of side at most half, removed from
one corner).  A tile of size l (outer side length) is classified against the
local p-mass I = integral of V^p over the tile:

    large   if I >  c  * l^(2-2p)
    medium  if c' * l^(2-2p) < I <= c * l^(2-2p)
    small   if I <= c' * l^(2-2p)

with constants satisfying 4 c' 2^(2p-2) < c.  Refinement quarters every
large square; when exactly three quarters are small the fourth is shrunk
toward its corner until the complement's p-mass sits exactly on the large /
medium boundary, producing one medium step plus one leftover square.  Four
small quarters would contradict the constant inequality and raise.

The audit re-derives the counting guarantees of the construction: the
quantity 2L + 3M - S never decreases across splits, the final partition has
no large tiles, N <= 1 + 4M, the medium sizes satisfy sum(l_k^2) <= 4, M is
controlled by the L^p norm of V, and the tiles exactly cover Q.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BisectionStall, InvariantViolation, IterationBudgetExceeded
from .geometry import Rect
from .potentials import GridSampled, Potential, integrate

SMALL, MEDIUM, LARGE = "small", "medium", "large"


@dataclass(frozen=True)
class Square:
    x: float
    y: float
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError("square side must be positive")

    def rect(self) -> tuple[float, float, float, float]:
        return (self.x, self.x + self.side, self.y, self.y + self.side)

    def corners(self) -> list[tuple[float, float]]:
        return [(self.x, self.y), (self.x + self.side, self.y),
                (self.x, self.y + self.side),
                (self.x + self.side, self.y + self.side)]


@dataclass(frozen=True)
class Step:
    """outer square minus a removed corner square (side <= outer.side / 2)."""

    outer: Square
    removed: Square

    def __post_init__(self):
        o, r = self.outer, self.removed
        if r.side > o.side / 2 + 1e-12 * o.side:
            raise ValueError("removed square must have side <= half the outer")
        eps = 1e-9 * o.side
        shared = [c for c in o.corners() if any(
            abs(c[0] - rc[0]) <= eps and abs(c[1] - rc[1]) <= eps
            for rc in r.corners())]
        if not shared:
            raise ValueError("removed square must sit in a corner of the outer")


Shape = object   # Square | Step


@dataclass(frozen=True)
class Tile:
    shape: Shape
    label: str

    @property
    def size(self) -> float:
        return self.shape.side if isinstance(self.shape, Square) \
            else self.shape.outer.side

    def area(self) -> float:
        if isinstance(self.shape, Square):
            return self.shape.side ** 2
        return self.shape.outer.side ** 2 - self.shape.removed.side ** 2

    def rects(self) -> list[tuple[float, float, float, float]]:
        """Decomposition into axis-aligned rectangles (1 or 2)."""
        if isinstance(self.shape, Square):
            return [self.shape.rect()]
        o, r = self.shape.outer, self.shape.removed
        ox0, ox1, oy0, oy1 = o.rect()
        rx0, rx1, ry0, ry1 = r.rect()
        eps = 1e-9 * o.side
        # horizontal band not containing the notch, plus the remaining band
        if abs(ry0 - oy0) <= eps:      # notch at the bottom
            band = (ox0, ox1, ry1, oy1)
            rest = (ox0 if abs(rx0 - ox0) > eps else rx1,
                    ox1 if abs(rx1 - ox1) > eps else rx0, oy0, ry1)
        else:                          # notch at the top
            band = (ox0, ox1, oy0, ry0)
            rest = (ox0 if abs(rx0 - ox0) > eps else rx1,
                    ox1 if abs(rx1 - ox1) > eps else rx0, ry0, oy1)
        x0, x1, y0, y1 = rest
        return [band, (min(x0, x1), max(x0, x1), y0, y1)]


@dataclass
class Partition:
    tiles: list[Tile]
    counters_history: list[tuple[int, int, int]]
    p: float
    c: float
    c_prime: float
    sweeps: int = 0

    def counts(self) -> tuple[int, int, int]:
        L = sum(1 for t in self.tiles if t.label == LARGE)
        M = sum(1 for t in self.tiles if t.label == MEDIUM)
        S = sum(1 for t in self.tiles if t.label == SMALL)
        return (L, M, S)


def _check_constants(p: float, c: float, c_prime: float) -> None:
    if p <= 1:
        raise ValueError("need p > 1")
    if not (0 < c_prime < c):
        raise InvariantViolation("need 0 < c' < c")
    if not (4.0 * c_prime * 2.0 ** (2.0 * p - 2.0) < c):
        raise InvariantViolation(
            f"constants violate 4 c' 2^(2p-2) < c: "
            f"{4.0 * c_prime * 2.0 ** (2.0 * p - 2.0)} >= {c}")


def _rect_pmass(V: Potential, x0: float, x1: float, y0: float, y1: float,
                p: float) -> float:
    if isinstance(V, GridSampled):
        return V.integrate_pow_rect(x0, x1, y0, y1, p)
    return integrate(V, Rect(x0, x1, y0, y1), p, "one", rel_tol=1e-9)


def tile_pmass(V: Potential, shape: Shape, p: float) -> float:
    """Integral of V^p over a square or step."""
    if isinstance(shape, Square):
        return _rect_pmass(V, *shape.rect(), p)
    outer = _rect_pmass(V, *shape.outer.rect(), p)
    removed = _rect_pmass(V, *shape.removed.rect(), p)
    return max(outer - removed, 0.0)


def classify(V: Potential, shape: Shape, p: float, c: float,
             c_prime: float) -> str:
    """Type label of a tile; threshold ties classify downward."""
    size = shape.side if isinstance(shape, Square) else shape.outer.side
    mass = tile_pmass(V, shape, p)
    scale = size ** (2.0 - 2.0 * p)
    if mass > c * scale:
        return LARGE
    if mass > c_prime * scale:
        return MEDIUM
    return SMALL


def _quarters(sq: Square) -> list[Square]:
    h = sq.side / 2.0
    return [Square(sq.x, sq.y, h), Square(sq.x + h, sq.y, h),
            Square(sq.x, sq.y + h, h), Square(sq.x + h, sq.y + h, h)]


def _outer_corner_of_quarter(outer: Square, q: Square) -> tuple[float, float]:
    """The corner of the outer square contained in the quarter."""
    cx = outer.x if q.x == outer.x else outer.x + outer.side
    cy = outer.y if q.y == outer.y else outer.y + outer.side
    return (cx, cy)


def _corner_square(corner: tuple[float, float], outer: Square,
                   side: float) -> Square:
    cx, cy = corner
    x = cx if cx == outer.x else cx - side
    y = cy if cy == outer.y else cy - side
    return Square(x, y, side)


def _split_large(V: Potential, sq: Square, p: float, c: float,
                 c_prime: float) -> list[Tile]:
    """Split one large square per the three refinement cases."""
    quarters = _quarters(sq)
    labels = [classify(V, q, p, c, c_prime) for q in quarters]
    n_small = sum(1 for lb in labels if lb == SMALL)
    if n_small <= 2:
        return [Tile(q, lb) for q, lb in zip(quarters, labels)]
    if n_small == 4:
        raise InvariantViolation(
            "all four quarters small: the constants (c, c') or the tile "
            "integrals are inconsistent")
    # exactly 3 small quarters: shrink the non-small one toward its corner
    idx = labels.index(MEDIUM) if MEDIUM in labels else labels.index(LARGE)
    keep = quarters[idx]
    corner = _outer_corner_of_quarter(sq, keep)
    target = c * sq.side ** (2.0 - 2.0 * p)
    total = tile_pmass(V, sq, p)

    def complement_mass(side: float) -> float:
        notch = _corner_square(corner, sq, side)
        return max(total - tile_pmass(V, notch, p), 0.0)

    # complement mass decreases in the notch side; at side = l/2 it is
    # < target (three small quarters), at side -> 0 it tends to total > target
    lo, hi = 0.0, sq.side / 2.0
    if complement_mass(hi) > target:
        raise InvariantViolation(
            "three-small-quarter case with complement mass above the "
            "boundary; classification is inconsistent")
    side = hi
    ok = False
    for _ in range(60):
        side = 0.5 * (lo + hi)
        mass = complement_mass(side)
        if abs(mass - target) <= 1e-6 * target:
            ok = True
            break
        if mass > target:
            lo = side
        else:
            hi = side
    if not ok:
        mass = complement_mass(side)
        if abs(mass - target) > 1e-4 * target:
            raise BisectionStall(
                f"corner shrink did not reach the boundary mass: "
                f"{mass} vs {target}")
    notch = _corner_square(corner, sq, side)
    step = Step(sq, notch)
    leftover = Tile(notch, classify(V, notch, p, c, c_prime))
    return [Tile(step, MEDIUM), leftover]


def refine_once(V: Potential, part: Partition) -> Partition:
    """One sweep: every large square of the partition is split.

    Precondition: the partition contains at least one large tile.  Each
    individual split appends one (L, M, S) snapshot to the counter history.
    """
    larges = [t for t in part.tiles if t.label == LARGE]
    if not larges:
        raise ValueError("refine_once needs at least one large tile")
    tiles = list(part.tiles)
    history = list(part.counters_history)
    order = sorted(larges, key=lambda t: (t.size, t.shape.x
                   if isinstance(t.shape, Square) else t.shape.outer.x,
                   t.shape.y if isinstance(t.shape, Square)
                   else t.shape.outer.y))
    counts = list(part.counts())
    for t in order:
        if not isinstance(t.shape, Square):
            raise InvariantViolation("a large step tile should not exist")
        tiles.remove(t)
        new_tiles = _split_large(V, t.shape, part.p, part.c, part.c_prime)
        tiles.extend(new_tiles)
        counts[0] -= 1
        for nt in new_tiles:
            counts[{LARGE: 0, MEDIUM: 1, SMALL: 2}[nt.label]] += 1
        history.append(tuple(counts))
    return Partition(tiles, history, part.p, part.c, part.c_prime,
                     part.sweeps + 1)


def partition_square(V: Potential, p: float = 2.0, c: float = 0.25,
                     c_prime: float = 0.01, max_sweeps: int = 64,
                     domain: Optional[Square] = None) -> Partition:
    """Refine the unit square (or a given square) until no tile is large."""
    _check_constants(p, c, c_prime)
    root = domain if domain is not None else Square(0.0, 0.0, 1.0)
    first = Tile(root, classify(V, root, p, c, c_prime))
    part = Partition([first], [ {LARGE: (1, 0, 0), MEDIUM: (0, 1, 0),
                                 SMALL: (0, 0, 1)}[first.label] ],
                     p, c, c_prime)
    sweeps = 0
    while any(t.label == LARGE for t in part.tiles):
        if sweeps >= max_sweeps:
            raise IterationBudgetExceeded(
                f"partition did not settle in {max_sweeps} sweeps")
        part = refine_once(V, part)
        sweeps += 1
    return part


# --------------------------------------------------------------------------
# audit


@dataclass
class AuditReport:
    violations: list[str]
    n_tiles: int
    counts: tuple[int, int, int]
    medium_size_sum: float
    audit_constant: float
    lp_norm: float

    @property
    def passed(self) -> bool:
        return not self.violations


def audit(part: Partition, V: Potential, p: Optional[float] = None,
          area_tol: float = 1e-9) -> AuditReport:
    """Re-derive the counting guarantees of a finished partition."""
    p = part.p if p is None else p
    violations: list[str] = []
    # (i) 2L + 3M - S never decreases across recorded splits
    vals = [2 * L + 3 * M - S for (L, M, S) in part.counters_history]
    if any(b < a for a, b in zip(vals, vals[1:])):
        violations.append("counter invariant 2L+3M-S decreased during refinement")
    # (ii) no large tiles remain
    L, M, S = part.counts()
    if L != 0:
        violations.append(f"final partition contains {L} large tiles")
    # (iii) N <= 1 + 4M
    N = len(part.tiles)
    if N > 1 + 4 * M:
        violations.append(f"tile count {N} exceeds 1 + 4M = {1 + 4 * M}")
    # (iv) sum of medium sizes^2 <= 4
    msum = sum(t.size ** 2 for t in part.tiles if t.label == MEDIUM)
    if msum > 4.0 + 1e-12:
        violations.append(f"medium size sum {msum} exceeds 4")
    # (v) M <= C_audit * ||V||_p with C_audit = 4^(1/p') / c'^(1/p)
    p_conj = p / (p - 1.0)
    c_audit = 4.0 ** (1.0 / p_conj) * part.c_prime ** (-1.0 / p)
    root = _partition_hull(part)
    lp = _rect_pmass(V, *root, p) ** (1.0 / p)
    if M > c_audit * lp + 1e-9:
        violations.append(
            f"medium count {M} exceeds audit bound {c_audit * lp}")
    # (vi) exact cover: areas sum to the hull and no two tiles overlap
    area = sum(t.area() for t in part.tiles)
    hull_area = (root[1] - root[0]) * (root[3] - root[2])
    if abs(area - hull_area) > area_tol:
        violations.append(
            f"tile areas sum to {area}, hull area is {hull_area}")
    if _any_overlap(part.tiles):
        violations.append("two tiles overlap with positive area")
    return AuditReport(violations, N, (L, M, S), msum, c_audit, lp)


def _partition_hull(part: Partition) -> tuple[float, float, float, float]:
    rects = [r for t in part.tiles for r in t.rects()]
    return (min(r[0] for r in rects), max(r[1] for r in rects),
            min(r[2] for r in rects), max(r[3] for r in rects))


def _any_overlap(tiles: Sequence[Tile]) -> bool:
    rects = [r for t in tiles for r in t.rects()]
    x0 = np.array([r[0] for r in rects])
    x1 = np.array([r[1] for r in rects])
    y0 = np.array([r[2] for r in rects])
    y1 = np.array([r[3] for r in rects])
    n = len(rects)
    tol = 1e-12
    for i in range(n):
        dx = np.minimum(x1[i], x1[i + 1:]) - np.maximum(x0[i], x0[i + 1:])
        dy = np.minimum(y1[i], y1[i + 1:]) - np.maximum(y0[i], y0[i + 1:])
        if np.any((dx > tol) & (dy > tol)):
            return True
    return False


def medium_steps_remeasured(part: Partition, V: Potential) -> bool:
    """Independent re-measurement: every step tile satisfies the two-sided
    medium inequality."""
    for t in part.tiles:
        if isinstance(t.shape, Step):
            mass = tile_pmass(V, t.shape, part.p)
            scale = t.size ** (2.0 - 2.0 * part.p)
            if not (part.c_prime * scale < mass <= part.c * scale * (1 + 1e-9)):
                return False
    return True


def inner_half_squares(part: Partition) -> list[Square]:
    """For each medium tile, a square of half its size contained in it."""
    out = []
    for t in part.tiles:
        if t.label != MEDIUM:
            continue
        if isinstance(t.shape, Square):
            s = t.shape
            out.append(Square(s.x, s.y, s.side / 2.0))
        else:
            o, r = t.shape.outer, t.shape.removed
            h = o.side / 2.0
            # quadrant diagonally opposite the removed corner
            x = o.x if r.x > o.x + 1e-12 * o.side else o.x + h
            y = o.y if r.y > o.y + 1e-12 * o.side else o.y + h
            out.append(Square(x, y, h))
    return out


# --------------------------------------------------------------------------
# serialization


def partition_to_json(part: Partition) -> str:
    def shape_doc(shape):
        if isinstance(shape, Square):
            return {"kind": "square", "corner": [shape.x, shape.y],
                    "side": shape.side}
        return {"kind": "step",
                "outer": shape_doc(shape.outer),
                "removed": shape_doc(shape.removed)}
    doc = {
        "constants": {"p": part.p, "c": part.c, "c_prime": part.c_prime},
        "tiles": [{"shape": shape_doc(t.shape), "label": t.label}
                  for t in part.tiles],
        "counters_history": [list(c) for c in part.counters_history],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


_FILL = {SMALL: "#ffffff", MEDIUM: "#9ecae1", LARGE: "#fc9272"}


def partition_to_svg(part: Partition, size_px: int = 640) -> str:
    """Static SVG rendering of the tiling (steps drawn as two rectangles)."""
    hull = _partition_hull(part)
    w = hull[1] - hull[0]
    h = hull[3] - hull[2]
    sx = size_px / w
    sy = size_px / h
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size_px}" '
        f'height="{size_px}" viewBox="0 0 {size_px} {size_px}">',
        f'<rect x="0" y="0" width="{size_px}" height="{size_px}" '
        f'fill="#f7f7f7"/>',
    ]
    for t in part.tiles:
        fill = _FILL.get(t.label, "#cccccc")
        for (x0, x1, y0, y1) in t.rects():
            px = (x0 - hull[0]) * sx
            py = (hull[3] - y1) * sy
            lines.append(
                f'<rect x="{px:.3f}" y="{py:.3f}" '
                f'width="{(x1 - x0) * sx:.3f}" height="{(y1 - y0) * sy:.3f}" '
                f'fill="{fill}" stroke="#636363" stroke-width="0.6"/>')
    lines.append("</svg>")
    return "\n".join(lines)
