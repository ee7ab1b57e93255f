"""Strip-side functionals, sparse covers and the strip counting bound.

On the horizontal strip of height pi (coordinates x1 real, 0 < x2 < pi) the
two term families mirror the plane ones with x1 in place of log-radius:

    a_n = integral of (1 + |x1|) V(x) dx over the dyadic rectangle S_n,
    b_n = ( integral of V^p over the unit rectangle Q_n )^(1/p).

Small sup-norms of both families force a single non-positive eigenvalue on
the strip; the general strip bound is

    1 + C * sum(sqrt(a_n) : a_n > c) + C * sum(b_n : b_n > c),

assembled from a sparse/dense decomposition: unit rectangles with b_n above
the threshold are dense blocks, the gaps between them carry the sparse part.

A sparse cover of a rectangle (beta - alpha >= 1) cuts it greedily from the
left so that each piece of length l_k and mass J_k satisfies l_k * J_k = c
exactly (except possibly the last); sparseness guarantees every l_k >= 1,
violated inputs raise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonConvergent, SparsenessViolated
from .estimates import BoundConstants, BoundReport, DEFAULT_CONSTANTS
from .geometry import StripRect, dyadic_interval, strip_Q, strip_S
from .potentials import Potential
from .quadrature import adaptive_quad, adaptive_quad_2d

__all__ = [
    "StripIndexing", "SparseCover", "term_a", "term_b",
    "one_eigenvalue_criterion", "sparse_cover", "strip_bound",
    "strip_line_mass", "cover_to_json",
]

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class StripIndexing:
    """Index helpers for the dyadic rectangles S_n and unit rectangles Q_n."""

    height: float = math.pi

    def S(self, n: int) -> StripRect:
        return strip_S(n, self.height)

    def Q(self, n: int) -> StripRect:
        return strip_Q(n, self.height)


def _line_mass_fn(V: Potential, height: float) -> Callable[[float], float]:
    """x1 -> integral of V(x1, y) dy over (0, height)."""
    profile = getattr(V, "x1_profile", None)
    if profile is not None:
        return lambda x1: height * float(profile(x1))

    def mass(x1: float) -> float:
        return adaptive_quad(lambda y: V.eval(np.full_like(y, x1), y),
                             0.0, height, rel_tol=1e-9, abs_tol=1e-15,
                             max_panels=512)
    return mass


def strip_line_mass(V: Potential, x1: float, height: float = math.pi) -> float:
    """Mass of one vertical line of the strip."""
    return _line_mass_fn(V, height)(x1)


def _strip_integral(V: Potential, alpha: float, beta: float, height: float,
                    weight: Callable[[np.ndarray], np.ndarray],
                    rel_tol: float = 1e-9) -> float:
    """integral of weight(x1) * V over (alpha, beta) x (0, height)."""
    if beta <= alpha:
        return 0.0
    lo, hi = _support_clip(V, alpha, beta)
    if hi <= lo:
        return 0.0
    profile = getattr(V, "x1_profile", None)
    if profile is not None:
        def f(x1):
            x1 = np.asarray(x1, dtype=float)
            return height * profile(x1) * weight(x1)
        return adaptive_quad(f, lo, hi, rel_tol, abs_tol=1e-300,
                             max_panels=2048)

    def f2(x1, y):
        return V.eval(np.full_like(y, x1), y) * float(weight(np.asarray(x1)))
    return adaptive_quad_2d(f2, lo, hi, 0.0, height,
                            rel_tol=max(rel_tol, 1e-8))


def _support_clip(V: Potential, lo: float, hi: float) -> tuple[float, float]:
    s_lo, s_hi = getattr(V, "support_x1", (-math.inf, math.inf))
    return max(lo, s_lo), min(hi, s_hi)


def term_a(V: Potential, n: int, height: float = math.pi) -> float:
    """Linear-weight mass of V on the dyadic strip rectangle S_n."""
    lo, hi = dyadic_interval(n)
    return _strip_integral(V, lo, hi, height,
                           lambda x: 1.0 + np.abs(x))


def term_b(V: Potential, n: int, p: float, height: float = math.pi) -> float:
    """L^p term of V on the unit strip rectangle Q_n."""
    if p <= 1:
        raise ValueError("need p > 1")
    lo, hi = _support_clip(V, float(n), float(n + 1))
    if hi <= lo:
        return 0.0
    profile = getattr(V, "x1_profile", None)
    if profile is not None:
        def f(x1):
            x1 = np.asarray(x1, dtype=float)
            return height * profile(x1) ** p
        raw = adaptive_quad(f, lo, hi, 1e-9, abs_tol=1e-300, max_panels=2048)
    else:
        def f2(x1, y):
            return V.eval(np.full_like(y, x1), y) ** p
        raw = adaptive_quad_2d(f2, lo, hi, 0.0, height, rel_tol=1e-8)
    return raw ** (1.0 / p)


def _strip_window(V: Potential, window: Optional[tuple[int, int]],
                  kind: str) -> range:
    if window is not None:
        return range(window[0], window[1] + 1)
    s_lo, s_hi = getattr(V, "support_x1", (-math.inf, math.inf))
    if not (math.isfinite(s_lo) and math.isfinite(s_hi)):
        return range(-16, 17)
    if kind == "a":
        def dy_idx(t):
            if abs(t) <= 1.0:
                return 0
            return int(math.copysign(math.ceil(math.log2(abs(t))), t))
        lo = dy_idx(s_lo) - 1
        hi = dy_idx(s_hi) + 1
        return range(min(lo, 0), max(hi, 0) + 1)
    return range(int(math.floor(s_lo)) - 1, int(math.ceil(s_hi)) + 1)


def one_eigenvalue_criterion(V: Potential, p: float = 2.0,
                             c_crit: float = 0.25,
                             window: Optional[tuple[int, int]] = None,
                             height: float = math.pi) -> tuple[bool, dict]:
    """True when sup a_n <= c_crit and sup b_n <= c_crit over the window.

    The window must cover the support of V; it is derived from the support
    metadata when omitted.  Returns (flag, diagnostics) with the attaining
    indices.
    """
    a_vals = {n: term_a(V, n, height) for n in _strip_window(V, window, "a")}
    b_vals = {n: term_b(V, n, p, height) for n in _strip_window(V, window, "b")}
    sup_a, arg_a = max(((v, n) for n, v in a_vals.items()), default=(0.0, 0))
    sup_b, arg_b = max(((v, n) for n, v in b_vals.items()), default=(0.0, 0))
    ok = sup_a <= c_crit and sup_b <= c_crit
    return ok, {"sup_a": sup_a, "arg_a": arg_a, "sup_b": sup_b,
                "arg_b": arg_b, "c_crit": c_crit}


# --------------------------------------------------------------------------
# sparse covers


@dataclass
class SparseCover:
    """Greedy left-to-right cover of a strip rectangle by pieces of equal
    mass-length product."""

    cut_points: list[float]          # r_0 < r_1 < ... < r_N
    masses: list[float]              # J_k over piece k (1-based pieces)
    c: float
    last_rect_partial: bool

    @property
    def lengths(self) -> list[float]:
        return [b - a for a, b in zip(self.cut_points, self.cut_points[1:])]


def sparse_cover(V: Potential, alpha: float, beta: float, c: float,
                 p: float = 2.0, c0: Optional[float] = None,
                 height: float = math.pi,
                 check_sparse: bool = False) -> SparseCover:
    """Cut (alpha, beta) x (0, height) from the left into pieces with
    l_k * J_k = c (last piece possibly below).

    The sparseness of V (sup b_n below a small c0) guarantees every piece has
    length >= 1; a root-find that wants a shorter piece raises
    SparsenessViolated.  When no further cut with the exact product exists
    (no mass left), the final cut point is placed at beta + 1.
    """
    if beta - alpha < 1.0:
        raise ValueError("need beta - alpha >= 1")
    if c <= 0:
        raise ValueError("need c > 0")
    c0 = c / 2.0 if c0 is None else c0
    if check_sparse:
        sup_b = max(term_b(V, n, p, height)
                    for n in range(int(math.floor(alpha)),
                                   int(math.ceil(beta)) + 1))
        if not (sup_b < c0):
            raise SparsenessViolated(
                f"sup of unit-rectangle terms {sup_b} is not below c0={c0}")

    line = _line_mass_fn(V, height)

    def piece_mass(a: float, b: float) -> float:
        if b <= a:
            return 0.0
        lo, hi = _support_clip(V, a, b)
        if hi <= lo:
            return 0.0
        return adaptive_quad(lambda x: np.array([line(float(v)) for v in
                                                 np.atleast_1d(x)]),
                             lo, hi, 1e-9, abs_tol=1e-14, max_panels=1024)

    cuts = [alpha]
    masses: list[float] = []
    partial = False
    while cuts[-1] < beta:
        r_prev = cuts[-1]
        remaining = piece_mass(r_prev, beta)
        # product l * J(l) is nondecreasing in l; check solvability first
        if remaining <= 0.0 or \
                (beta + 1.0 - r_prev) * remaining < c * (1.0 - 1e-12):
            cuts.append(beta + 1.0)
            masses.append(remaining)
            partial = True
            break
        lo, hi = r_prev, beta + 1.0
        mass_hi = piece_mass(r_prev, hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            prod = (mid - r_prev) * piece_mass(r_prev, mid)
            if abs(prod - c) <= 1e-9 * c:
                lo = hi = mid
                break
            if prod < c:
                lo = mid
            else:
                hi = mid
        r_next = 0.5 * (lo + hi)
        length = r_next - r_prev
        if length < 1.0 - 1e-9:
            raise SparsenessViolated(
                f"cut of length {length} < 1 required at {r_prev}; the "
                f"potential is not sparse for c={c}")
        cuts.append(r_next)
        masses.append(piece_mass(r_prev, r_next))
    return SparseCover(cuts, masses, c, partial)


def cover_to_json(cover: SparseCover) -> str:
    return json.dumps({
        "cut_points": cover.cut_points,
        "lengths": cover.lengths,
        "masses": cover.masses,
        "c": cover.c,
        "last_rect_partial": cover.last_rect_partial,
    }, indent=2)


# --------------------------------------------------------------------------
# the strip bound


def strip_bound(V: Potential, p: float = 2.0,
                consts: BoundConstants = DEFAULT_CONSTANTS,
                window: Optional[tuple[int, int]] = None,
                height: float = math.pi) -> BoundReport:
    """Counting bound 1 + C sum sqrt(a_n > c) + C sum (b_n > c) on the strip.

    The report's extras carry the sparse/dense decomposition: the indices of
    dense unit rectangles (b_n above threshold), the gap rectangles between
    them, and the piece accounting #gaps <= 1 + #dense.
    """
    c, C = consts.c, consts.C
    a_vals = {n: term_a(V, n, height) for n in _strip_window(V, window, "a")}
    b_vals = {n: term_b(V, n, p, height) for n in _strip_window(V, window, "b")}
    a_contrib = {n: v for n, v in a_vals.items() if v > c}
    b_contrib = {n: v for n, v in b_vals.items() if v > c}
    value = 1.0 + C * sum(math.sqrt(v) for v in a_contrib.values()) \
        + C * sum(b_contrib.values())
    dense = sorted(b_contrib)
    gaps: list[tuple[float, float]] = []
    if dense:
        s_lo, s_hi = getattr(V, "support_x1", (-math.inf, math.inf))
        lo_edge = min(s_lo, float(dense[0]))
        hi_edge = max(s_hi, float(dense[-1] + 1))
        prev = lo_edge
        for n in dense:
            if float(n) > prev:
                gaps.append((prev, float(n)))
            prev = float(n + 1)
        if hi_edge > prev:
            gaps.append((prev, hi_edge))
    return BoundReport(
        estimate_name="strip",
        constants=consts,
        sqrt_sum_terms=[(n, math.sqrt(v)) for n, v in sorted(a_contrib.items())],
        linear_sum_terms=sorted(b_contrib.items()),
        value=value,
        finite=True,
        extras={
            "dense_indices": dense,
            "gap_rects": gaps,
            "n_dense": len(dense),
            "n_gaps": len(gaps),
            "gap_accounting_ok": len(gaps) <= 1 + len(dense),
            "height": height,
        },
    )
