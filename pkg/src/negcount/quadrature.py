"""Adaptive panel quadrature.

A 7-point Gauss / 15-point Kronrod pair drives panel subdivision: the worst
panel (largest error estimate) is split until the summed error estimate meets
the requested relative tolerance or the panel budget runs out.  Integrands
must accept numpy arrays of nodes and return arrays of values.
"""

from __future__ import annotations

import heapq
import math
from typing import Callable

import numpy as np

from .errors import NonConvergent

# Kronrod-15 abscissae (positive half) and weights, Gauss-7 weights embedded
# at every second node.
_XGK = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
])
_WGK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469,
])

# full symmetric 15-node rule
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # ascending
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])

_TINY = 1e-300

FloatFn = Callable[[np.ndarray], np.ndarray]


def _panel(f: FloatFn, a: float, b: float):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    y = np.asarray(f(mid + half * _NODES), dtype=float)
    with np.errstate(all="ignore"):
        ik = half * float(_WK @ y)
        ig = half * float(_WG15 @ y)
    err = abs(ik - ig)
    if not np.all(np.isfinite(y)) or math.isnan(err):
        err = math.inf
    return ik, err


def adaptive_quad(f: FloatFn, a: float, b: float, rel_tol: float = 1e-8,
                  abs_tol: float = 0.0, max_panels: int = 4096) -> float:
    """Integrate f over [a, b] to the requested relative tolerance.

    Raises NonConvergent when the subdivision budget is exhausted before the
    error estimate meets the tolerance.
    """
    if not (b > a):
        if b == a:
            return 0.0
        raise ValueError(f"bad interval [{a}, {b}]")
    i0, e0 = _panel(f, a, b)
    heap = [(-e0, a, b, i0, e0)]
    total_i, total_e = i0, e0
    n_panels = 1
    while True:
        tol = max(rel_tol * abs(total_i), abs_tol, _TINY)
        if total_e <= tol:
            return total_i
        if n_panels >= max_panels:
            raise NonConvergent(
                f"quadrature budget of {max_panels} panels exhausted on "
                f"[{a}, {b}] (error estimate {total_e:.3e}, value {total_i:.6e})")
        _, pa, pb, pi, pe = heapq.heappop(heap)
        pm = 0.5 * (pa + pb)
        if pm <= pa or pm >= pb:
            # interval no longer splittable in floating point
            raise NonConvergent(
                f"panel [{pa}, {pb}] cannot be refined further "
                f"(error estimate {pe:.3e})")
        i1, e1 = _panel(f, pa, pm)
        i2, e2 = _panel(f, pm, pb)
        total_i += i1 + i2 - pi
        total_e += e1 + e2 - pe
        heapq.heappush(heap, (-e1, pa, pm, i1, e1))
        heapq.heappush(heap, (-e2, pm, pb, i2, e2))
        n_panels += 1


def adaptive_quad_2d(f, ax: float, bx: float, ay: float, by: float,
                     rel_tol: float = 1e-7, max_panels: int = 1024,
                     inner_panels: int = 512) -> float:
    """Nested adaptive quadrature of f(x, y) over a rectangle.

    f is called as f(x, y) with x a scalar and y an array.
    """
    if bx <= ax or by <= ay:
        return 0.0

    def outer(xs):
        xs = np.atleast_1d(xs)
        out = np.empty(xs.shape)
        for i, xv in enumerate(xs):
            out[i] = adaptive_quad(lambda y: f(float(xv), y), ay, by,
                                   rel_tol=0.25 * rel_tol, abs_tol=1e-15,
                                   max_panels=inner_panels)
        return out

    return adaptive_quad(outer, ax, bx, rel_tol=rel_tol, abs_tol=1e-14,
                         max_panels=max_panels)


_LEGGAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _LEGGAUSS_CACHE[order]


def fixed_gauss(f: FloatFn, a: float, b: float, order: int = 16) -> float:
    x, w = leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(w @ np.asarray(f(mid + half * x), dtype=float))


def gauss_intervals(f: FloatFn, lo: np.ndarray, hi: np.ndarray,
                    order: int = 12) -> np.ndarray:
    """Fixed-order Gauss value of f on each interval [lo_i, hi_i], vectorized."""
    x, w = leggauss(order)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(nodes), dtype=float)
    return half * (vals @ w)


def expanding_integral(f: FloatFn, t_lo: float, t_hi: float,
                       rel_tol: float = 1e-8, start: float = 2.0,
                       cap: float = 2.0 ** 52,
                       max_panels: int = 4096) -> tuple[float, bool]:
    """Integrate f over (t_lo, t_hi) where either bound may be infinite.

    Expands dyadic windows outward from a finite anchor and applies a Cauchy
    test on the window increments.  Returns (value, converged);
    converged=False means the increments never died out before the expansion
    cap, which callers treat as a numerically divergent integral.
    """
    if math.isfinite(t_lo) and math.isfinite(t_hi):
        if t_hi <= t_lo:
            return 0.0, True
        return adaptive_quad(f, t_lo, t_hi, rel_tol,
                             max_panels=max_panels), True
    # anchor the first window at a finite point of the domain
    if math.isfinite(t_lo):
        anchor = t_lo
    elif math.isfinite(t_hi):
        anchor = t_hi
    else:
        anchor = 0.0
    width = start
    lo = max(t_lo, anchor - width)
    hi = min(t_hi, anchor + width)
    total = adaptive_quad(f, lo, hi, rel_tol, abs_tol=1e-300,
                          max_panels=max_panels) if hi > lo else 0.0
    small_streak = 0
    while True:
        covered = (lo <= t_lo or lo <= anchor - cap) and \
                  (hi >= t_hi or hi >= anchor + cap)
        if covered:
            # either the full (finite side) domain is integrated, or we hit
            # the expansion cap with the tail still alive
            return total, (lo <= t_lo and hi >= t_hi) or small_streak >= 2
        width *= 2.0
        new_lo = max(t_lo, anchor - width)
        new_hi = min(t_hi, anchor + width)
        inc = 0.0
        if new_lo < lo:
            inc += adaptive_quad(f, new_lo, lo, rel_tol, abs_tol=1e-300,
                                 max_panels=max_panels)
        if new_hi > hi:
            inc += adaptive_quad(f, hi, new_hi, rel_tol, abs_tol=1e-300,
                                 max_panels=max_panels)
        lo, hi = new_lo, new_hi
        total += inc
        if abs(inc) <= max(rel_tol * abs(total), 1e-300):
            small_streak += 1
            if small_streak >= 2:
                return total, True
        else:
            small_streak = 0
