"""Nonnegative potentials on the plane and their weighted integrals.

A potential is a nonnegative locally integrable function V on the plane (or
on a horizontal strip).  Radial potentials carry extra structure used all
over the package: writing t = ln r, the combination

    g(t) = r^2 V(r),  r = e^t        ("log mass")

turns every radial integral into a one-dimensional integral in t:

    integral of V^p(x) |x|^(2(p-1)) over an annulus = 2 pi * int g(t)^p dt

and similar identities for the other weights.  Closed-form potentials supply
g directly in a numerically stable form so that annuli with astronomically
large radii (where r itself overflows) remain computable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import NonConvergent, UnknownName
from .geometry import Annulus, Disk, Point2, Rect, Region, StripRect
from .quadrature import (adaptive_quad, adaptive_quad_2d, expanding_integral,
                         leggauss)

TWO_PI = 2.0 * math.pi

# --------------------------------------------------------------------------
# diagnostic counter for clamped negative closed-form values

_CLAMPED = 0


def clamp_count() -> int:
    return _CLAMPED


def reset_clamp_count() -> None:
    global _CLAMPED
    _CLAMPED = 0


def _clamp(values: np.ndarray) -> np.ndarray:
    global _CLAMPED
    neg = values < 0
    n = int(np.count_nonzero(neg))
    if n:
        _CLAMPED += n
        values = np.where(neg, 0.0, values)
    return values


# --------------------------------------------------------------------------
# tail metadata for the annulus term series

#: classes for the behaviour of a term series as |n| grows
TAIL_CLASSES = ("compact", "decaying", "limit", "growing", "unknown")


@dataclass(frozen=True)
class TailInfo:
    """Qualitative behaviour of the two annulus term families.

    a_class / b_class: one of TAIL_CLASSES for the log-weighted terms on
    doubly-exponential annuli and the L^p terms on unit shells.
    monotone_from: index beyond which both term families are monotone, so
    threshold crossings can be found by bisection.
    symmetric: terms at -n equal terms at the mirrored positive index.
    """

    a_class: str = "unknown"
    b_class: str = "unknown"
    monotone_from: int = 4
    symmetric: bool = False


_UNKNOWN_TAIL = TailInfo()


class Potential:
    """Base class; concrete kinds override evaluation and radial metadata."""

    #: (t_lo, t_hi) hull of the support in log-radius; +-inf if unbounded
    support_t: tuple[float, float] = (-math.inf, math.inf)
    tail: TailInfo = _UNKNOWN_TAIL
    #: largest |t| at which the radial integrand callables are trustworthy
    t_reliable: float = math.inf

    def eval(self, x1, x2) -> np.ndarray:
        raise NotImplementedError

    def eval_point(self, x: Point2) -> float:
        return float(self.eval(np.asarray(x.x1), np.asarray(x.x2)))

    # radial structure -----------------------------------------------------
    @property
    def is_radial(self) -> bool:
        return self.log_mass is not None

    #: callable t -> r^2 V(r) with r = e^t, or None for non-radial potentials
    log_mass: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def a_density(self, t: np.ndarray) -> np.ndarray:
        """(1 + |t|) * log_mass(t); override for stability at extreme t."""
        if self.log_mass is None:
            raise TypeError("not a radial potential")
        return (1.0 + np.abs(t)) * self.log_mass(t)

    #: callable u -> (1 + e^u) e^u g(e^u) in a numerically stable form, used
    #: for terms on annuli whose log-radius bounds themselves overflow
    u_density: Optional[Callable[[np.ndarray], np.ndarray]] = None


def _support_clip(support: tuple[float, float], lo: float,
                  hi: float) -> tuple[float, float]:
    return (max(support[0], lo), min(support[1], hi))


# --------------------------------------------------------------------------
# concrete kinds


class RadialClosedForm(Potential):
    """V(x) = profile(|x|) on the open radial support (r_lo, r_hi)."""

    def __init__(self, profile: Callable, support: tuple[float, float] = (0.0, math.inf),
                 log_profile: Optional[Callable] = None,
                 a_profile: Optional[Callable] = None,
                 u_profile: Optional[Callable] = None,
                 tail: Optional[TailInfo] = None,
                 t_reliable: float = math.inf,
                 label: str = "radial"):
        r_lo, r_hi = support
        if not (0.0 <= r_lo < r_hi):
            raise ValueError("need 0 <= r_lo < r_hi")
        self.profile = profile
        self.support = (float(r_lo), float(r_hi))
        t_lo = math.log(r_lo) if r_lo > 0 else -math.inf
        t_hi = math.log(r_hi) if math.isfinite(r_hi) else math.inf
        self.support_t = (t_lo, t_hi)
        # safe fill points inside the support for masked evaluation
        if r_lo > 0:
            self._safe_r = math.sqrt(r_lo * r_hi) if math.isfinite(r_hi) \
                else r_lo * math.e
        else:
            self._safe_r = min(1.0, r_hi / 2.0) if math.isfinite(r_hi) else 1.0
        self._safe_t = math.log(self._safe_r)
        self._log_profile = log_profile
        self._a_profile = a_profile
        self.u_density = self._wrap_u(u_profile) if u_profile else None
        if tail is None:
            compact = r_lo > 0 and math.isfinite(r_hi)
            tail = TailInfo("compact", "compact") if compact else _UNKNOWN_TAIL
        self.tail = tail
        self.t_reliable = t_reliable if log_profile is not None else min(t_reliable, 300.0)
        self.label = label

    def _in_support_r(self, r: np.ndarray) -> np.ndarray:
        return (r > self.support[0]) & (r < self.support[1])

    def _in_support_t(self, t: np.ndarray) -> np.ndarray:
        return (t > self.support_t[0]) & (t < self.support_t[1])

    def eval(self, x1, x2) -> np.ndarray:
        r = np.hypot(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        mask = self._in_support_r(r)
        out = np.zeros_like(r)
        if np.any(mask):
            with np.errstate(all="ignore"):
                vals = np.asarray(self.profile(np.where(mask, r, self._safe_r)),
                                  dtype=float)
            out = np.where(mask, _clamp(vals), 0.0)
        return out

    @property
    def log_mass(self):
        def g(t):
            t = np.asarray(t, dtype=float)
            mask = self._in_support_t(t)
            if self._log_profile is not None:
                with np.errstate(all="ignore"):
                    vals = np.asarray(
                        self._log_profile(np.where(mask, t, self._safe_t)),
                        dtype=float)
            else:
                with np.errstate(all="ignore"):
                    r = np.exp(np.where(mask, t, self._safe_t))
                    vals = r * r * np.asarray(self.profile(r), dtype=float)
            return np.where(mask, np.maximum(vals, 0.0), 0.0)
        return g

    def a_density(self, t):
        t = np.asarray(t, dtype=float)
        if self._a_profile is not None:
            mask = self._in_support_t(t)
            with np.errstate(all="ignore"):
                vals = np.asarray(
                    self._a_profile(np.where(mask, t, self._safe_t)),
                    dtype=float)
            return np.where(mask, np.maximum(vals, 0.0), 0.0)
        return (1.0 + np.abs(t)) * self.log_mass(t)

    def _wrap_u(self, u_profile):
        t_lo, t_hi = self.support_t
        u_hi = math.log(t_hi) if math.isfinite(t_hi) else math.inf
        u_lo = math.log(t_lo) if t_lo > 0 else -math.inf

        def phi(u):
            u = np.asarray(u, dtype=float)
            mask = (u > u_lo) & (u < u_hi)
            with np.errstate(all="ignore"):
                vals = np.asarray(u_profile(np.where(mask, u, 1.0)), dtype=float)
            return np.where(mask, np.maximum(vals, 0.0), 0.0)
        return phi


class CartesianClosedForm(Potential):
    """V given by a closed-form function of Cartesian coordinates."""

    log_mass = None
    u_density = None

    def __init__(self, f: Callable, support_t: tuple[float, float] = (-math.inf, math.inf),
                 tail: Optional[TailInfo] = None, label: str = "cartesian"):
        self.f = f
        self.support_t = support_t
        self.tail = tail if tail is not None else _UNKNOWN_TAIL
        self.label = label

    def eval(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        vals = np.asarray(self.f(x1, x2), dtype=float)
        return _clamp(np.broadcast_to(vals, np.broadcast(x1, x2).shape).copy())


class GridSampled(Potential):
    """Bilinear interpolant of nonnegative node values on a regular grid.

    values has shape (ny, nx) with values[j, i] = V(x_lo + i*hx, y_lo + j*hy);
    evaluation is 0 outside the grid extent.  Integrals of V^p over axis
    aligned rectangles are computed exactly per cell (for integer p) with a
    Gauss rule of sufficient order, accelerated by a summed-area table.
    """

    log_mass = None
    u_density = None

    def __init__(self, x_lo: float, y_lo: float, hx: float, hy: float,
                 values: np.ndarray, label: str = "grid"):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 2:
            raise ValueError("grid needs at least 2x2 nodes")
        if np.any(values < 0):
            raise ValueError("grid potentials must be nonnegative")
        if hx <= 0 or hy <= 0:
            raise ValueError("grid spacing must be positive")
        self.x_lo, self.y_lo = float(x_lo), float(y_lo)
        self.hx, self.hy = float(hx), float(hy)
        self.values = values
        self.ny, self.nx = values.shape
        self.x_hi = self.x_lo + (self.nx - 1) * self.hx
        self.y_hi = self.y_lo + (self.ny - 1) * self.hy
        corners = [math.hypot(x, y) for x in (self.x_lo, self.x_hi)
                   for y in (self.y_lo, self.y_hi)]
        r_hi = max(corners)
        contains_origin = (self.x_lo <= 0 <= self.x_hi and
                           self.y_lo <= 0 <= self.y_hi)
        if contains_origin:
            t_lo = -math.inf
        else:
            dx = max(self.x_lo - 0.0, 0.0 - self.x_hi, 0.0)
            dy = max(self.y_lo - 0.0, 0.0 - self.y_hi, 0.0)
            r_lo = math.hypot(dx, dy)
            t_lo = math.log(r_lo) if r_lo > 0 else -math.inf
        self.support_t = (t_lo, math.log(r_hi) if r_hi > 0 else -math.inf)
        self.tail = TailInfo("compact", "compact")
        self.label = label
        self._cell_tables: dict[float, np.ndarray] = {}
        self._sats: dict[float, np.ndarray] = {}

    # evaluation -----------------------------------------------------------
    def eval(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1, x2 = np.broadcast_arrays(x1, x2)
        u = (x1 - self.x_lo) / self.hx
        w = (x2 - self.y_lo) / self.hy
        inside = (u >= 0) & (u <= self.nx - 1) & (w >= 0) & (w <= self.ny - 1)
        ui = np.clip(np.floor(u).astype(int), 0, self.nx - 2)
        wi = np.clip(np.floor(w).astype(int), 0, self.ny - 2)
        du = np.clip(u - ui, 0.0, 1.0)
        dw = np.clip(w - wi, 0.0, 1.0)
        v = self.values
        vals = (v[wi, ui] * (1 - du) * (1 - dw) + v[wi, ui + 1] * du * (1 - dw)
                + v[wi + 1, ui] * (1 - du) * dw + v[wi + 1, ui + 1] * du * dw)
        return np.where(inside, vals, 0.0)

    # exact rectangle integrals of V^p --------------------------------------
    @staticmethod
    def _gauss_order(p: float) -> int:
        if float(p).is_integer():
            return max(2, math.ceil((p + 1) / 2))
        return 8

    def _corner_arrays(self, ii: np.ndarray, jj: np.ndarray):
        v = self.values
        return v[jj, ii], v[jj, ii + 1], v[jj + 1, ii], v[jj + 1, ii + 1]

    def _cells_pow_clipped(self, ii, jj, cx0, cx1, cy0, cy1, p) -> np.ndarray:
        """Exact integral of V^p over clipped boxes inside cells (ii, jj)."""
        order = self._gauss_order(p)
        xg, wg = leggauss(order)
        v00, v10, v01, v11 = self._corner_arrays(ii, jj)
        # local coordinates of the clip box within each cell, in [0, 1]
        ax = (cx0 - (self.x_lo + ii * self.hx)) / self.hx
        bx = (cx1 - (self.x_lo + ii * self.hx)) / self.hx
        ay = (cy0 - (self.y_lo + jj * self.hy)) / self.hy
        by = (cy1 - (self.y_lo + jj * self.hy)) / self.hy
        um = 0.5 * (ax + bx)[:, None]
        uh = 0.5 * (bx - ax)[:, None]
        wm = 0.5 * (ay + by)[:, None]
        wh = 0.5 * (by - ay)[:, None]
        u = um + uh * xg[None, :]                     # (m, g)
        w = wm + wh * xg[None, :]                     # (m, g)
        # bilinear values on the tensor nodes: (m, gy, gx)
        fu0 = (1 - u)[:, None, :]
        fu1 = u[:, None, :]
        fw0 = (1 - w)[:, :, None]
        fw1 = w[:, :, None]
        vals = (v00[:, None, None] * fu0 * fw0 + v10[:, None, None] * fu1 * fw0
                + v01[:, None, None] * fu0 * fw1 + v11[:, None, None] * fu1 * fw1)
        vals = vals ** p
        inner = np.einsum("myx,x,y->m", vals, wg, wg)
        area_scale = (uh[:, 0] * wh[:, 0]) * (self.hx * self.hy)
        return inner * area_scale

    def _cell_table(self, p: float) -> np.ndarray:
        if p not in self._cell_tables:
            ii, jj = np.meshgrid(np.arange(self.nx - 1), np.arange(self.ny - 1))
            ii = ii.ravel()
            jj = jj.ravel()
            x0 = self.x_lo + ii * self.hx
            y0 = self.y_lo + jj * self.hy
            vals = self._cells_pow_clipped(ii, jj, x0, x0 + self.hx,
                                           y0, y0 + self.hy, p)
            self._cell_tables[p] = vals.reshape(self.ny - 1, self.nx - 1)
            sat = np.zeros((self.ny, self.nx))
            np.cumsum(np.cumsum(self._cell_tables[p], axis=0), axis=1,
                      out=sat[1:, 1:])
            self._sats[p] = sat
        return self._cell_tables[p]

    def integrate_pow_rect(self, x0: float, x1: float, y0: float, y1: float,
                           p: float = 1.0) -> float:
        """Integral of V^p over [x0,x1] x [y0,y1], exact for integer p."""
        x0 = max(x0, self.x_lo)
        x1 = min(x1, self.x_hi)
        y0 = max(y0, self.y_lo)
        y1 = min(y1, self.y_hi)
        if x1 <= x0 or y1 <= y0:
            return 0.0
        self._cell_table(p)
        sat = self._sats[p]
        eps = 1e-12
        # cell index ranges touched by the box
        i0 = min(int(np.floor((x0 - self.x_lo) / self.hx + eps)), self.nx - 2)
        i1 = min(int(np.ceil((x1 - self.x_lo) / self.hx - eps)) - 1, self.nx - 2)
        j0 = min(int(np.floor((y0 - self.y_lo) / self.hy + eps)), self.ny - 2)
        j1 = min(int(np.ceil((y1 - self.y_lo) / self.hy - eps)) - 1, self.ny - 2)
        i0, j0 = max(i0, 0), max(j0, 0)
        i1, j1 = max(i1, i0), max(j1, j0)
        # fully covered cell range
        fi0 = i0 + (0 if abs(x0 - (self.x_lo + i0 * self.hx)) <= eps * self.hx else 1)
        fi1 = i1 - (0 if abs(x1 - (self.x_lo + (i1 + 1) * self.hx)) <= eps * self.hx else 1)
        fj0 = j0 + (0 if abs(y0 - (self.y_lo + j0 * self.hy)) <= eps * self.hy else 1)
        fj1 = j1 - (0 if abs(y1 - (self.y_lo + (j1 + 1) * self.hy)) <= eps * self.hy else 1)
        total = 0.0
        if fi1 >= fi0 and fj1 >= fj0:
            total += float(sat[fj1 + 1, fi1 + 1] - sat[fj0, fi1 + 1]
                           - sat[fj1 + 1, fi0] + sat[fj0, fi0])
        # boundary cells: everything touched minus the full block
        cols = np.arange(i0, i1 + 1)
        rows = np.arange(j0, j1 + 1)
        ii, jj = np.meshgrid(cols, rows)
        ii = ii.ravel()
        jj = jj.ravel()
        if fi1 >= fi0 and fj1 >= fj0:
            in_full = (ii >= fi0) & (ii <= fi1) & (jj >= fj0) & (jj <= fj1)
        else:
            in_full = np.zeros(ii.shape, dtype=bool)
        ii, jj = ii[~in_full], jj[~in_full]
        if ii.size:
            cx0 = np.maximum(x0, self.x_lo + ii * self.hx)
            cx1 = np.minimum(x1, self.x_lo + (ii + 1) * self.hx)
            cy0 = np.maximum(y0, self.y_lo + jj * self.hy)
            cy1 = np.minimum(y1, self.y_lo + (jj + 1) * self.hy)
            ok = (cx1 > cx0) & (cy1 > cy0)
            if np.any(ok):
                total += float(np.sum(self._cells_pow_clipped(
                    ii[ok], jj[ok], cx0[ok], cx1[ok], cy0[ok], cy1[ok], p)))
        return total


class Scaled(Potential):
    """alpha * V for a scale alpha >= 0."""

    def __init__(self, alpha: float, inner: Potential):
        if alpha < 0:
            raise ValueError("scale must be nonnegative")
        self.alpha = float(alpha)
        self.inner = inner
        self.support_t = inner.support_t if alpha > 0 else (-math.inf, -math.inf)
        self.tail = inner.tail if alpha > 0 else TailInfo("compact", "compact")
        self.t_reliable = inner.t_reliable

    def eval(self, x1, x2):
        if self.alpha == 0.0:
            return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        return self.alpha * self.inner.eval(x1, x2)

    @property
    def log_mass(self):
        if self.alpha == 0.0:
            return lambda t: np.zeros_like(np.asarray(t, dtype=float))
        g = self.inner.log_mass
        return None if g is None else (lambda t: self.alpha * g(t))

    def a_density(self, t):
        if self.alpha == 0.0:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.alpha * self.inner.a_density(t)

    @property
    def u_density(self):
        phi = self.inner.u_density
        if phi is None:
            return None
        return lambda u: self.alpha * phi(u)


class SumPotential(Potential):
    """Pointwise sum of potentials."""

    def __init__(self, parts: Sequence[Potential]):
        if not parts:
            raise ValueError("need at least one part")
        self.parts = list(parts)
        self.support_t = (min(p.support_t[0] for p in self.parts),
                          max(p.support_t[1] for p in self.parts))
        classes_a = {p.tail.a_class for p in self.parts}
        classes_b = {p.tail.b_class for p in self.parts}

        def combine(classes):
            if classes == {"compact"}:
                return "compact"
            if classes <= {"compact", "decaying"}:
                return "decaying"
            return "unknown"
        self.tail = TailInfo(combine(classes_a), combine(classes_b),
                             monotone_from=max(p.tail.monotone_from
                                               for p in self.parts),
                             symmetric=all(p.tail.symmetric for p in self.parts))
        self.t_reliable = min(p.t_reliable for p in self.parts)

    def eval(self, x1, x2):
        return sum(p.eval(x1, x2) for p in self.parts)

    @property
    def log_mass(self):
        gs = [p.log_mass for p in self.parts]
        if any(g is None for g in gs):
            return None
        return lambda t: sum(g(t) for g in gs)

    def a_density(self, t):
        return sum(p.a_density(t) for p in self.parts)

    @property
    def u_density(self):
        phis = [p.u_density for p in self.parts]
        if any(phi is None for phi in phis):
            return None
        return lambda u: sum(phi(u) for phi in phis)


class Restricted(Potential):
    """V restricted to a region (evaluates to 0 outside)."""

    def __init__(self, inner: Potential, region: Region):
        self.inner = inner
        self.region = region
        radial_region = isinstance(region, Annulus) or (
            isinstance(region, Disk) and region.center.x1 == 0.0
            and region.center.x2 == 0.0)
        self._radial_region = radial_region
        if radial_region and inner.is_radial:
            if isinstance(region, Annulus):
                t_lo = math.log(region.r_in) if region.r_in > 0 else -math.inf
                t_hi = math.log(region.r_out)
            else:
                t_lo, t_hi = -math.inf, math.log(region.radius)
            self.support_t = _support_clip(inner.support_t, t_lo, t_hi)
            compact = self.support_t[0] > -math.inf and \
                math.isfinite(self.support_t[1])
            self.tail = TailInfo("compact", "compact") if compact else inner.tail
        else:
            self.support_t = inner.support_t
            self.tail = TailInfo("unknown", "unknown")
        self.t_reliable = inner.t_reliable

    def _mask(self, x1, x2):
        r = self.region
        if isinstance(r, Annulus):
            rad = np.hypot(x1, x2)
            return (rad > r.r_in) & (rad < r.r_out)
        if isinstance(r, Disk):
            return np.hypot(x1 - r.center.x1, x2 - r.center.x2) < r.radius
        if isinstance(r, StripRect):
            r = r.as_rect()
        return (x1 > r.x1_lo) & (x1 < r.x1_hi) & (x2 > r.x2_lo) & (x2 < r.x2_hi)

    def eval(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return np.where(self._mask(x1, x2), self.inner.eval(x1, x2), 0.0)

    @property
    def log_mass(self):
        g = self.inner.log_mass
        if g is None or not self._radial_region:
            return None
        t_lo, t_hi = self.support_t

        def clipped(t):
            t = np.asarray(t, dtype=float)
            return np.where((t > t_lo) & (t < t_hi), g(t), 0.0)
        return clipped

    def a_density(self, t):
        g = self.log_mass
        if g is None:
            raise TypeError("not a radial potential")
        t = np.asarray(t, dtype=float)
        return (1.0 + np.abs(t)) * g(t)


ZERO = Scaled(0.0, CartesianClosedForm(lambda x1, x2: np.zeros_like(x1),
                                       label="zero"))


# --------------------------------------------------------------------------
# named example potentials


def named_example(name: str, **params) -> Potential:
    """Construct one of the built-in example potentials.

    inverse_square(alpha): alpha / |x|^2.
    example2:              1 / (|x|^2 (1 + ln^2 |x|)).
    example4(q):           1 / (|x|^2 ln^2 |x| (ln ln |x|)^q) for |x| > e^2.
    example6(alpha, m):    alpha / (|x|^2 ln^2 |x|) for e < |x| < e^(2^m).
    ckmw_radial(profile, r_lo, r_hi): arbitrary radial profile.
    """
    if name == "inverse_square":
        alpha = float(params.pop("alpha", 1.0))
        if alpha < 0 or params:
            raise UnknownName(f"bad parameters for inverse_square: {params}")
        return RadialClosedForm(
            profile=lambda r: alpha / (r * r),
            support=(0.0, math.inf),
            log_profile=lambda t: np.full_like(np.asarray(t, dtype=float), alpha),
            a_profile=lambda t: alpha * (1.0 + np.abs(t)),
            tail=TailInfo("growing", "limit", monotone_from=1, symmetric=True),
            label=f"inverse_square(alpha={alpha})")
    if name == "example2":
        if params:
            raise UnknownName(f"example2 takes no parameters: {params}")

        def phi(u):
            # (1 + e^u) e^u / (1 + e^{2u}) rewritten stably for large u
            eu = np.exp(-np.asarray(u, dtype=float))
            return (eu + 1.0) / (eu * eu + 1.0)

        def a_prof(t):
            # (1 + |t|) / (1 + t^2) in a form that never overflows t^2
            at = np.abs(np.asarray(t, dtype=float))
            big = at > 1.0
            safe = np.where(big, at, 1.0)
            return np.where(big, (1.0 + 1.0 / safe) / (safe + 1.0 / safe),
                            (1.0 + at) / (1.0 + at * at))

        def g_prof(t):
            at = np.abs(np.asarray(t, dtype=float))
            big = at > 1.0
            safe = np.where(big, at, 1.0)
            with np.errstate(all="ignore"):
                inv = (1.0 / safe) / (safe + 1.0 / safe)
            return np.where(big, inv, 1.0 / (1.0 + at * at))
        return RadialClosedForm(
            profile=lambda r: 1.0 / (r * r * (1.0 + np.log(r) ** 2)),
            support=(0.0, math.inf),
            log_profile=g_prof,
            a_profile=a_prof,
            u_profile=phi,
            tail=TailInfo("limit", "decaying", monotone_from=2, symmetric=True),
            label="example2")
    if name == "example4":
        q = float(params.pop("q"))
        if q <= 0 or params:
            raise UnknownName("example4 needs q > 0")
        e2 = math.exp(2.0)

        def phi(u):
            u = np.asarray(u, dtype=float)
            return (1.0 + np.exp(-u)) * u ** (-q)
        return RadialClosedForm(
            profile=lambda r: 1.0 / (r * r * np.log(r) ** 2
                                     * np.log(np.log(r)) ** q),
            support=(e2, math.inf),
            log_profile=lambda t: 1.0 / (t * t * np.log(t) ** q),
            a_profile=lambda t: (1.0 / t + 1.0 / (t * t)) * np.log(t) ** (-q),
            u_profile=phi,
            tail=TailInfo("decaying", "decaying", monotone_from=3),
            label=f"example4(q={q})")
    if name == "example6":
        alpha = float(params.pop("alpha"))
        m = int(params.pop("m"))
        if alpha < 0 or m < 1 or params:
            raise UnknownName("example6 needs alpha >= 0 and integer m >= 1")
        t_hi = 2.0 ** m
        V = RadialClosedForm(
            profile=lambda r: alpha / (r * r * np.log(r) ** 2),
            support=(math.e, math.exp(t_hi)) if t_hi < 700 else (math.e, math.inf),
            log_profile=lambda t: np.where(
                (np.asarray(t, dtype=float) > 1.0) & (np.asarray(t, dtype=float) < t_hi),
                alpha / np.asarray(t, dtype=float) ** 2, 0.0),
            a_profile=lambda t: np.where(
                (np.asarray(t, dtype=float) > 1.0) & (np.asarray(t, dtype=float) < t_hi),
                alpha * (1.0 / np.asarray(t, dtype=float)
                         + 1.0 / np.asarray(t, dtype=float) ** 2), 0.0),
            tail=TailInfo("compact", "compact"),
            label=f"example6(alpha={alpha},m={m})")
        # the log-radius support stays exact even when the outer radius
        # overflows floating range
        V.support_t = (1.0, t_hi)
        return V
    if name == "ckmw_radial":
        profile = params.pop("profile")
        r_lo = float(params.pop("r_lo", 0.0))
        r_hi = float(params.pop("r_hi", math.inf))
        if params:
            raise UnknownName(f"unexpected parameters: {params}")
        return RadialClosedForm(profile=profile, support=(r_lo, r_hi),
                                label="ckmw_radial")
    raise UnknownName(f"no example potential named {name!r}")


# --------------------------------------------------------------------------
# weighted integration


WeightSpec = Union[str, Callable[[np.ndarray], np.ndarray]]


def _weight_xy(weight: WeightSpec, p: float):
    if weight == "one":
        return lambda x1, x2: 1.0
    if weight == "log_abs":
        def w(x1, x2):
            r = np.hypot(x1, x2)
            with np.errstate(divide="ignore"):
                return 1.0 + np.abs(np.log(np.where(r > 0, r, 1.0)))
        return w
    if weight == "power":
        return lambda x1, x2: np.hypot(x1, x2) ** (2.0 * (p - 1.0))
    if weight == "strip_linear":
        return lambda x1, x2: 1.0 + np.abs(x1)
    if callable(weight):
        return lambda x1, x2: weight(np.hypot(x1, x2))
    raise ValueError(f"unknown weight {weight!r}")


def _radial_integrand(V: Potential, p: float, weight: WeightSpec):
    """t-space integrand F with  integral(V^p w dx) = int F(t) dt."""
    g = V.log_mass
    if weight == "log_abs" and p == 1.0:
        return lambda t: TWO_PI * V.a_density(t)
    if weight == "power":
        return lambda t: TWO_PI * g(t) ** p
    if weight == "one" or (callable(weight)) or weight == "log_abs":
        def base(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(all="ignore"):
                vals = g(t) ** p * np.exp(-2.0 * (p - 1.0) * t)
            vals = np.where(np.isfinite(vals), vals, 0.0)
            if weight == "log_abs":
                vals = vals * (1.0 + np.abs(t))
            elif callable(weight):
                vals = vals * weight(np.exp(t))
            return TWO_PI * vals
        return base
    raise ValueError(f"weight {weight!r} not usable on radial regions")


def integrate(V: Potential, region: Optional[Region], p: float = 1.0,
              weight: WeightSpec = "one", rel_tol: float = 1e-8,
              max_panels: int = 4096) -> float:
    """Integral of V(x)^p * weight(x) over the region (None = whole plane).

    Radial potentials over origin-centred regions reduce to one-dimensional
    adaptive quadrature in t = ln r; everything else uses nested 2-d
    quadrature.  Grid potentials integrate their interpolant exactly over
    rectangles when the weight is trivial.

    Raises NonConvergent when the integrand is too singular for the panel
    budget, or when an unbounded integral fails the expanding-window Cauchy
    test (numerically divergent).
    """
    if p < 1.0:
        raise ValueError("need p >= 1")
    if isinstance(V, Scaled):
        if V.alpha == 0.0:
            return 0.0
        return V.alpha ** p * integrate(V.inner, region, p, weight, rel_tol,
                                        max_panels)
    if isinstance(V, SumPotential) and p == 1.0:
        return sum(integrate(part, region, 1.0, weight, rel_tol, max_panels)
                   for part in V.parts)

    origin_disk = isinstance(region, Disk) and region.center.x1 == 0.0 \
        and region.center.x2 == 0.0
    radialish = region is None or isinstance(region, Annulus) or origin_disk

    if radialish and V.is_radial:
        t_lo, t_hi = V.support_t
        if isinstance(region, Annulus):
            t_lo = max(t_lo, math.log(region.r_in) if region.r_in > 0 else -math.inf)
            t_hi = min(t_hi, math.log(region.r_out))
        elif origin_disk:
            t_hi = min(t_hi, math.log(region.radius))
        if t_hi <= t_lo:
            return 0.0
        f = _radial_integrand(V, p, weight)
        if math.isfinite(t_lo) and math.isfinite(t_hi):
            return adaptive_quad(f, t_lo, t_hi, rel_tol, max_panels=max_panels)
        value, converged = expanding_integral(f, t_lo, t_hi, rel_tol,
                                              max_panels=max_panels)
        if not converged:
            raise NonConvergent(
                "unbounded radial integral failed the Cauchy tail test "
                "(numerically divergent)")
        return value

    if isinstance(region, (Rect, StripRect)):
        rect = region.as_rect() if isinstance(region, StripRect) else region
        if isinstance(V, GridSampled) and weight == "one":
            return V.integrate_pow_rect(rect.x1_lo, rect.x1_hi,
                                        rect.x2_lo, rect.x2_hi, p)
        w = _weight_xy(weight, p)

        def f(x, y):
            vals = V.eval(np.full_like(y, x), y) ** p
            return vals * w(np.full_like(y, x), y)
        return adaptive_quad_2d(f, rect.x1_lo, rect.x1_hi, rect.x2_lo,
                                rect.x2_hi, rel_tol=max(rel_tol, 1e-9))

    if radialish and not V.is_radial:
        # polar quadrature in (t, theta) over an origin-centred region
        t_lo, t_hi = V.support_t
        if isinstance(region, Annulus):
            t_lo = max(t_lo, math.log(region.r_in) if region.r_in > 0 else -math.inf)
            t_hi = min(t_hi, math.log(region.r_out))
        elif origin_disk:
            t_hi = min(t_hi, math.log(region.radius))
        if not math.isfinite(t_hi):
            raise ValueError(
                "non-radial potential with unbounded support needs explicit "
                "support_t metadata for polar integration")
        if not math.isfinite(t_lo):
            t_lo = min(t_hi - 1.0, -60.0)  # bounded interpolants: mass near 0
        if t_hi <= t_lo:
            return 0.0
        w = _weight_xy(weight, p)

        def f(t, theta):
            r = math.exp(t)
            x1 = r * np.cos(theta)
            x2 = r * np.sin(theta)
            return (V.eval(x1, x2) ** p) * w(x1, x2) * (r * r)
        return adaptive_quad_2d(f, t_lo, t_hi, 0.0, TWO_PI,
                                rel_tol=max(rel_tol, 1e-9))

    if isinstance(region, Disk):
        c = region.center
        w = _weight_xy(weight, p)

        def f(rho, theta):
            x1 = c.x1 + rho * np.cos(theta)
            x2 = c.x2 + rho * np.sin(theta)
            return (V.eval(x1, x2) ** p) * w(x1, x2) * rho
        return adaptive_quad_2d(f, 0.0, region.radius, 0.0, TWO_PI,
                                rel_tol=max(rel_tol, 1e-9))

    raise ValueError(f"cannot integrate over region {region!r}")


# --------------------------------------------------------------------------
# bump mixtures (grid-sampled, used by partition studies)


def gaussian_mixture_grid(centers: Sequence[tuple[float, float]],
                          amplitudes: Sequence[float],
                          widths: Sequence[float],
                          grid_n: int = 129,
                          extent: tuple[float, float, float, float] = (0, 1, 0, 1),
                          ) -> GridSampled:
    """Sample a sum of isotropic Gaussian bumps onto a node grid."""
    x_lo, x_hi, y_lo, y_hi = extent
    xs = np.linspace(x_lo, x_hi, grid_n)
    ys = np.linspace(y_lo, y_hi, grid_n)
    X, Y = np.meshgrid(xs, ys)
    vals = np.zeros_like(X)
    for (cx, cy), a, s in zip(centers, amplitudes, widths):
        vals += a * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * s * s))
    return GridSampled(x_lo, y_lo, (x_hi - x_lo) / (grid_n - 1),
                       (y_hi - y_lo) / (grid_n - 1), vals, label="bump_mixture")


def random_bump_mixture(seed: int, n_bumps: Optional[int] = None,
                        grid_n: int = 129,
                        amp_range: tuple[float, float] = (50.0, 100.0),
                        width_range: tuple[float, float] = (0.025, 0.04),
                        ) -> GridSampled:
    """Deterministic random mixture of well-separated sharp bumps on the
    unit square."""
    rng = np.random.default_rng(seed)
    if n_bumps is None:
        n_bumps = int(rng.integers(1, 13))
    centers: list[tuple[float, float]] = []
    attempts = 0
    while len(centers) < n_bumps and attempts < 4000:
        c = tuple(rng.uniform(0.12, 0.88, size=2))
        if all((c[0] - o[0]) ** 2 + (c[1] - o[1]) ** 2 > 0.18 ** 2
               for o in centers):
            centers.append(c)
        attempts += 1
    amps = rng.uniform(*amp_range, size=len(centers))
    widths = rng.uniform(*width_range, size=len(centers))
    return gaussian_mixture_grid(centers, amps, widths, grid_n=grid_n)


# --------------------------------------------------------------------------
# potential spec files


def load_potential_spec(path: Union[str, Path]) -> Potential:
    """Load a potential from a JSON spec document.

    The document has fields {"kind", "params"}.  Grid kinds reference a
    companion CSV file (relative to the document) with a header line
    nx, ny, x_lo, x_hi, y_lo, y_hi followed by row-major node values.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    return _potential_from_dict(doc, path.parent)


def _potential_from_dict(doc: dict, base: Path) -> Potential:
    kind = doc.get("kind")
    params = dict(doc.get("params", {}))
    if kind in ("inverse_square", "example2", "example4", "example6"):
        return named_example(kind, **params)
    if kind == "grid":
        return load_grid_csv(base / params["file"])
    if kind == "scaled":
        return Scaled(float(params["alpha"]),
                      _potential_from_dict(params["inner"], base))
    if kind == "sum":
        return SumPotential([_potential_from_dict(part, base)
                             for part in params["parts"]])
    if kind == "restricted":
        return Restricted(_potential_from_dict(params["inner"], base),
                          _region_from_dict(params["region"]))
    raise UnknownName(f"unknown potential kind {kind!r}")


def _region_from_dict(doc: dict) -> Region:
    kind = doc.get("kind")
    if kind == "annulus":
        return Annulus(float(doc["r_in"]), float(doc["r_out"]))
    if kind == "disk":
        c = doc.get("center", [0.0, 0.0])
        return Disk(Point2(float(c[0]), float(c[1])), float(doc["radius"]))
    if kind == "rect":
        return Rect(float(doc["x1_lo"]), float(doc["x1_hi"]),
                    float(doc["x2_lo"]), float(doc["x2_hi"]))
    if kind == "strip_rect":
        return StripRect(float(doc["alpha"]), float(doc["beta"]),
                         float(doc.get("height", math.pi)))
    raise UnknownName(f"unknown region kind {kind!r}")


def load_grid_csv(path: Union[str, Path]) -> GridSampled:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        nx, ny = int(header[0]), int(header[1])
        x_lo, x_hi, y_lo, y_hi = (float(v) for v in header[2:6])
        data = np.loadtxt(fh, delimiter=",")
    values = np.asarray(data, dtype=float).reshape(ny, nx)
    return GridSampled(x_lo, y_lo, (x_hi - x_lo) / (nx - 1),
                       (y_hi - y_lo) / (ny - 1), values)


def save_grid_csv(path: Union[str, Path], grid: GridSampled) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{grid.nx},{grid.ny},{grid.x_lo},{grid.x_hi},"
                 f"{grid.y_lo},{grid.y_hi}\n")
        for row in grid.values:
            fh.write(",".join(repr(v) for v in row) + "\n")
