"""Transport of potentials between the punctured plane and a strip.

The logarithm maps the plane cut along the positive real axis onto the strip
of height 2 pi.  A potential V on the plane transports to the strip as

    Vt(y) = |d/dy exp(y)|^2 * V(exp(y)) = e^(2 y1) V(e^(y1) cos y2, e^(y1) sin y2),

the push-forward rule for holomorphic coordinate changes (the Jacobian of a
holomorphic map is the squared modulus of its complex derivative).  Under
this transport the plane annulus terms equal the strip rectangle terms
computed with height 2 pi:  the n-th doubly-exponential annulus maps onto
the n-th dyadic strip rectangle, and the n-th exponential shell onto the
n-th unit strip rectangle, with

    A_n(V) = a_n(Vt)   and   B_n(V)^p = b_n(Vt)^p.

Passing from the 2 pi strip to the height-pi convention is an explicit
affine squeeze whose distortion factor is recorded rather than hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimates import term_A, term_B
from .potentials import Potential, _clamp
from .strip import term_a, term_b

__all__ = [
    "PushforwardPotential", "PlanePullback", "SqueezeInfo",
    "log_pushforward", "strip_to_plane", "squeeze_to_height_pi",
    "check_correspondence", "CorrespondenceReport",
]

TWO_PI = 2.0 * math.pi


class PushforwardPotential(Potential):
    """Plane potential transported to the height-2pi strip via the
    exponential map."""

    log_mass = None
    u_density = None
    is_strip = True

    def __init__(self, base: Potential):
        self.base = base
        self.height = TWO_PI
        self.direction = "plane_to_strip"
        t_lo, t_hi = base.support_t
        self.support_x1 = (t_lo, t_hi)
        self.support_t = (-math.inf, math.inf)   # not a radial plane object
        if base.is_radial:
            profile = base.profile if hasattr(base, "profile") else None
            self.x1_profile = self._radial_profile()

    def _radial_profile(self):
        base = self.base

        def prof(y1):
            y1 = np.asarray(y1, dtype=float)
            with np.errstate(all="ignore"):
                r = np.exp(y1)
                vals = np.exp(2.0 * y1) * base.eval(r, np.zeros_like(r))
            return np.where(np.isfinite(vals), vals, 0.0)
        return prof

    def eval(self, y1, y2) -> np.ndarray:
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        y1, y2 = np.broadcast_arrays(y1, y2)
        with np.errstate(all="ignore"):
            r = np.exp(y1)
            vals = np.exp(2.0 * y1) * self.base.eval(r * np.cos(y2),
                                                     r * np.sin(y2))
        return _clamp(np.where(np.isfinite(vals), vals, 0.0).copy())


class PlanePullback(Potential):
    """Strip potential transported back to the punctured plane."""

    log_mass = None
    u_density = None

    def __init__(self, strip_potential: Potential):
        self.base = strip_potential
        self.direction = "strip_to_plane"
        s_lo, s_hi = getattr(strip_potential, "support_x1",
                             (-math.inf, math.inf))
        self.support_t = (s_lo, s_hi)

    def eval(self, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1, x2 = np.broadcast_arrays(x1, x2)
        r = np.hypot(x1, x2)
        good = r > 0
        with np.errstate(all="ignore"):
            t = np.log(np.where(good, r, 1.0))
            theta = np.mod(np.arctan2(x2, x1), TWO_PI)
            vals = self.base.eval(t, theta) / np.where(good, r * r, 1.0)
        return np.where(good & np.isfinite(vals), vals, 0.0)


def log_pushforward(V: Potential) -> PushforwardPotential:
    """Transport a plane potential to the height-2pi strip.

    The removed positive real half-axis has measure zero and is ignored for
    integration purposes.
    """
    return PushforwardPotential(V)


def strip_to_plane(W: Potential) -> PlanePullback:
    """Transport a strip potential (height 2pi) back to the plane."""
    return PlanePullback(W)


@dataclass(frozen=True)
class SqueezeInfo:
    """Bookkeeping of the affine squeeze from height 2pi to height pi:
    the transported potential is multiplier * W(y1, 2 y2) and eigenvalue
    counts transfer with the recorded distortion factor."""

    multiplier: float = 4.0
    distortion: float = 2.0


class _SqueezedPotential(Potential):
    log_mass = None
    u_density = None

    def __init__(self, W: Potential, info: SqueezeInfo):
        self.base = W
        self.info = info
        self.height = math.pi
        self.support_x1 = getattr(W, "support_x1", (-math.inf, math.inf))
        profile = getattr(W, "x1_profile", None)
        if profile is not None:
            self.x1_profile = lambda y1: info.multiplier * profile(y1)

    def eval(self, y1, y2):
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        return self.info.multiplier * self.base.eval(y1, 2.0 * y2)


def squeeze_to_height_pi(W: Potential) -> tuple[Potential, SqueezeInfo]:
    """Explicit affine squeeze (y2 -> y2 / 2) onto the height-pi strip.

    Returns the squeezed potential together with the recorded multiplier,
    so the constant is visible instead of folded silently into estimates.
    """
    info = SqueezeInfo()
    return _SqueezedPotential(W, info), info


@dataclass
class CorrespondenceReport:
    n: int
    p: float
    A_term: float
    a_term: float
    delta_a: float
    B_term_p: float
    b_term_p: float
    delta_b: float


def check_correspondence(V: Potential, n: int, p: float = 2.0,
                         pushed: Optional[PushforwardPotential] = None,
                         ) -> CorrespondenceReport:
    """Evaluate both sides of the annulus / strip-rectangle term identities
    by independent quadratures and report the absolute differences."""
    W = pushed if pushed is not None else log_pushforward(V)
    A = term_A(V, n)
    a = term_a(W, n, height=W.height)
    Bp = term_B(V, n, p) ** p
    bp = term_b(W, n, p, height=W.height) ** p
    return CorrespondenceReport(n, p, A, a, abs(A - a), Bp, bp, abs(Bp - bp))
