"""Points, regions and the dyadic annulus / strip-rectangle families.

Two annulus families index the plane by log-radius t = ln|x|:

* U-annuli, doubly exponential: t runs over (2^(n-1), 2^n) for n >= 1,
  (-1, 1) for n = 0 and (-2^|n|, -2^(|n|-1)) for n <= -1.
* W-annuli, exponential shells: t runs over (n, n+1).

The strip analogues (height-pi strip, coordinate x1 in place of t) use the
same dyadic intervals: S-rectangles mirror the U-annuli and unit-width
Q-rectangles mirror the W-annuli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Point2:
    x1: float
    x2: float

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise ValueError("Point2 components must be finite")

    def norm(self) -> float:
        return math.hypot(self.x1, self.x2)


class Region:
    """Marker base class for integration regions."""


@dataclass(frozen=True)
class Annulus(Region):
    r_in: float
    r_out: float

    def __post_init__(self):
        if not (0.0 <= self.r_in < self.r_out):
            raise ValueError(f"need 0 <= r_in < r_out, got {self}")


@dataclass(frozen=True)
class Disk(Region):
    center: Point2 = field(default_factory=lambda: Point2(0.0, 0.0))
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class Rect(Region):
    x1_lo: float
    x1_hi: float
    x2_lo: float
    x2_hi: float

    def __post_init__(self):
        if self.x1_hi <= self.x1_lo or self.x2_hi <= self.x2_lo:
            raise ValueError(f"empty rectangle {self}")


@dataclass(frozen=True)
class StripRect(Region):
    """The rectangle (alpha, beta) x (0, height) inside a horizontal strip."""

    alpha: float
    beta: float
    height: float = math.pi

    def __post_init__(self):
        if self.beta <= self.alpha:
            raise ValueError("need alpha < beta")
        if self.height <= 0:
            raise ValueError("height must be positive")

    def as_rect(self) -> Rect:
        return Rect(self.alpha, self.beta, 0.0, self.height)


# log-radius of the largest representable radius
_T_MAX_REPRESENTABLE = math.log(1.7e308)


def dyadic_interval(n: int) -> tuple[float, float]:
    """Signed dyadic interval of index n: (2^(n-1), 2^n) for n >= 1,
    (-1, 1) for n = 0, mirrored for negative n."""
    if n == 0:
        return (-1.0, 1.0)
    if n >= 1:
        return (2.0 ** (n - 1), 2.0 ** n)
    return (-(2.0 ** (-n)), -(2.0 ** (-n - 1)))


def dyadic_index(t: float) -> int:
    """Index n of the dyadic interval containing t (boundary goes up)."""
    if -1.0 <= t <= 1.0:
        return 0
    n = max(1, math.floor(math.log2(abs(t))) + 1)
    # guard rounding at powers of two
    while 2.0 ** (n - 1) > abs(t):
        n -= 1
    while 2.0 ** n < abs(t):
        n += 1
    return n if t > 0 else -n


def annulus_U_log(n: int) -> tuple[float, float]:
    """Log-radius bounds of the n-th doubly-exponential annulus."""
    return dyadic_interval(n)


def annulus_U(n: int) -> tuple[float, float]:
    """Radius bounds of the n-th doubly-exponential annulus.

    Raises OverflowError when a bound leaves floating range; callers should
    switch to annulus_U_log in that regime.
    """
    t_lo, t_hi = annulus_U_log(n)
    if t_hi > _T_MAX_REPRESENTABLE or t_lo < -_T_MAX_REPRESENTABLE:
        raise OverflowError(
            f"annulus {n} bounds exceed floating range; use annulus_U_log")
    return (math.exp(t_lo), math.exp(t_hi))


def annulus_W_log(n: int) -> tuple[float, float]:
    return (float(n), float(n + 1))


def annulus_W(n: int) -> tuple[float, float]:
    t_lo, t_hi = annulus_W_log(n)
    if t_hi > _T_MAX_REPRESENTABLE:
        raise OverflowError(
            f"shell {n} bounds exceed floating range; use annulus_W_log")
    return (math.exp(t_lo), math.exp(t_hi))


def strip_S(n: int, height: float = math.pi) -> StripRect:
    """Dyadic strip rectangle S_n (mirror of the n-th U-annulus)."""
    lo, hi = dyadic_interval(n)
    return StripRect(lo, hi, height)


def strip_Q(n: int, height: float = math.pi) -> StripRect:
    """Unit-width strip rectangle Q_n (mirror of the n-th W-shell)."""
    return StripRect(float(n), float(n + 1), height)
