"""Eigenvalue-counting bounds for two-dimensional Schrodinger operators.

The package computes weighted annulus functionals of a nonnegative potential
V, assembles several upper bounds for the number of non-positive eigenvalues
of -Laplace - V on the plane and on a strip, constructs the measure-balanced
square partition behind the local (L^p) part of those bounds, and checks
everything against exact eigenvalue counts of discretized operators obtained
by matrix inertia.
"""

from .geometry import (Annulus, Disk, Point2, Rect, Region, StripRect,
                       annulus_U, annulus_U_log, annulus_W, annulus_W_log,
                       strip_Q, strip_S)
from .potentials import (CartesianClosedForm, GridSampled, Potential,
                         RadialClosedForm, Restricted, Scaled, SumPotential,
                         TailInfo, integrate, load_potential_spec,
                         named_example)

__all__ = [
    "Annulus", "Disk", "Point2", "Rect", "Region", "StripRect",
    "annulus_U", "annulus_U_log", "annulus_W", "annulus_W_log",
    "strip_Q", "strip_S",
    "CartesianClosedForm", "GridSampled", "Potential", "RadialClosedForm",
    "Restricted", "Scaled", "SumPotential", "TailInfo", "integrate",
    "load_potential_spec", "named_example",
]
