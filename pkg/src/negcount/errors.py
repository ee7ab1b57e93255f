"""Exception types shared across the package."""


class NegcountError(Exception):
    """Base class for all package errors."""


class NonConvergent(NegcountError):
    """Adaptive quadrature exhausted its subdivision budget.

    Signals an integrand too singular (or genuinely divergent) for the
    requested tolerance and budget; never returned as a silent partial sum.
    """


class WindowTooSmall(NegcountError):
    """A term-series window ends while edge terms still exceed the threshold."""


class InvariantViolation(NegcountError):
    """An internal invariant of the partition construction failed."""


class BisectionStall(NegcountError):
    """A monotone root-find could not bracket or reach its tolerance."""


class SparsenessViolated(NegcountError):
    """A strip cover step would need a cut of length < 1, so the input
    potential was not sparse for the given threshold."""


class GridTooLarge(NegcountError):
    """A discretization request exceeds the configured size budget."""


class SizeExceeded(NegcountError):
    """Dense eigenvalue oracle called beyond its dimension cap."""


class UnknownName(NegcountError):
    """Unknown named example potential or spec-file kind."""


class DiniViolated(NegcountError):
    """The weight function failed the numerical Dini-integral check."""


class IterationBudgetExceeded(NegcountError):
    """Partition refinement did not terminate within the sweep budget."""


class PremiseFailed(NegcountError):
    """Prefix premise of the two-sequence summation lemma failed."""

    def __init__(self, m: int, lhs: float, rhs: float):
        self.m = m
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(f"premise fails at prefix m={m}: {lhs!r} > {rhs!r}")
