"""Exception types shared across the package."""


class DegenerateDirectionError(ValueError):
    """The pre-normalization filter direction has (numerically) zero norm.

    Raised instead of silently perturbing the iterate; an optimizer run that
    hits this is reported as undecided rather than patched up.
    """


class OffManifoldError(ValueError):
    """A student state violates the unit-norm constraint on shortcut + filter."""


class InfeasibleRegionError(RuntimeError):
    """Rejection sampling exhausted its proposal budget for a region."""
