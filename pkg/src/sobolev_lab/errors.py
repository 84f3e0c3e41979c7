"""Exception hierarchy."""


class SobolevLabError(Exception):
    pass


class DomainError(SobolevLabError, ValueError):
    """Parameters outside the admissible range."""


class ConstructionError(SobolevLabError, ValueError):
    """A test function could not be built with finite norms."""


class DegenerateInputError(SobolevLabError, ValueError):
    """A normalisation by a vanishing norm was requested."""


class NonConvergenceError(SobolevLabError, ArithmeticError):
    """Successive quadrature refinements disagree beyond tolerance."""


class DimensionUnsupportedError(SobolevLabError, ValueError):
    pass


class NormMismatchError(SobolevLabError, ValueError):
    """The two functions in a reduction certificate have different L^{p*} norms."""
