"""Exception hierarchy. Every error raised on purpose derives from QidgError."""


class QidgError(Exception):
    pass


class InvalidSpecError(QidgError, ValueError):
    """Malformed mesh or case descriptor."""


class ConformityError(QidgError):
    """Mesh is not conforming (hanging vertex, overlapping facets)."""


class OutOfDomainError(QidgError, ValueError):
    pass


class ShapeError(QidgError, ValueError):
    """Field component/space mismatch."""


class CapabilityError(QidgError):
    """Requested feature is outside what is implemented (e.g. quadrature degree)."""


class UnsupportedDimensionError(CapabilityError):
    pass


class NonFiniteResidualError(QidgError, FloatingPointError):
    pass


class SingularSystemError(QidgError):
    pass


class NonconvergenceError(QidgError):
    """Newton iteration did not reach the tolerance.

    ``residual`` is the last residual norm, ``step`` the time step index
    (``None`` when raised outside a time loop).
    """

    def __init__(self, message, residual=None, step=None, history=()):
        super().__init__(message)
        self.residual = residual
        self.step = step
        self.history = list(history)


class ConfigError(QidgError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
