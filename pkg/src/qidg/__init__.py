"""Discontinuous Galerkin solver for a quasi-incompressible Navier-Stokes-Korteweg
phase-field model with an energy-consistent midpoint time discretisation."""

__version__ = "0.1.0"

from .errors import (CapabilityError, ConfigError, ConformityError, InvalidSpecError,  # noqa: E402
                     NonconvergenceError, NonFiniteResidualError, OutOfDomainError, QidgError,
                     ShapeError, SingularSystemError, UnsupportedDimensionError)
from .mesh import Mesh, build_mesh  # noqa: E402
from .model import ModelParams  # noqa: E402
from .space import DgSpace  # noqa: E402
from .scheme import NewtonSettings, State, TimeGrid, advance, initial_state, newton_solve  # noqa: E402

__all__ = [
    "__version__", "Mesh", "build_mesh", "DgSpace", "ModelParams", "NewtonSettings", "State",
    "TimeGrid", "advance", "initial_state", "newton_solve",
    "QidgError", "InvalidSpecError", "ConformityError", "OutOfDomainError", "ShapeError",
    "CapabilityError", "UnsupportedDimensionError", "NonFiniteResidualError",
    "SingularSystemError", "NonconvergenceError", "ConfigError",
]
