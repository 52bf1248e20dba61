"""Reduction of time-dependent Lagrangian systems by a connection symmetry.

Symbolic derivation of the dynamics on TQ x R, reduction to an autonomous
symplectic system, reconstruction, and numeric verification.
"""

__version__ = "0.1.0"

from .errors import ConnredError  # noqa: E402
from .geometry import Chart, Connection, LagrangianSystem  # noqa: E402
from .symexpr import parse  # noqa: E402

__all__ = ["Chart", "Connection", "ConnredError", "LagrangianSystem", "parse", "__version__"]
