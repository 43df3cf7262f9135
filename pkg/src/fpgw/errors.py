"""Exception hierarchy for the fpgw package."""


class FpgwError(Exception):
    """Base class for every error raised by fpgw."""


class ShapeError(FpgwError, ValueError):
    """Array dimensions do not agree."""


class InvalidPlanError(FpgwError):
    """A transport plan has negative entries beyond tolerance."""


class ConstraintError(FpgwError):
    """A mass or domination constraint is violated."""


class SolverError(FpgwError):
    """Numeric overflow or failure inside a solver."""


class UnsupportedLossError(FpgwError):
    """The requested operation is not available for this loss."""


class OracleBudgetError(FpgwError):
    """Grid enumeration would exceed its cell budget."""


class GraphFormatError(FpgwError, ValueError):
    """Malformed graph input or incompatible feature kinds."""


class ConfigError(FpgwError):
    """Invalid configuration file or environment setting."""
