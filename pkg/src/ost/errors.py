"""Exception types shared across the package."""


class OstError(Exception):
    """Base class for all package-specific errors."""


class DecodeError(OstError):
    """Audio file could not be read or parsed."""


class UnsupportedEncodingError(OstError):
    """Audio file uses an encoding outside 16-bit PCM / 32-bit float."""


class DataError(OstError):
    """Malformed input data (ground truth, activations, dictionaries)."""


class LpInfeasibleError(OstError):
    """Linear program has no feasible point."""


class LpUnboundedError(OstError):
    """Linear program objective is unbounded below."""


class LpGuardError(OstError):
    """Problem size exceeds the desk-scale guard."""


class NumericError(OstError):
    """Numerical failure inside a solver (iteration blow-up, NaN)."""
