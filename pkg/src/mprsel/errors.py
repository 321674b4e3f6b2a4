"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and maps to one of the
CLI exit codes (2 config, 3 data, 4 numerical).
"""


class MPRError(Exception):
    code = "MPR_ERROR"
    exit_code = 1


class ConfigError(MPRError):
    code = "CONFIG_ERROR"
    exit_code = 2


class DataError(MPRError):
    code = "DATA_ERROR"
    exit_code = 3


class NumericalError(MPRError):
    code = "NUMERICAL_ERROR"
    exit_code = 4


class NonPositiveTime(DataError):
    code = "NON_POSITIVE_TIME"


class BadIndicator(DataError):
    code = "BAD_INDICATOR"


class DimensionMismatch(DataError):
    code = "DIMENSION_MISMATCH"


class NoEvents(DataError):
    code = "NO_EVENTS"


class ConstantColumnNotIntercept(DataError):
    code = "CONSTANT_COLUMN"


class ParseError(DataError):
    code = "PARSE_ERROR"


class TooFewPoints(DataError):
    code = "TOO_FEW_POINTS"


class WrongScalarCount(ConfigError):
    code = "WRONG_SCALAR_COUNT"


class MissingAdaptiveWeights(ConfigError):
    code = "MISSING_ADAPTIVE_WEIGHTS"


class NonFiniteResult(NumericalError):
    code = "NON_FINITE_RESULT"


class SingularSystem(NumericalError):
    code = "SINGULAR_SYSTEM"


class CalibrationFailed(NumericalError):
    code = "CALIBRATION_FAILED"


class InputNotFound(DataError):
    code = "FILE_NOT_FOUND"
