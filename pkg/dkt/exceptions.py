"""Exception hierarchy.

Data problems derive from `ValueError`, numerical breakdowns from
`RuntimeError`, so callers that only know the builtin types keep working. The
command line maps the two families onto distinct exit codes.
"""


class DktError(Exception):
    """Base class of all errors raised by dkt."""


class DataError(DktError, ValueError):
    """Input data or configuration cannot be used."""


class NumericalError(DktError, RuntimeError):
    """A numerical routine broke down."""


class InvalidParameterError(DataError):
    """A parameter value violates its invariants."""


class SchemaError(DataError):
    """A table header or file layout does not match the expected schema."""


class ParseError(DataError):
    """A cell could not be parsed."""


class InsufficientDataError(DataError):
    """Too few measurements to estimate a quantity."""


class EmptyBlockError(DataError):
    """A parameter block has no measurements to be fitted against."""


class UnknownBiomarkerError(DataError):
    """A biomarker name or index is not known to the model."""


class UnknownDiseaseError(DataError):
    """A disease label or index is not known to the model."""


class ConstantBiomarkerError(DataError):
    """A biomarker has no spread and cannot be normalised."""


class RankDeficientError(DataError):
    """A design matrix does not have full column rank."""


class DegenerateInputError(DataError):
    """Inputs are constant or otherwise degenerate for a statistic."""


class ModelVersionError(DataError):
    """A persisted model carries an unsupported schema version."""


class CorruptModelFileError(DataError):
    """A persisted model cannot be decoded."""


class SolverFailureError(NumericalError):
    """Every optimiser restart produced a non-finite objective."""


class DegenerateNoiseError(NumericalError):
    """A zero noise variance meets a nonzero residual."""


class SingularKernelError(NumericalError):
    """A kernel matrix stayed singular after jitter escalation."""


class TooFewResamplesError(NumericalError):
    """Too many bootstrap resamples were degenerate."""
