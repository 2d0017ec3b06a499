"""Exception types shared across the toolkit."""


class CbrBenchError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CbrBenchError, ValueError):
    """Operand shapes are incompatible; the message names both shapes."""


class InvalidArgumentError(CbrBenchError, ValueError):
    """An argument is outside its documented domain."""


class ConfigError(CbrBenchError, ValueError):
    """A configuration document is malformed or carries unknown keys."""


class IngestionError(CbrBenchError, ValueError):
    """A covariate file could not be ingested."""


class NormalizationError(CbrBenchError, ValueError):
    """Feature normalization is impossible (e.g. a constant column)."""


class GenerationError(CbrBenchError, RuntimeError):
    """The data-generating process could not produce a valid dataset."""


class OracleSingularityError(CbrBenchError, RuntimeError):
    """The response denominator fell below the guard threshold."""


class TrainingDivergenceError(CbrBenchError, RuntimeError):
    """Training produced a non-finite loss or gradient."""


class SinkhornError(CbrBenchError, RuntimeError):
    """Sinkhorn scaling produced non-finite potentials."""


class RankError(CbrBenchError, RuntimeError):
    """A closed-form solve hit a singular design matrix."""


class EvaluationError(CbrBenchError, RuntimeError):
    """An evaluation request is unsatisfiable (missing oracle, empty rows)."""


class SweepError(CbrBenchError, RuntimeError):
    """An experiment sweep could not produce any usable result."""
