"""Exception hierarchy shared across the package.

Everything raised on purpose derives from GazekitError so callers (and the
command-line front end) can catch one base class.
"""


class GazekitError(Exception):
    """Base class for all gazekit errors."""


class DegenerateGeometryError(GazekitError):
    """Coincident points or a zero-length direction where a ray is required."""


class ParameterError(GazekitError):
    """Invalid argument or configuration value."""


class LayoutMismatchError(GazekitError):
    """Two descriptors with incompatible layouts were combined."""


class SingularFitError(GazekitError):
    """Least-squares design matrix is rank deficient."""


class PredictionError(GazekitError):
    """A model could not produce a well-defined direction."""


class EvaluationError(GazekitError):
    """Responses and ground truth could not be aligned or scored."""


class ManifestError(GazekitError):
    """Base class for dataset manifest problems."""


class UnknownSchemaError(ManifestError):
    """Manifest declares a schema version this code does not understand."""


class RecordParseError(ManifestError):
    """A manifest line could not be parsed; the message names the line."""


class ManifestInvariantError(ManifestError):
    """A parsed record violates a dataset invariant; the message names the trial."""


class MissingPatchError(ManifestError):
    """A manifest references a patch file that does not exist."""
