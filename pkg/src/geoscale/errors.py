"""Exception types shared across the package."""


class GeoscaleError(Exception):
    """Base class for all domain errors raised by this package.

    The CLI maps these to exit code 1 with a machine-readable JSON
    payload on stderr; anything else is a bug and propagates.
    """


class ManifestError(GeoscaleError):
    """A catalog manifest failed validation.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
