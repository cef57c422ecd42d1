"""Exception taxonomy shared by all modules.

The CLI maps these onto process exit codes: input/shape problems exit 2,
missing weights exit 3, corrupt files exit 4.
"""


class McsrError(Exception):
    """Base class for all package errors."""


class ConfigError(McsrError):
    """A configuration or shape contract was violated."""


class InputError(McsrError):
    """User-supplied data (sizes, file contents, config values) is invalid."""


class MissingWeightsError(McsrError):
    """The weight store lacks parameters the forward pass needs."""

    def __init__(self, names):
        self.names = sorted(names)
        super().__init__("missing weights: " + ", ".join(self.names))


class CorruptFileError(McsrError):
    """A binary file failed structural validation.

    ``offset`` is the byte position at which the problem was detected.
    """

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")
