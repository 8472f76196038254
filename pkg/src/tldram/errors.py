"""Exception hierarchy.

The CLI maps ``ConfigError``/``WorkloadError`` to exit code 1 and
``InternalError`` (including ``ProtocolError``) to exit code 2.
"""


class TLDRAMError(Exception):
    pass


class ConfigError(TLDRAMError, ValueError):
    pass


class WorkloadError(TLDRAMError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InternalError(TLDRAMError, RuntimeError):
    pass


class ProtocolError(InternalError):
    """A DRAM command was issued that the bank state machine cannot accept."""
