"""Exception types shared across the package."""


class VeplabError(Exception):
    """Base class for errors raised by veplab."""


class InputError(VeplabError):
    """Bad arguments, malformed files, or violated preconditions."""


class ParseError(InputError):
    """A file could not be parsed; the message names the offending row."""


class DegenerateDataError(VeplabError):
    """Numerically degenerate input (zero variance, zero error term, ...)."""
