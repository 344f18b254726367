from functools import wraps
import logging
import sys


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class StateMarkingError(Exception):
    """Base class for every library error."""


class InvalidArgument(StateMarkingError, ValueError):
    pass


class ProtocolIncomplete(InvalidArgument):
    """A measurement outcome with nonzero probability has no child node."""


class LocalityViolation(StateMarkingError):
    pass


class ResourceInvalid(StateMarkingError):
    pass


class CompositionInvalid(StateMarkingError):
    pass


class NotProductSet(StateMarkingError):
    pass


class UnsupportedPair(StateMarkingError):
    pass


def handle_cli_exceptions(func):
    """
    Decorator for command handlers: translate library errors into exit codes.

    StateMarkingError -> EXIT_USAGE with a one-line message on stderr.
    Anything else is logged with its traceback -> EXIT_FAILED.
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except StateMarkingError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except Exception as e:
            logger.error(f"Command '{func.__name__}' crashed: {str(e)}", exc_info=True)
            return EXIT_FAILED

    return wrapper
