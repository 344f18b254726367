from app.core.config import settings
from app.initializers.logging import setup_logging


def startup_handler(args) -> None:
    setup_logging("DEBUG" if getattr(args, "verbose", False) else settings.LOG_LEVEL)
