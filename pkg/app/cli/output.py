"""Report emission shared by every command."""

from contextlib import contextmanager
import logging
from pathlib import Path
import time

from app.models.report import RunReport
from app.utils.exceptions import EXIT_FAILED, EXIT_OK


logger = logging.getLogger(__name__)


@contextmanager
def stopwatch():
    """Yields a callable returning the seconds elapsed since entry."""
    start = time.perf_counter()
    yield lambda: time.perf_counter() - start


def emit(report: RunReport, json_path: str | None) -> int:
    """Print the summary lines, write the JSON report if asked, and return the exit code."""
    for line in report.messages:
        print(line)
    print("PASS" if report.passed else "FAIL")
    if json_path:
        path = Path(json_path)
        path.write_text(report.model_dump_json(indent=2))
        logger.info(f"Report written to {path}")
    return EXIT_OK if report.passed else EXIT_FAILED
