# pygeofuse/utils/runner.py

import traceback
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional

from ..errors import GeoFuseWarning, exit_code_for


class RunLog:
    """
    Collects the detailed messages of one command run.

    Messages go to the log file written by the config after the run; with
    `echo` set they are also printed as they arrive.
    """

    def __init__(self, echo: bool = False):
        self.echo = echo
        self.lines: List[str] = []
        self.warning_count = 0

    def info(self, message: str) -> None:
        self.lines.append(message)
        if self.echo:
            print(message)

    def warn(self, message: str) -> None:
        self.warning_count += 1
        self.info(f"WARNING: {message}")

    def text(self) -> str:
        return "\n".join(self.lines)


@dataclass
class RunResult:
    args: List[str]
    returncode: int
    stdout: str
    stderr: str
    value: Any = None
    error: Optional[BaseException] = field(default=None, repr=False)


def run_command(
    args: List[str],
    func: Callable[[RunLog], Any],
    echo: bool = False,
) -> RunResult:
    """
    Run one pygeofuse command body and capture its outcome.

    The body receives a RunLog. Exceptions are captured into the result with
    the exit code of the error class; warnings raised while the body runs are
    recorded in the log.
    """
    print("\n" + "\033[34m" + "-"*20 + "\033[0m" + " Running a geofuse command " + "\033[34m" + "-"*20 + "\033[0m")

    log = RunLog(echo=echo)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", GeoFuseWarning)
        try:
            value = func(log)
            returncode, stderr, error = 0, "", None
        except Exception as exc:
            value, error = None, exc
            returncode = exit_code_for(exc)
            stderr = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))

    for item in caught:
        if issubclass(item.category, GeoFuseWarning):
            log.warn(str(item.message))
        else:
            warnings.warn_explicit(item.message, item.category, item.filename, item.lineno)

    return RunResult(
        args=list(args),
        returncode=returncode,
        stdout=log.text(),
        stderr=stderr,
        value=value,
        error=error,
    )
