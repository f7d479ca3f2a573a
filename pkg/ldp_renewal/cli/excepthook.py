import traceback

import datetime
import numpy as np
import re
import sys
from pathlib import Path

from . import constants as C
from ..ldp.exceptions import SimulationError

NUMERICAL_ERRORS = (ArithmeticError, SimulationError, np.linalg.LinAlgError)

def exit_code_for(exc_type) -> int:
    if issubclass(exc_type, NUMERICAL_ERRORS):
        return C.EXIT_NUMERICAL
    return C.EXIT_USAGE

def make_excepthook(path: Path):
    """Writes the traceback to error-<date>.log in ``path`` and returns the exit code for the exception.

    Installed as ``sys.excepthook`` and called by the entry point for errors it catches."""
    def excepthook(exc_type, exc_value, exc_tb) -> int:
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_tb)
            return C.EXIT_USAGE
        lines = traceback.format_exception(exc_type, exc_value, exc_tb)

        def shorten(match):
            _path = Path(match.group(1))
            relevant_parts = []
            for p in _path.parts[::-1]:
                relevant_parts.append(p)
                if p in ("envs", "Lib", "lib", "site-packages", "ldp_renewal"):
                    break
            return f'File "{Path(*relevant_parts[::-1])}"'

        # if frozen, shorten paths for privacy
        if C.FROZEN:
            lines = [re.sub(r'File "([^"]+)"', shorten, line) for line in lines]

        tb = "".join(lines)
        path.mkdir(parents=True, exist_ok=True)
        filename = path / ("error-" + datetime.datetime.now(tz=None).strftime('%Y-%m-%dT%H_%M_%S') + ".log")
        with open(filename, "w", encoding='utf-8') as f:
            f.write(tb)
        sys.stderr.write(f"Error: {exc_value}\n")
        sys.stderr.write(f"Se produjo un error. El siguiente archivo contiene los detalles: {filename}\n")
        return exit_code_for(exc_type)

    return excepthook
