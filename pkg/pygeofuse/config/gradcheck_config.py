# pygeofuse/config/gradcheck_config.py

from pathlib import Path
from typing import List, Union

import pandas as pd

from .base import BaseConfig
from ..defaults import loader
from ..errors import ConfigurationError, NumericalError
from ..nn import GradCheckRow, run_gradcheck_suite
from ..utils import (
    get_caller_dir,
    out_dir_handler,
    run_command,
    RunLog,
)

DEFAULTS = loader.load("gradcheck")

GRADCHECK_COLUMNS = ["scope", "operation", "max_rel_error", "passed"]

class GradCheckConfig(BaseConfig):
    """
    Compare reverse-mode gradients against central finite differences

    Parameters
    ----------
    `out_dir` : Union[str, Path]
        Directory receiving `gradcheck.csv`

    `scope` : str, optional
        - "all": every group plus the end-to-end fusion and loss pipeline (default)
        - "core", "attention", "fusion", "losses", "encoder"

    `tol` : float, optional
        Largest accepted relative error
        - 1e-4 (default)

    `step` : float, optional
        Central difference step
        - 1e-5 (default)

    `seed` : int, optional
        - 0 (default)
    """

    DEFAULTS = DEFAULTS

    def __init__(
        self,
        out_dir: Union[str, Path],
        scope: str = "all",
        tol: float = 1e-4,
        step: float = 1e-5,
        seed: int = 0,
    ):
        super().__init__()

        self.out_dir = Path(out_dir)
        self.scope = scope
        self.tol = tol
        self.step = step
        self.seed = seed

        self._defaults = DEFAULTS
        self._caller_dir = get_caller_dir()

    @property
    def table(self) -> Path:
        return self.out_dir / "gradcheck.csv"

    def _validate(self) -> None:
        self._check_required_files()
        self._validate_choices()

        if self.tol < 0:
            raise ConfigurationError(f"tol is {self.tol} but must be >= 0")
        if not self.step > 0:
            raise ConfigurationError(f"step is {self.step} but must be > 0")

    def _execute(self, log: RunLog) -> List[GradCheckRow]:
        rows = run_gradcheck_suite(self.scope, self.tol, seed=self.seed, h=self.step, log=log.info)

        frame = pd.DataFrame(rows, columns=GRADCHECK_COLUMNS)
        frame.to_csv(self.table, index=False, lineterminator="\n", float_format="%.6e")
        print(frame.to_string(index=False, float_format=lambda v: f"{v:.3e}"))

        offenders = [row for row in rows if not row.passed]
        if offenders:
            listing = ", ".join(f"{r.scope}/{r.operation} ({r.max_rel_error:.3e})" for r in offenders)
            raise NumericalError(f"{len(offenders)} gradient checks exceed tol {self.tol:g}: {listing}")
        return rows

    def run(self) -> List[GradCheckRow]:
        self._resolve_all_path(self._caller_dir)

        self._validate()

        out_dir_handler(self.out_dir)
        self.echo(self.out_dir)

        args = self._get_command_args("gradcheck")
        output = run_command(args, self._execute, echo=self._write_on_terminal)

        self._handle_command_output(
            output=output,
            output_identifier="Gradient check",
            output_path=str(self.table),
            log_dir=self.out_dir,
        )
        return output.value
