# pygeofuse/commands/gradcheck.py

from pathlib import Path
from typing import Union

from ..config import GradCheckConfig
from ..parsers import GradCheckParser

def gradcheck(
    out_dir: Union[str, Path],

    # Optional parameters
    scope: str = "all",
    tol: float = 1e-4,
    step: float = 1e-6,
    seed: int = 0,

) -> GradCheckParser:
    """
    Check every differentiable operation against central finite differences

    Parameters
    ----------
    `out_dir` : Union[str, Path]
        Directory receiving `gradcheck.csv`

    `scope` : str, optional
        - "all" (default)
        - "core", "attention", "fusion", "losses", "encoder"

    `tol` : float, optional
        - 1e-4 (default)

    `step` : float, optional
        - 1e-5 (default)

    `seed` : int, optional
        - 0 (default)

    Returns
    -------
    GradCheckParser object
        - A GradCheckParser instance giving access to the table of relative errors.

    Raises
    ------
    NumericalError
        If any operation exceeds `tol`; the table is written first.
    """

    config = GradCheckConfig(
        out_dir=out_dir,
        scope=scope,
        tol=tol,
        step=step,
        seed=seed,
    )

    config.run()

    return GradCheckParser(config)
