# pygeofuse/commands/ablation.py

from pathlib import Path
from typing import List, Optional, Sequence, Union

from ..config import AblationConfig
from ..parsers import AblationParser

def ablation(
    data_dir: Union[str, Path],
    out_dir: Union[str, Path],

    # Optional parameters
    configs: Sequence[str] = ("token_only", "token_channel", "full"),
    seeds: Sequence[int] = (0, 1, 2),
    blank_control: bool = False,
    lambdas: Optional[List[float]] = None,
    taus: Optional[List[float]] = None,
    **settings,

) -> AblationParser:
    """
    Compare fusion configurations over several seeds

    Parameters
    ----------
    `data_dir` : Union[str, Path]
        Dataset root with train and test splits

    `out_dir` : Union[str, Path]
        Directory receiving `ablation.csv` and `ablation_runs.csv`

    `configs` : Sequence[str], optional
        - "token_only", "token_channel", "full" (default: all three)

    `seeds` : Sequence[int], optional
        - (0, 1, 2) (default)

    `blank_control` : bool, optional
        - True
        - False (default)

    `lambdas`, `taus` : List[float], optional
        Extra full-config runs over a grid
        - None (default)

    `**settings`
        Model, schedule and evaluation parameters as for `train`

    Returns
    -------
    AblationParser object
        - An AblationParser instance giving access to the summary and per-seed tables.
    """

    config = AblationConfig(
        data_dir=data_dir,
        out_dir=out_dir,
        configs=list(configs),
        seeds=list(seeds),
        blank_control=blank_control,
        lambdas=lambdas,
        taus=taus,
        **settings,
    )

    config.run()

    return AblationParser(config)
