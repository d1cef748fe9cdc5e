# pygeofuse/commands/evaluate.py

from pathlib import Path
from typing import List, Optional, Union

from ..config import EvalConfig
from ..parsers import EvalParser

def evaluate(
    data_dir: Union[str, Path],
    checkpoint: Union[str, Path],
    out_dir: Union[str, Path],

    # Optional parameters
    split: str = "test",
    directions: str = "both",
    severity: float = 0.7,
    seed: int = 0,
    modality: Optional[str] = None,
    conditions: Optional[List[str]] = None,

) -> EvalParser:
    """
    Evaluate a checkpoint under the ten weather conditions

    Parameters
    ----------
    `data_dir` : Union[str, Path]
        Dataset root written by `synth_gen`

    `checkpoint` : Union[str, Path]
        Checkpoint written by `train`

    `out_dir` : Union[str, Path]
        Directory receiving `report.json` and `report.csv`

    `split` : str, optional
        - "train"
        - "test" (default)

    `directions` : str, optional
        - "both" (default)
        - "d2s"
        - "s2d"

    `severity` : float, optional
        - 0.7 (default)

    `seed` : int, optional
        - 0 (default)

    `modality` : str, optional
        - None: the modality stored in the checkpoint (default)

    `conditions` : List[str], optional
        - None: all ten conditions (default)

    Returns
    -------
    EvalParser object
        - An EvalParser instance giving access to the report table and the JSON report.
    """

    config = EvalConfig(
        data_dir=data_dir,
        checkpoint=checkpoint,
        out_dir=out_dir,
        split=split,
        directions=directions,
        severity=severity,
        seed=seed,
        modality=modality,
        conditions=conditions,
    )

    config.run()

    return EvalParser(config)
