# pygeofuse/commands/train.py

from pathlib import Path
from typing import Union

from ..config import TrainConfig
from ..parsers import TrainParser

def train(
    data_dir: Union[str, Path],
    out_dir: Union[str, Path],

    # Optional parameters
    ablate: str = "none",
    modality: str = "roadmap",
    epochs: int = 30,
    batch_size: int = 16,
    lr: float = 0.05,
    lam: float = 0.1,
    tau: float = 0.07,
    seed: int = 0,
    **settings,

) -> TrainParser:
    """
    Train a GeoFuse model on the train split of a dataset and evaluate it on
    the test split

    Parameters
    ----------
    `data_dir` : Union[str, Path]
        Dataset root written by `synth_gen`

    `out_dir` : Union[str, Path]
        Directory receiving `model.npz`, `loss_log.csv`, `config.yaml`,
        `final_eval.json` and `final_eval.csv`

    `ablate` : str, optional
        - "none" (default)
        - "token-only": channel-level fusion off and lam = 0
        - "token-channel": lam = 0
        - "no-cc": lam = 0
        - "no-it": image-text terms off

    `modality` : str, optional
        - "roadmap" (default)
        - "blank": satellite-only control
        - "pseudo": pseudo-depth from the satellite image

    `epochs` : int, optional
        - 30 (default)

    `batch_size` : int, optional
        - 16 (default)

    `lr` : float, optional
        Base learning rate, decayed at the milestones
        - 0.05 (default)

    `lam` : float, optional
        Weight of the class contrastive loss
        - 0.1 (default)

    `tau` : float, optional
        Temperature
        - 0.07 (default)

    `seed` : int, optional
        - 0 (default)

    `**settings`
        Any other `TrainConfig` parameter, e.g. `d_model=32` or `static_anchors=True`

    Returns
    -------
    TrainParser object
        - A TrainParser instance giving access to the loss log, the checkpoint and the final evaluation.
    """

    config = TrainConfig(
        data_dir=data_dir,
        out_dir=out_dir,
        ablate=ablate,
        modality=modality,
        epochs=epochs,
        batch_size=batch_size,
        lr=lr,
        lam=lam,
        tau=tau,
        seed=seed,
        **settings,
    )

    config.run()

    return TrainParser(config)
