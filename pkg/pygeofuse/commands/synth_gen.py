# pygeofuse/commands/synth_gen.py

from pathlib import Path
from typing import Optional, Union

from ..config import SynthGenConfig
from ..parsers import SynthGenParser

def synth_gen(
    out_dir: Union[str, Path],

    # Optional parameters
    classes: int = 32,
    views_per_class: int = 8,
    test_views_per_class: Optional[int] = None,
    size: int = 96,
    seed: int = 0,
    force: bool = False,

) -> SynthGenParser:
    """
    Render a synthetic cross-view dataset: one satellite and one roadmap raster
    per class, shared by the train and test splits, plus drone views of each split

    Parameters
    ----------
    `out_dir` : Union[str, Path]
        Dataset root, e.g. `"data/desk32"`
        - If the path is relative, it is resolved relative to the directory
        of the calling script
        - An existing non-empty directory is refused unless `force` is set

    `classes` : int, optional
        Number of location classes
        - 32 (default)

    `views_per_class` : int, optional
        Training drone views per class
        - 8 (default)

    `test_views_per_class` : int, optional
        Test drone views per class
        - None: same as `views_per_class` (default)

    `size` : int, optional
        Raster side length in pixels
        - 96 (default)

    `seed` : int, optional
        - 0 (default)

    `force` : bool, optional
        - True
        - False (default)

    Returns
    -------
    SynthGenParser object
        - A SynthGenParser instance giving access to the manifest and the dataset splits.
    """

    config = SynthGenConfig(
        out_dir=out_dir,
        classes=classes,
        views_per_class=views_per_class,
        test_views_per_class=test_views_per_class,
        size=size,
        seed=seed,
        force=force,
    )

    config.run()

    return SynthGenParser(config)
