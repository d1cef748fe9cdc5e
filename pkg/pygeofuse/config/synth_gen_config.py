# pygeofuse/config/synth_gen_config.py

from pathlib import Path
from typing import List, Optional, Tuple, Union

from .base import BaseConfig
from ..bench import export_dataset
from ..defaults import loader
from ..errors import ConfigurationError
from ..utils import (
    get_caller_dir,
    out_dir_handler,
    run_command,
    RunLog,
)

DEFAULTS = loader.load("synth_gen")

class SynthGenConfig(BaseConfig):
    """
    Render a synthetic cross-view dataset (drone, satellite and roadmap views)

    Parameters
    ----------
    `out_dir` : Union[str, Path]
        Directory the dataset is written to
        - If the path is relative, it is resolved relative to the directory
        of the calling script
        - If the path is absolute, it is used as-is
        An existing non-empty directory is refused unless `force` is set

    `classes` : int, optional
        Number of location classes
        - 32 (default)

    `views_per_class` : int, optional
        Training drone views per class
        - 8 (default)

    `test_views_per_class` : int, optional
        Test drone views per class, rendered from a seed stream disjoint from
        the training views
        - None: same as `views_per_class` (default)

    `size` : int, optional
        Side length of every raster in pixels
        - 96 (default)

    `seed` : int, optional
        Root seed; the same seed reproduces every file bit for bit
        - 0 (default)

    `force` : bool, optional
        Write into an existing non-empty output directory
        - True
        - False (default)
    """

    DEFAULTS = DEFAULTS

    def __init__(
        self,
        out_dir: Union[str, Path],
        classes: int = 32,
        views_per_class: int = 8,
        test_views_per_class: Optional[int] = None,
        size: int = 96,
        seed: int = 0,
        force: bool = False,
    ):
        super().__init__()

        self.out_dir = Path(out_dir)
        self.classes = classes
        self.views_per_class = views_per_class
        self.test_views_per_class = test_views_per_class
        self.size = size
        self.seed = seed
        self.force = force

        self._defaults = DEFAULTS
        self._caller_dir = get_caller_dir()

    def _validate(self) -> None:
        self._check_required_files()
        self._validate_choices()

        if self.classes < 1:
            raise ConfigurationError(f"classes is {self.classes} but must be >= 1")
        if self.views_per_class < 1:
            raise ConfigurationError(f"views_per_class is {self.views_per_class} but must be >= 1")
        if self.test_views_per_class is not None and self.test_views_per_class < 1:
            raise ConfigurationError(
                f"test_views_per_class is {self.test_views_per_class} but must be >= 1"
            )
        if self.size < 8:
            raise ConfigurationError(f"size is {self.size} but must be >= 8")
        if self.seed < 0:
            raise ConfigurationError(f"seed is {self.seed} but must be non-negative")

    def _execute(self, log: RunLog) -> List[Tuple[str, str, int, str]]:
        test_views = self.test_views_per_class or self.views_per_class
        rows = export_dataset(
            self.out_dir,
            num_classes=self.classes,
            image_size=self.size,
            seed=self.seed,
            train_drones=self.views_per_class,
            test_drones=test_views,
        )
        log.info(
            f"{self.classes} classes, {self.views_per_class} train and {test_views} test drone views "
            f"per class, {len(rows)} files at {self.size}x{self.size}"
        )
        return rows

    def run(self) -> List[Tuple[str, str, int, str]]:
        self._resolve_all_path(self._caller_dir)

        self._validate()

        out_dir_handler(self.out_dir, force=self.force, must_be_empty=True)
        self.echo(self.out_dir)

        args = self._get_command_args("synth_gen")
        output = run_command(args, self._execute, echo=self._write_on_terminal)

        self._handle_command_output(
            output=output,
            output_identifier="Dataset generation",
            output_path=str(self.out_dir),
            log_dir=self.out_dir,
        )
        return output.value
