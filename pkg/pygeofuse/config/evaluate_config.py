# pygeofuse/config/evaluate_config.py

from pathlib import Path
from typing import List, Optional, Union

from .base import BaseConfig
from ..bench import WeatherCondition, load_dataset
from ..defaults import loader
from ..errors import ConfigurationError, DataError
from ..nn import GeoFuseModel, ModelConfig, load_checkpoint
from ..retrieval import (
    RetrievalReport,
    evaluate_conditions,
    summary_table,
    write_report_csv,
    write_report_json,
)
from .train_config import dataset_image_size
from ..utils import (
    get_caller_dir,
    out_dir_handler,
    run_command,
    RunLog,
)

DEFAULTS = loader.load("evaluate")

class EvalConfig(BaseConfig):
    """
    Evaluate a checkpoint per weather condition in both retrieval directions

    Parameters
    ----------
    `data_dir` : Union[str, Path]
        Dataset root written by `synth_gen`

    `checkpoint` : Union[str, Path]
        Checkpoint written by `train`

    `out_dir` : Union[str, Path]
        Directory receiving `report.json` and `report.csv`

    `split` : str, optional
        Split whose drone views are the queries
        - "train"
        - "test" (default)

    `directions` : str, optional
        - "both" (default)
        - "d2s": drone -> satellite only
        - "s2d": satellite -> drone only

    `severity` : float, optional
        Weather corruption severity of the queries
        - 0.7 (default)

    `seed` : int, optional
        Seed of the query corruptions
        - 0 (default)

    `modality` : str, optional
        Auxiliary view of the gallery
        - None: the modality the checkpoint was trained with (default)
        - "roadmap", "blank" or "pseudo"

    `conditions` : List[str], optional
        Weather conditions to evaluate, e.g. `["Normal", "Fog"]`
        - None: all ten conditions (default)
    """

    DEFAULTS = DEFAULTS

    def __init__(
        self,
        data_dir: Union[str, Path],
        checkpoint: Union[str, Path],
        out_dir: Union[str, Path],
        split: str = "test",
        directions: str = "both",
        severity: float = 0.7,
        seed: int = 0,
        modality: Optional[str] = None,
        conditions: Optional[List[str]] = None,
    ):
        super().__init__()

        self.data_dir = Path(data_dir)
        self.checkpoint = Path(checkpoint)
        self.out_dir = Path(out_dir)
        self.split = split
        self.directions = directions
        self.severity = severity
        self.seed = seed
        self.modality = modality
        self.conditions = None if conditions is None else list(conditions)

        self._defaults = DEFAULTS
        self._caller_dir = get_caller_dir()

    @property
    def report_json(self) -> Path:
        return self.out_dir / "report.json"

    @property
    def report_csv(self) -> Path:
        return self.out_dir / "report.csv"

    def _validate(self) -> None:
        self._check_required_files()
        self._validate_choices()

        if not 0.0 <= self.severity <= 1.0:
            raise ConfigurationError(f"severity is {self.severity} but must be in [0, 1]")
        if self.conditions is not None:
            if not self.conditions:
                raise ConfigurationError("conditions is empty")
            for name in self.conditions:
                WeatherCondition.parse(name)

    def _execute(self, log: RunLog) -> List[RetrievalReport]:
        state, meta = load_checkpoint(self.checkpoint)
        model = GeoFuseModel(ModelConfig.from_dict(meta["model"]))
        model.load_state_dict(state)
        modality = self.modality or meta.get("modality", "roadmap")

        dataset = load_dataset(self.data_dir, self.split)
        image_size = dataset_image_size(dataset)
        if image_size != model.config.image_size:
            raise DataError(
                f"Dataset images are {image_size} pixels but the checkpoint expects {model.config.image_size}"
            )
        conditions = None if self.conditions is None else [WeatherCondition.parse(c) for c in self.conditions]
        log.info(f"{len(dataset.classes)} classes, {dataset.count('drone')} queries, modality {modality}")

        reports = evaluate_conditions(
            model,
            dataset,
            directions=self.directions,
            conditions=conditions,
            severity=self.severity,
            seed=self.seed,
            modality=modality,
            log=log.info,
        )
        write_report_json(reports, self.report_json)
        write_report_csv(reports, self.report_csv)
        print(summary_table(reports))
        return reports

    def run(self) -> List[RetrievalReport]:
        self._resolve_all_path(self._caller_dir)

        self._validate()

        out_dir_handler(self.out_dir)
        self.echo(self.out_dir)

        args = self._get_command_args("evaluate")
        output = run_command(args, self._execute, echo=self._write_on_terminal)

        self._handle_command_output(
            output=output,
            output_identifier="Evaluation",
            output_path=str(self.report_json),
            log_dir=self.out_dir,
        )
        return output.value
