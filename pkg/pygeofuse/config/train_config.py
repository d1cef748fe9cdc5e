# pygeofuse/config/train_config.py

from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .base import BaseConfig
from ..bench import MODALITIES, load_dataset, read_image
from ..defaults import loader
from ..errors import ConfigurationError
from ..nn import GeoFuseModel, ModelConfig, save_checkpoint
from ..retrieval import evaluate_conditions, write_report_csv, write_report_json
from ..training import TrainResult, TrainSettings, train, write_loss_log
from ..utils import (
    get_caller_dir,
    out_dir_handler,
    run_command,
    RunLog,
)

DEFAULTS = loader.merged("training", "train")

# Model and objective changes behind each `ablate` preset
ABLATIONS: Dict[str, Dict[str, Any]] = {
    "none": {},
    "token-only": {"channel_fusion": False, "lam": 0.0},
    "token-channel": {"lam": 0.0},
    "no-cc": {"lam": 0.0},
    "no-it": {"use_image_text": False},
}

_MODEL_FIELDS = ("patch_size", "d_model", "depth", "heads", "d_ff", "channel_heads",
                 "gate_init", "post_norm", "channel_fusion")


def dataset_image_size(dataset) -> int:
    return read_image(dataset.paths("satellite", dataset.classes[0])[0]).shape[0]


class TrainingOptions:
    """Model and optimization settings shared by the train and ablation configs."""

    def model_config(self, num_classes: int, image_size: int, **changes) -> ModelConfig:
        values = {name: getattr(self, name) for name in _MODEL_FIELDS}
        values.update(changes)
        values.setdefault("seed", self.seed)
        return ModelConfig(num_classes=num_classes, image_size=image_size, **values)

    def train_settings(self, **changes) -> TrainSettings:
        settings = TrainSettings(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            milestones=None if self.milestones is None else tuple(self.milestones),
            factors=tuple(self.factors),
            lam=self.lam,
            tau=self.tau,
            static_anchors=self.static_anchors,
            use_image_text=self.use_image_text,
            normalize_cc=self.normalize_cc,
            modality=self.modality,
            severity=self.severity,
            augment=self.augment,
            prefetch=self.prefetch,
            seed=self.seed,
        )
        return replace(settings, **changes) if changes else settings

    def _validate_training(self) -> None:
        if self.d_model % self.heads:
            raise ConfigurationError(f"d_model {self.d_model} is not divisible by heads {self.heads}")
        if self.patch_size < 1:
            raise ConfigurationError(f"patch_size is {self.patch_size} but must be >= 1")
        if self.gate_init < 0:
            raise ConfigurationError(f"gate_init is {self.gate_init} but must be >= 0")
        if self.milestones is not None and len(self.milestones) > len(self.factors):
            raise ConfigurationError(
                f"{len(self.milestones)} milestones but only {len(self.factors)} factors"
            )
        if not 0.0 <= self.eval_severity <= 1.0:
            raise ConfigurationError(f"eval severity is {self.eval_severity} but must be in [0, 1]")
        # Range checks of the optimizer and objective settings
        self.train_settings().schedule()


class TrainConfig(TrainingOptions, BaseConfig):
    """
    Train a GeoFuse model on the train split of a synthetic dataset

    Parameters
    ----------
    `data_dir` : Union[str, Path]
        Dataset root written by `synth_gen`
        - If the path is relative, it is resolved relative to the directory
        of the calling script
        - If the path is absolute, it is used as-is

    `out_dir` : Union[str, Path]
        Directory receiving `model.npz`, `loss_log.csv`, `config.yaml` and, when the
        dataset has a test split, `final_eval.json` / `final_eval.csv`

    `ablate` : str, optional
        Ablation preset
        - "none": configuration as given (default)
        - "token-only": channel-level fusion off (its gate frozen at 0) and lam = 0
        - "token-channel": both fusion levels, lam = 0
        - "no-cc": lam = 0
        - "no-it": image-text terms off

    `modality` : str, optional
        Auxiliary view fused with the satellite image
        - "roadmap" (default)
        - "blank": all-white rasters, the satellite-only control
        - "pseudo": pseudo-depth derived from the satellite image

    `epochs`, `batch_size`, `lr`, `momentum`, `weight_decay`, `milestones`, `factors` : optional
        SGD schedule; defaults 30, 16, 0.05, 0.9, 5e-4, scaled milestones, [0.1, 0.1]

    `lam`, `tau` : float, optional
        Class contrastive weight and temperature
        - 0.1, 0.07 (default)

    `static_anchors` : bool, optional
        Build the anchor set once instead of at every epoch
        - True
        - False (default)

    `use_image_text`, `normalize_cc`, `augment`, `prefetch` : bool, optional
        - True (default)
        - False

    `severity` : float, optional
        Weather corruption severity of training drone views
        - 0.7 (default)

    `seed` : int, optional
        - 0 (default)

    Model settings `patch_size`, `d_model`, `depth`, `heads`, `d_ff`, `channel_heads`,
    `gate_init`, `post_norm`, `channel_fusion` and the evaluation settings
    `eval_directions`, `eval_severity`, `eval_seed`, `eval_after` are described in
    `pygeofuse/defaults/training.yaml` and `pygeofuse/defaults/train.yaml`.
    """

    DEFAULTS = DEFAULTS

    def __init__(
        self,
        data_dir: Union[str, Path],
        out_dir: Union[str, Path],
        ablate: str = "none",
        patch_size: int = 16,
        d_model: int = 64,
        depth: int = 2,
        heads: int = 4,
        d_ff: Optional[int] = None,
        channel_heads: Optional[int] = None,
        gate_init: float = 0.1,
        post_norm: bool = True,
        channel_fusion: bool = True,
        epochs: int = 30,
        batch_size: int = 16,
        lr: float = 0.05,
        momentum: float = 0.9,
        weight_decay: float = 5e-4,
        milestones: Optional[List[int]] = None,
        factors: List[float] = (0.1, 0.1),
        lam: float = 0.1,
        tau: float = 0.07,
        static_anchors: bool = False,
        use_image_text: bool = True,
        normalize_cc: bool = True,
        modality: str = "roadmap",
        severity: float = 0.7,
        augment: bool = True,
        prefetch: bool = True,
        seed: int = 0,
        eval_directions: str = "both",
        eval_severity: float = 0.7,
        eval_seed: int = 0,
        eval_after: bool = True,
    ):
        super().__init__()

        self.data_dir = Path(data_dir)
        self.out_dir = Path(out_dir)
        self.ablate = ablate
        self.patch_size = patch_size
        self.d_model = d_model
        self.depth = depth
        self.heads = heads
        self.d_ff = d_ff
        self.channel_heads = channel_heads
        self.gate_init = gate_init
        self.post_norm = post_norm
        self.channel_fusion = channel_fusion
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.milestones = None if milestones is None else list(milestones)
        self.factors = list(factors)
        self.lam = lam
        self.tau = tau
        self.static_anchors = static_anchors
        self.use_image_text = use_image_text
        self.normalize_cc = normalize_cc
        self.modality = modality
        self.severity = severity
        self.augment = augment
        self.prefetch = prefetch
        self.seed = seed
        self.eval_directions = eval_directions
        self.eval_severity = eval_severity
        self.eval_seed = eval_seed
        self.eval_after = eval_after

        self._defaults = DEFAULTS
        self._caller_dir = get_caller_dir()

    @property
    def checkpoint(self) -> Path:
        return self.out_dir / "model.npz"

    @property
    def loss_log(self) -> Path:
        return self.out_dir / "loss_log.csv"

    @property
    def final_eval_json(self) -> Path:
        return self.out_dir / "final_eval.json"

    @property
    def final_eval_csv(self) -> Path:
        return self.out_dir / "final_eval.csv"

    def _apply_ablation(self) -> None:
        for name, value in ABLATIONS[self.ablate].items():
            setattr(self, name, value)

    def _validate(self) -> None:
        self._check_required_files()
        self._validate_choices()
        self._validate_training()

        if self.modality not in MODALITIES:
            raise ConfigurationError(f"modality is {self.modality} but must be one of {MODALITIES}")

    def _execute(self, log: RunLog) -> TrainResult:
        dataset = load_dataset(self.data_dir, "train")
        image_size = dataset_image_size(dataset)
        model = GeoFuseModel(self.model_config(len(dataset.classes), image_size))
        log.info(
            f"{len(dataset.classes)} classes, {dataset.count('drone')} drone views, "
            f"{len(model.trainable_parameters())} trainable tensors"
        )

        result = train(dataset, model, self.train_settings(), log=log.info)
        if result.itc_undefined_steps:
            log.info(f"image-text contrastive term undefined in {result.itc_undefined_steps} steps")

        save_checkpoint(model, self.checkpoint, {
            "classes": list(dataset.classes),
            "modality": self.modality,
            "ablate": self.ablate,
        })
        write_loss_log(result.loss_log, self.loss_log)

        if self.eval_after and (self.data_dir / "test").is_dir():
            test = load_dataset(self.data_dir, "test")
            reports = evaluate_conditions(
                model,
                test,
                directions=self.eval_directions,
                severity=self.eval_severity,
                seed=self.eval_seed,
                modality=self.modality,
                log=log.info,
            )
            write_report_json(reports, self.final_eval_json)
            write_report_csv(reports, self.final_eval_csv)
        return result

    def run(self) -> TrainResult:
        self._resolve_all_path(self._caller_dir)

        self._validate()
        self._apply_ablation()

        out_dir_handler(self.out_dir)
        self.echo(self.out_dir)

        args = self._get_command_args("train")
        output = run_command(args, self._execute, echo=self._write_on_terminal)

        self._handle_command_output(
            output=output,
            output_identifier="Training",
            output_path=str(self.checkpoint),
            log_dir=self.out_dir,
        )
        return output.value
