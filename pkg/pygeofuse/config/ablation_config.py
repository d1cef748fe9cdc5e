# pygeofuse/config/ablation_config.py

import warnings
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd

from .base import BaseConfig
from .train_config import ABLATIONS, TrainingOptions, dataset_image_size
from ..bench import load_dataset
from ..defaults import loader
from ..errors import ConfigurationError, GeoFuseWarning
from ..nn import GeoFuseModel
from ..retrieval import evaluate_conditions
from ..training import train
from ..utils import (
    get_caller_dir,
    out_dir_handler,
    run_command,
    RunLog,
)

# `seed` is replaced by the list of seeds
DEFAULTS = {
    name: info for name, info in loader.merged("training", "ablation").items() if name != "seed"
}

# Fusion configuration -> ablate preset
CONFIG_PRESETS = {
    "token_only": "token-only",
    "token_channel": "token-channel",
    "full": "none",
}

RUN_COLUMNS = ["config", "seed", "direction", "r1", "ap"]
SUMMARY_COLUMNS = ["config", "direction", "seeds", "r1_mean", "r1_std", "ap_mean", "ap_std"]

_MODEL_CHANGES = ("channel_fusion",)


class AblationConfig(TrainingOptions, BaseConfig):
    """
    Train and evaluate fusion configurations over several seeds

    Parameters
    ----------
    `data_dir` : Union[str, Path]
        Dataset root written by `synth_gen`; needs train and test splits

    `out_dir` : Union[str, Path]
        Directory receiving `ablation_runs.csv` (one row per run and direction)
        and `ablation.csv` (mean and standard deviation over seeds)

    `configs` : List[str], optional
        - "token_only": token-level fusion only, lam = 0
        - "token_channel": token- and channel-level fusion, lam = 0
        - "full": both fusion levels and the class contrastive loss
        - all three (default)

    `seeds` : List[int], optional
        - [0, 1, 2] (default)

    `blank_control` : bool, optional
        Add the full configuration with blank auxiliary rasters
        - True
        - False (default)

    `lambdas`, `taus` : List[float], optional
        Extra full-configuration runs over a grid of the class contrastive
        weight or the temperature
        - None (default)

    The model, schedule and evaluation settings are those of `TrainConfig`.
    """

    DEFAULTS = DEFAULTS

    def __init__(
        self,
        data_dir: Union[str, Path],
        out_dir: Union[str, Path],
        configs: List[str] = ("token_only", "token_channel", "full"),
        seeds: List[int] = (0, 1, 2),
        blank_control: bool = False,
        lambdas: Optional[List[float]] = None,
        taus: Optional[List[float]] = None,
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
        eval_directions: str = "both",
        eval_severity: float = 0.7,
        eval_seed: int = 0,
    ):
        super().__init__()

        self.data_dir = Path(data_dir)
        self.out_dir = Path(out_dir)
        self.configs = list(configs)
        self.seeds = list(seeds)
        self.blank_control = blank_control
        self.lambdas = None if lambdas is None else list(lambdas)
        self.taus = None if taus is None else list(taus)
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
        self.eval_directions = eval_directions
        self.eval_severity = eval_severity
        self.eval_seed = eval_seed

        self._defaults = DEFAULTS
        self._caller_dir = get_caller_dir()

    @property
    def seed(self) -> int:
        return self.seeds[0]

    @property
    def runs_table(self) -> Path:
        return self.out_dir / "ablation_runs.csv"

    @property
    def summary_table(self) -> Path:
        return self.out_dir / "ablation.csv"

    def variants(self) -> List[Tuple[str, Dict[str, Any]]]:
        """(name, setting changes) of every configuration to run, in order."""
        out = [(name, dict(ABLATIONS[CONFIG_PRESETS[name]])) for name in self.configs]
        if self.blank_control:
            out.append(("blank", {"modality": "blank"}))
        for lam in self.lambdas or []:
            out.append((f"full_lam={lam:g}", {"lam": lam}))
        for tau in self.taus or []:
            out.append((f"full_tau={tau:g}", {"tau": tau}))
        return out

    def _validate(self) -> None:
        self._check_required_files()
        self._validate_choices()

        if not self.configs:
            raise ConfigurationError("configs is empty")
        if not self.seeds:
            raise ConfigurationError("seeds is empty")
        self._validate_training()
        if any(seed < 0 for seed in self.seeds):
            raise ConfigurationError(f"seeds {self.seeds} must be non-negative")
        for lam in self.lambdas or []:
            if lam < 0:
                raise ConfigurationError(f"lambda grid value {lam} must be >= 0")
        for tau in self.taus or []:
            if not tau > 0:
                raise ConfigurationError(f"tau grid value {tau} must be > 0")

    def _check_ordering(self, summary: pd.DataFrame, log: RunLog) -> None:
        """Log, per direction, whether full >= token_only and where token_channel falls."""
        means = summary.set_index(["config", "direction"])["r1_mean"]
        for direction in summary["direction"].drop_duplicates():
            if ("full", direction) not in means or ("token_only", direction) not in means:
                continue
            full, token_only = means[("full", direction)], means[("token_only", direction)]
            if full >= token_only:
                log.info(f"{direction}: full R@1 {full:.4f} >= token_only R@1 {token_only:.4f}")
            else:
                warnings.warn(
                    f"{direction}: full R@1 {full:.4f} is below token_only R@1 {token_only:.4f}",
                    GeoFuseWarning,
                )
            if ("token_channel", direction) in means:
                middle = means[("token_channel", direction)]
                between = min(full, token_only) <= middle <= max(full, token_only)
                log.info(
                    f"{direction}: token_channel R@1 {middle:.4f} "
                    f"{'lies' if between else 'does not lie'} between the other two"
                )

    def _execute(self, log: RunLog) -> pd.DataFrame:
        train_set = load_dataset(self.data_dir, "train")
        test_set = load_dataset(self.data_dir, "test")
        image_size = dataset_image_size(train_set)

        records = []
        for name, changes in self.variants():
            model_changes = {k: v for k, v in changes.items() if k in _MODEL_CHANGES}
            setting_changes = {k: v for k, v in changes.items() if k not in _MODEL_CHANGES}
            for seed in self.seeds:
                settings = self.train_settings(seed=seed, **setting_changes)
                model = GeoFuseModel(self.model_config(len(train_set.classes), image_size, seed=seed, **model_changes))
                train(train_set, model, settings)
                reports = evaluate_conditions(
                    model,
                    test_set,
                    directions=self.eval_directions,
                    severity=self.eval_severity,
                    seed=self.eval_seed,
                    modality=settings.modality,
                )
                for report in reports:
                    mean = report.mean
                    records.append({"config": name, "seed": seed, "direction": report.direction,
                                    "r1": mean.r1, "ap": mean.ap})
                    log.info(f"{name:<16} seed {seed}  {report.direction:<17} R@1={mean.r1:.4f} AP={mean.ap:.4f}")

        runs = pd.DataFrame(records, columns=RUN_COLUMNS)
        runs.to_csv(self.runs_table, index=False, lineterminator="\n", float_format="%.17g")

        summary = (
            runs.groupby(["config", "direction"], sort=False)
            .agg(seeds=("seed", "count"), r1_mean=("r1", "mean"), r1_std=("r1", "std"),
                 ap_mean=("ap", "mean"), ap_std=("ap", "std"))
            .reset_index()[SUMMARY_COLUMNS]
        )
        summary.to_csv(self.summary_table, index=False, lineterminator="\n", float_format="%.17g")
        print(summary.to_string(index=False))

        self._check_ordering(summary, log)
        return summary

    def run(self) -> pd.DataFrame:
        self._resolve_all_path(self._caller_dir)

        self._validate()

        out_dir_handler(self.out_dir)
        self.echo(self.out_dir)

        args = self._get_command_args("ablation")
        output = run_command(args, self._execute, echo=self._write_on_terminal)

        self._handle_command_output(
            output=output,
            output_identifier="Ablation",
            output_path=str(self.summary_table),
            log_dir=self.out_dir,
        )
        return output.value
