# pygeofuse/training/trainer.py

"""
Training loop.

Each epoch optionally refreshes the class anchors, then walks a seeded
permutation of the drone images in batches: every drone view gets a random
weather condition, every satellite-auxiliary pair a synchronized flip and
rotation. The optimizer is classical-momentum SGD with milestone decay.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..bench.augment import random_shift_crop, synchronized_augment
from ..bench.dataset import DatasetIndex, read_image
from ..bench.scenes import MODALITIES, auxiliary_raster
from ..bench.weather import WeatherCondition, apply_weather
from ..errors import ConfigurationError, NumericalError
from ..nn.encoder import WeatherCaption
from ..nn.losses import DEFAULT_LAMBDA, DEFAULT_TAU, AnchorSet, AnchorSample, build_anchor_set
from ..nn.model import GeoFuseModel
from ..nn.objective import Batch, ObjectiveSettings, batch_losses
from ..nn.tensor import backward
from ..utils import derive_rng, derive_seed
from .optimizer import DEFAULT_FACTORS, SGD, MultiStepSchedule, scaled_milestones
from .prefetch import prefetch

LOSS_LOG_COLUMNS = ["epoch", "step", "L_IT", "L_CE", "L_CC", "L_total", "lr"]


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    milestones: Optional[Tuple[int, ...]] = None
    factors: Tuple[float, ...] = DEFAULT_FACTORS
    lam: float = DEFAULT_LAMBDA
    tau: float = DEFAULT_TAU
    static_anchors: bool = False
    use_image_text: bool = True
    normalize_cc: bool = True
    modality: str = "roadmap"
    severity: float = 0.7
    augment: bool = True
    prefetch: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs is {self.epochs} but must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size is {self.batch_size} but must be >= 1")
        if self.modality not in MODALITIES:
            raise ConfigurationError(f"Unknown modality {self.modality}; expected one of {MODALITIES}")
        if not 0.0 <= self.severity <= 1.0:
            raise ConfigurationError(f"severity is {self.severity} but must be in [0, 1]")
        if self.lam < 0:
            raise ConfigurationError(f"lambda is {self.lam} but must be >= 0")
        if not self.tau > 0:
            raise ConfigurationError(f"tau is {self.tau} but must be > 0")

    def schedule(self) -> MultiStepSchedule:
        milestones = self.milestones if self.milestones is not None else scaled_milestones(self.epochs)
        return MultiStepSchedule(self.lr, milestones, self.factors[:len(milestones)])

    @property
    def objective(self) -> ObjectiveSettings:
        return ObjectiveSettings(self.lam, self.tau, self.use_image_text, self.normalize_cc)


@dataclass
class ClassViews:
    """Decoded satellite and auxiliary rasters of one class."""

    class_id: str
    satellites: List[np.ndarray]
    auxiliaries: List[np.ndarray]


def load_class_views(dataset: DatasetIndex, modality: str = "roadmap") -> List[ClassViews]:
    views = []
    for class_id in dataset.classes:
        satellites = [read_image(p) for p in dataset.paths("satellite", class_id)]
        roadmaps = [read_image(p) for p in dataset.paths("roadmap", class_id)]
        auxiliaries = [
            auxiliary_raster(modality, satellite, roadmaps[k % len(roadmaps)])
            for k, satellite in enumerate(satellites)
        ]
        views.append(ClassViews(class_id, satellites, auxiliaries))
    return views


def refresh_anchors(
    model: GeoFuseModel,
    dataset: Union[DatasetIndex, Sequence[ClassViews]],
    modality: str = "roadmap",
) -> AnchorSet:
    """Rebuild the anchor set from the current parameters, without recording gradients."""
    views = load_class_views(dataset, modality) if isinstance(dataset, DatasetIndex) else dataset
    samples: List[AnchorSample] = [(v.class_id, v.satellites, v.auxiliaries) for v in views]
    return build_anchor_set(samples, model)


@dataclass
class TrainResult:
    model: GeoFuseModel
    loss_log: pd.DataFrame
    anchors: AnchorSet
    itc_undefined_steps: int = 0

    def epoch_means(self) -> pd.DataFrame:
        return self.loss_log.groupby("epoch", sort=True)[["L_IT", "L_CE", "L_CC", "L_total"]].mean()


@dataclass
class _Sources:
    drones: List[Tuple[str, Path]]
    views: Dict[str, ClassViews] = field(default_factory=dict)
    label_ids: Dict[str, int] = field(default_factory=dict)


def _batches(
    sources: _Sources,
    settings: TrainSettings,
    epoch: int,
    templates: int,
    images: Dict[Path, np.ndarray],
) -> Iterator[Batch]:
    """Seeded batch sequence of one epoch; depends only on (seed, epoch)."""
    conditions = list(WeatherCondition)
    rng = derive_rng(settings.seed, epoch)
    order = rng.permutation(len(sources.drones))
    for step, start in enumerate(range(0, len(order), settings.batch_size)):
        members = [sources.drones[i] for i in order[start:start + settings.batch_size]]
        batch = Batch(labels=[], label_ids=np.zeros(len(members), dtype=np.int64), drones=[], satellites=[], auxiliaries=[])
        for slot, (class_id, path) in enumerate(members):
            item_seed = derive_seed(settings.seed, epoch, step, slot)
            condition = conditions[int(rng.integers(len(conditions)))]
            drone = apply_weather(images[path], condition, settings.severity, item_seed)
            view = sources.views[class_id]
            k = int(rng.integers(len(view.satellites)))
            satellite, auxiliary = view.satellites[k], view.auxiliaries[k]
            if settings.augment:
                drone = random_shift_crop(drone, item_seed)
                satellite, auxiliary = synchronized_augment(satellite, auxiliary, item_seed)
            batch.labels.append(class_id)
            batch.label_ids[slot] = sources.label_ids[class_id]
            batch.drones.append(drone)
            batch.satellites.append(satellite)
            batch.auxiliaries.append(auxiliary)
            batch.captions.append(WeatherCaption(condition, int(rng.integers(templates))))
            batch.item_ids.append(f"{class_id}/{path.name}")
        yield batch


def _check_finite(values: Dict[str, float], batch: Batch, epoch: int, step: int) -> None:
    if all(np.isfinite(v) for v in values.values()):
        return
    components = ", ".join(f"{k}={v!r}" for k, v in values.items())
    raise NumericalError(
        f"Non-finite loss at epoch {epoch} step {step}: {components}; batch items {batch.item_ids}"
    )


def train(
    dataset: DatasetIndex,
    model: GeoFuseModel,
    settings: TrainSettings,
    log: Optional[Callable[[str], None]] = None,
) -> TrainResult:
    """
    Train `model` in place on the drone views of `dataset`.

    Anchor classes and classifier labels follow `dataset.classes`; the model
    must have one output per class.
    """
    if model.config.num_classes != len(dataset.classes):
        raise ConfigurationError(
            f"model has {model.config.num_classes} classes but the dataset has {len(dataset.classes)}"
        )
    log = log or (lambda message: None)
    schedule = settings.schedule()
    views = load_class_views(dataset, settings.modality)
    sources = _Sources(
        drones=list(dataset.items("drone")),
        views={v.class_id: v for v in views},
        label_ids={c: i for i, c in enumerate(dataset.classes)},
    )
    images = {path: read_image(path) for _, path in sources.drones}
    params = model.trainable_parameters()
    optimizer = SGD(params, settings.momentum, settings.weight_decay)

    anchors = refresh_anchors(model, views)
    rows, undefined = [], 0
    for epoch in range(settings.epochs):
        if epoch > 0 and not settings.static_anchors:
            anchors = refresh_anchors(model, views)
        lr = schedule.lr_at(epoch)
        batches = _batches(sources, settings, epoch, model.config.caption_templates, images)
        for step, batch in enumerate(prefetch(batches, capacity=2, enabled=settings.prefetch)):
            model.zero_grad()
            terms = batch_losses(model, batch, anchors, settings.objective)
            values = terms.values()
            _check_finite(values, batch, epoch, step)
            undefined += 0 if terms.itc_defined or not settings.use_image_text else 1
            optimizer.step(backward(terms.total, params), lr)
            rows.append({"epoch": epoch, "step": step, **values, "lr": lr})
        epoch_rows = [r for r in rows if r["epoch"] == epoch]
        mean_total = sum(r["L_total"] for r in epoch_rows) / len(epoch_rows)
        log(f"epoch {epoch:>3}  lr={lr:.5f}  L_total={mean_total:.6f}")

    model.zero_grad()
    return TrainResult(model, pd.DataFrame(rows, columns=LOSS_LOG_COLUMNS), anchors, undefined)


def write_loss_log(loss_log: pd.DataFrame, filepath: Union[str, Path]) -> Path:
    filepath = Path(filepath)
    loss_log.to_csv(filepath, index=False, lineterminator="\n", float_format="%.17g")
    return filepath


def read_loss_log(filepath: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(filepath)
