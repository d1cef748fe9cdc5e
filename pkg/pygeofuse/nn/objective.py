# pygeofuse/nn/objective.py

from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence

import numpy as np

from .losses import (
    DEFAULT_LAMBDA,
    DEFAULT_TAU,
    AnchorSet,
    class_contrastive_loss,
    image_text_losses,
    instance_ce_loss,
    positive_mask,
    similarity_to_anchors,
    total_loss,
)
from .encoder import WeatherCaption
from .tensor import Tensor, stack


@dataclass(frozen=True)
class ObjectiveSettings:
    lam: float = DEFAULT_LAMBDA
    tau: float = DEFAULT_TAU
    use_image_text: bool = True
    normalize_cc: bool = True


@dataclass
class Batch:
    """One training batch: a drone view per item plus its class's satellite and auxiliary rasters."""

    labels: List[str]
    label_ids: np.ndarray
    drones: Sequence[np.ndarray]
    satellites: Sequence[np.ndarray]
    auxiliaries: Sequence[np.ndarray]
    captions: List[WeatherCaption] = field(default_factory=list)
    item_ids: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)


class LossTerms(NamedTuple):
    l_it: Tensor
    l_ce: Tensor
    l_cc: Tensor
    total: Tensor
    itc_defined: bool

    def values(self) -> dict:
        return {
            "L_IT": self.l_it.item(),
            "L_CE": self.l_ce.item(),
            "L_CC": self.l_cc.item(),
            "L_total": self.total.item(),
        }


def batch_losses(model, batch: Batch, anchors: AnchorSet, settings: ObjectiveSettings) -> LossTerms:
    """
    L_total = L_IT + L_CE + lambda * L_CC for one batch.

    `model` provides `encode`, `fuse`, `head`, `caption_features` and `itm`
    (see GeoFuseModel). Anchors enter as constants.
    """
    drone = stack([model.encode(image)[1] for image in batch.drones])
    sat_pooled, fused_pooled = [], []
    for satellite, auxiliary in zip(batch.satellites, batch.auxiliaries):
        sat_tokens, pooled = model.encode(satellite)
        aux_tokens, _ = model.encode(auxiliary)
        sat_pooled.append(pooled)
        fused_pooled.append(model.fuse(sat_tokens, aux_tokens))
    sat, fused = stack(sat_pooled), stack(fused_pooled)

    l_ce = instance_ce_loss(drone, sat, fused, batch.label_ids, model.head)

    drone_embedding = model.head.embed(drone)
    cc_features = drone_embedding if settings.normalize_cc else model.head.features(drone)
    sims = similarity_to_anchors(cc_features, anchors, settings.tau)
    l_cc = class_contrastive_loss(sims, positive_mask(batch.labels, anchors.classes)).total

    if settings.use_image_text and batch.captions:
        terms = image_text_losses(
            drone_embedding,
            model.caption_features(batch.captions),
            [caption.condition for caption in batch.captions],
            model.itm,
            settings.tau,
        )
        l_it, itc_defined = terms.total, terms.itc_defined
    else:
        l_it, itc_defined = Tensor(0.0), False

    return LossTerms(l_it, l_ce, l_cc, total_loss(l_it, l_ce, l_cc, settings.lam), itc_defined)
