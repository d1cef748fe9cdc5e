# pygeofuse/nn/losses.py

"""
Training objectives.

- class-level contrastive loss of drone features against per-class
  satellite and fused anchors
- instance cross-entropy through one classifier shared by all views
- drone-caption contrastive and matching terms
- the weighted total
"""

import warnings
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigurationError, DataError, DimensionError, GeoFuseWarning
from .layers import Linear, Module
from .tensor import (
    Tensor,
    as_tensor,
    clamp_min,
    concat,
    exp,
    gelu,
    index,
    l2_normalize,
    log,
    log_softmax_last_axis,
    matmul,
    no_grad,
    reshape,
    sigmoid,
    tensor_mean,
    tensor_sum,
)

CLAMP_MIN = 1e-8
DEFAULT_TAU = 0.07
DEFAULT_LAMBDA = 0.10


def _as_rows(x: Tensor) -> Tuple[Tensor, bool]:
    if x.ndim == 1:
        return reshape(x, (1, x.shape[0])), True
    return x, False


class ClassifierHead(Module):
    """
    Bottleneck D->D followed by a D->C classifier, shared by the drone,
    satellite and fused views. The bottleneck output is the retrieval and
    anchor feature.
    """

    def __init__(self, d_model: int, num_classes: int, rng: np.random.Generator):
        if num_classes < 1:
            raise ConfigurationError(f"num_classes is {num_classes} but must be >= 1")
        self.bottleneck = Linear(d_model, d_model, rng)
        self.classifier = Linear(d_model, num_classes, rng)
        self._num_classes = num_classes

    @property
    def num_classes(self) -> int:
        return self._num_classes

    def features(self, x: Tensor) -> Tensor:
        rows, flat = _as_rows(x)
        out = self.bottleneck(rows)
        return out[0] if flat else out

    def embed(self, x: Tensor) -> Tensor:
        return l2_normalize(self.features(x))

    def logits(self, x: Tensor) -> Tensor:
        rows, _ = _as_rows(x)
        return self.classifier(self.bottleneck(rows))


class ItmHead(Module):
    """Matched / mismatched classifier over concatenated (drone, caption) pairs."""

    def __init__(self, d_model: int, rng: np.random.Generator):
        self.fc_in = Linear(2 * d_model, d_model, rng)
        self.fc_out = Linear(d_model, 1, rng)

    def __call__(self, pairs: Tensor) -> Tensor:
        return sigmoid(self.fc_out(gelu(self.fc_in(pairs))))


@dataclass
class AnchorSet:
    """Per-class satellite and fused reference features, unit norm, one row per class."""

    classes: List[str]
    sat_anchor: np.ndarray
    fused_anchor: np.ndarray

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise DataError("anchor class labels are not unique")
        count = len(self.classes)
        if self.sat_anchor.shape[0] != count or self.fused_anchor.shape[0] != count:
            raise DimensionError(
                f"{count} classes but anchors of shape {self.sat_anchor.shape} and {self.fused_anchor.shape}"
            )

    def __len__(self) -> int:
        return len(self.classes)

    def copy(self) -> "AnchorSet":
        return AnchorSet(list(self.classes), self.sat_anchor.copy(), self.fused_anchor.copy())


class SimilarityMatrices(NamedTuple):
    s_sat: Tensor
    s_fused: Tensor
    tau: float


class PositiveMask(NamedTuple):
    matrix: np.ndarray
    labels: Tuple[str, ...]


class ContrastiveTerms(NamedTuple):
    sat: Tensor
    fused: Tensor
    total: Tensor


class ImageTextTerms(NamedTuple):
    itc: Tensor
    itm: Tensor
    total: Tensor
    itc_defined: bool


AnchorSample = Tuple[str, Sequence[np.ndarray], Sequence[np.ndarray]]


def build_anchor_set(samples: Iterable[AnchorSample], model) -> AnchorSet:
    """
    Precompute the per-class anchors.

    Parameters
    ----------
    `samples` : iterable of (label, satellite images, auxiliary images)
        One entry per class, in anchor order.
    `model` : object
        Provides `encode(image) -> (tokens, pooled)`, `fuse(sat_tokens,
        aux_tokens) -> pooled` and `head` (a ClassifierHead).

    Classes with several images use the mean of their bottleneck features
    before normalization.
    """
    classes, sat_rows, fused_rows = [], [], []
    with no_grad():
        for label, satellites, auxiliaries in samples:
            if len(satellites) == 0:
                raise ConfigurationError(f"class {label} has no satellite image")
            if len(auxiliaries) == 0:
                raise ConfigurationError(f"class {label} has no roadmap image")
            sat_feats, fused_feats = [], []
            for k, satellite in enumerate(satellites):
                sat_tokens, sat_pooled = model.encode(satellite)
                aux_tokens, _ = model.encode(auxiliaries[k % len(auxiliaries)])
                sat_feats.append(model.head.features(sat_pooled).data)
                fused_feats.append(model.head.features(model.fuse(sat_tokens, aux_tokens)).data)
            classes.append(label)
            sat_rows.append(l2_normalize(Tensor(np.mean(sat_feats, axis=0))).data)
            fused_rows.append(l2_normalize(Tensor(np.mean(fused_feats, axis=0))).data)
    return AnchorSet(classes, np.stack(sat_rows), np.stack(fused_rows))


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ConfigurationError(f"tau is {tau} but must be > 0")


def similarity_matrices(drone_feats: Tensor, sat_anchor: Tensor, fused_anchor: Tensor, tau: float) -> SimilarityMatrices:
    """S[i, c] = <f_d^i, anchor_c> / tau for both anchor modalities."""
    _check_tau(tau)
    drone_feats = as_tensor(drone_feats)
    scale = 1.0 / tau
    return SimilarityMatrices(
        s_sat=matmul(drone_feats, as_tensor(sat_anchor).T) * scale,
        s_fused=matmul(drone_feats, as_tensor(fused_anchor).T) * scale,
        tau=tau,
    )


def similarity_to_anchors(drone_feats: Tensor, anchors: AnchorSet, tau: float = DEFAULT_TAU) -> SimilarityMatrices:
    return similarity_matrices(drone_feats, Tensor(anchors.sat_anchor), Tensor(anchors.fused_anchor), tau)


def positive_mask(batch_labels: Sequence[str], anchor_labels: Sequence[str]) -> PositiveMask:
    """M[i, c] = 1 iff batch label i equals anchor label c."""
    column = {label: c for c, label in enumerate(anchor_labels)}
    matrix = np.zeros((len(batch_labels), len(anchor_labels)))
    for i, label in enumerate(batch_labels):
        if label not in column:
            raise DataError(f"batch label {label!r} is not an anchor class")
        matrix[i, column[label]] = 1.0
    return PositiveMask(matrix, tuple(batch_labels))


def _masked_contrastive(similarity: Tensor, mask: np.ndarray) -> Tensor:
    weights = exp(similarity)
    positive = tensor_sum(weights * Tensor(mask), axis=1)
    total = tensor_sum(weights, axis=1)
    ratio = log(clamp_min(positive, CLAMP_MIN)) - log(clamp_min(total, CLAMP_MIN))
    return -tensor_mean(ratio)


def class_contrastive_loss(sims: SimilarityMatrices, mask: PositiveMask) -> ContrastiveTerms:
    """
    InfoNCE against class anchors; numerator and denominator are clamped
    to at least 1e-8 before the log.

    Returns (L_sat, L_fused, L_sat + L_fused).
    """
    if sims.s_sat.shape != mask.matrix.shape or sims.s_fused.shape != mask.matrix.shape:
        raise DimensionError(
            f"similarities {sims.s_sat.shape}/{sims.s_fused.shape} do not match mask {mask.matrix.shape}"
        )
    sat = _masked_contrastive(sims.s_sat, mask.matrix)
    fused = _masked_contrastive(sims.s_fused, mask.matrix)
    return ContrastiveTerms(sat, fused, sat + fused)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    labels = np.asarray(labels, dtype=np.int64)
    classes = logits.shape[1]
    bad = labels[(labels < 0) | (labels >= classes)]
    if bad.size:
        raise DataError(f"label {int(bad[0])} is outside [0, {classes})")
    picked = index(log_softmax_last_axis(logits), (np.arange(labels.size), labels))
    return -tensor_mean(picked)


def instance_ce_loss(
    drone_feat: Tensor,
    sat_feat: Tensor,
    fused_feat: Tensor,
    labels: np.ndarray,
    head: ClassifierHead,
) -> Tensor:
    """Sum of the drone, satellite and fused cross-entropies through one shared head."""
    return (
        cross_entropy(head.logits(drone_feat), labels)
        + cross_entropy(head.logits(sat_feat), labels)
        + cross_entropy(head.logits(fused_feat), labels)
    )


def _info_nce_diagonal(logits: Tensor) -> Tensor:
    count = logits.shape[0]
    diagonal = (np.arange(count), np.arange(count))
    return -tensor_mean(index(log_softmax_last_axis(logits), diagonal))


def _binary_cross_entropy(prob: Tensor, target: np.ndarray) -> Tensor:
    target = Tensor(target.reshape(prob.shape))
    positive = target * log(clamp_min(prob, 1e-12))
    negative = (1.0 - target) * log(clamp_min(1.0 - prob, 1e-12))
    return -tensor_mean(positive + negative)


def hardest_negatives(drone_feats: np.ndarray, text_feats: np.ndarray, match_labels: Optional[Sequence] = None) -> List[Tuple[int, int]]:
    """(i, j) pairs: for drone i, the most similar caption j describing a different condition."""
    count = drone_feats.shape[0]
    labels = list(range(count)) if match_labels is None else list(match_labels)
    similarity = drone_feats @ text_feats.T
    pairs = []
    for i in range(count):
        candidates = [j for j in range(count) if labels[j] != labels[i]]
        if candidates:
            pairs.append((i, max(candidates, key=lambda j: (similarity[i, j], -j))))
    return pairs


def image_text_losses(
    drone_feats: Tensor,
    text_feats: Tensor,
    match_labels: Optional[Sequence],
    itm_head: Optional[ItmHead],
    tau: float = DEFAULT_TAU,
) -> ImageTextTerms:
    """
    Drone-caption alignment terms.

    L_ITC is the symmetric in-batch InfoNCE between drone and caption
    features. L_ITM is the binary cross-entropy of `itm_head` on every
    matched pair and on one hardest in-batch negative per pair. With B < 2
    L_ITC is reported as 0 and `itc_defined` is False.
    """
    _check_tau(tau)
    if drone_feats.shape != text_feats.shape:
        raise DimensionError(f"drone features {drone_feats.shape} and caption features {text_feats.shape} differ")
    count = drone_feats.shape[0]

    if count < 2:
        warnings.warn("image-text contrastive term needs a batch of at least 2; using 0", GeoFuseWarning)
        itc, itc_defined = Tensor(0.0), False
    else:
        logits = matmul(drone_feats, text_feats.T) * (1.0 / tau)
        itc = 0.5 * (_info_nce_diagonal(logits) + _info_nce_diagonal(logits.T))
        itc_defined = True

    if itm_head is None:
        itm = Tensor(0.0)
    else:
        negatives = hardest_negatives(drone_feats.data, text_feats.data, match_labels)
        drone_rows = np.concatenate([np.arange(count), [i for i, _ in negatives]]).astype(np.int64)
        text_rows = np.concatenate([np.arange(count), [j for _, j in negatives]]).astype(np.int64)
        pairs = concat([index(drone_feats, drone_rows), index(text_feats, text_rows)], axis=1)
        targets = np.concatenate([np.ones(count), np.zeros(len(negatives))])
        itm = _binary_cross_entropy(itm_head(pairs), targets)

    return ImageTextTerms(itc, itm, itc + itm, itc_defined)


def total_loss(
    l_it: Union[Tensor, float],
    l_ce: Union[Tensor, float],
    l_cc: Union[Tensor, float],
    lam: float = DEFAULT_LAMBDA,
) -> Tensor:
    """L_total = L_IT + L_CE + lambda * L_CC."""
    if lam < 0:
        raise ConfigurationError(f"lambda is {lam} but must be >= 0")
    return as_tensor(l_it) + as_tensor(l_ce) + as_tensor(l_cc) * lam
