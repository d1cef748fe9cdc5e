# pygeofuse/retrieval/metrics.py

"""
Gallery ranking, Recall@K and Average Precision.

Relevance is given as a boolean (queries, gallery) matrix in gallery order.
"""

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError, DimensionError, GeoFuseWarning
from ..nn.tensor import Tensor

Features = Union[np.ndarray, Tensor, Sequence]
RECALL_KS = (1, 5, 10)


def _as_matrix(features: Features) -> np.ndarray:
    if isinstance(features, Tensor):
        return features.data
    if isinstance(features, (list, tuple)):
        rows = [f.data if isinstance(f, Tensor) else np.asarray(f, dtype=np.float64) for f in features]
        return np.stack(rows) if rows else np.zeros((0, 0))
    return np.asarray(features, dtype=np.float64)


def distance_matrix(queries: Features, gallery: Features) -> np.ndarray:
    """Squared Euclidean distances, shape (Q, G)."""
    q, g = _as_matrix(queries), _as_matrix(gallery)
    if q.ndim == 1:
        q = q[None, :]
    if g.shape[0] == 0:
        raise ContractError("Cannot rank against an empty gallery")
    if q.shape[1] != g.shape[1]:
        raise DimensionError(f"query width {q.shape[1]} differs from gallery width {g.shape[1]}")
    diff = q[:, None, :] - g[None, :, :]
    return (diff * diff).sum(axis=-1)


def rank_gallery(query: Features, gallery: Features) -> np.ndarray:
    """Gallery indices by ascending Euclidean distance; equal distances keep gallery order."""
    return np.argsort(distance_matrix(query, gallery)[0], kind="stable")


def rank_all(queries: Features, gallery: Features) -> np.ndarray:
    return np.argsort(distance_matrix(queries, gallery), axis=1, kind="stable")


def _clamp_k(k: int, gallery_size: int) -> int:
    if k < 1:
        raise ContractError(f"k is {k} but must be >= 1")
    if k > gallery_size:
        warnings.warn(f"k={k} exceeds the gallery size {gallery_size}; using k={gallery_size}", GeoFuseWarning)
        return gallery_size
    return k


def recall_at_k(rankings: np.ndarray, relevance: np.ndarray, k: int) -> float:
    """
    Fraction of queries with at least one relevant item in the top `k`.

    Queries without any relevant item are left out.
    """
    rankings, relevance = np.atleast_2d(rankings), np.atleast_2d(relevance).astype(bool)
    k = _clamp_k(k, rankings.shape[1])
    hits, counted = 0, 0
    for ranking, relevant in zip(rankings, relevance):
        if not relevant.any():
            continue
        counted += 1
        if relevant[ranking[:k]].any():
            hits += 1
    return hits / counted if counted else 0.0


def average_precision(ranking: np.ndarray, relevance: np.ndarray) -> Optional[float]:
    """
    Mean of precision@rank over the ranks of the relevant items.

    Returns None when nothing is relevant.
    """
    hits_in_order = np.asarray(relevance, dtype=bool)[np.asarray(ranking)]
    total = int(hits_in_order.sum())
    if total == 0:
        return None
    found, precision_sum = 0, 0.0
    for rank, hit in enumerate(hits_in_order, start=1):
        if hit:
            found += 1
            precision_sum += found / rank
    return precision_sum / total


def mean_average_precision(rankings: np.ndarray, relevance: np.ndarray) -> Tuple[float, int]:
    """(mean AP over queries with relevant items, number of queries skipped)."""
    values, skipped = [], 0
    for ranking, relevant in zip(np.atleast_2d(rankings), np.atleast_2d(relevance)):
        ap = average_precision(ranking, relevant)
        if ap is None:
            skipped += 1
        else:
            values.append(ap)
    if skipped:
        warnings.warn(f"{skipped} queries have no relevant gallery item and are left out of AP", GeoFuseWarning)
    return (sum(values) / len(values) if values else 0.0), skipped


@dataclass
class ConditionMetrics:
    r1: float
    r5: float
    r10: float
    ap: float
    queries: int = 0
    gallery: int = 0

    def scores(self) -> Dict[str, float]:
        return {"r1": self.r1, "r5": self.r5, "r10": self.r10, "ap": self.ap}

    @classmethod
    def mean_of(cls, rows: Sequence["ConditionMetrics"]) -> "ConditionMetrics":
        count = len(rows)
        return cls(
            r1=sum(r.r1 for r in rows) / count,
            r5=sum(r.r5 for r in rows) / count,
            r10=sum(r.r10 for r in rows) / count,
            ap=sum(r.ap for r in rows) / count,
            queries=sum(r.queries for r in rows),
            gallery=rows[0].gallery if rows else 0,
        )


def score_rankings(rankings: np.ndarray, relevance: np.ndarray) -> ConditionMetrics:
    r1, r5, r10 = (recall_at_k(rankings, relevance, k) for k in RECALL_KS)
    ap, _ = mean_average_precision(rankings, relevance)
    return ConditionMetrics(r1, r5, r10, ap, queries=rankings.shape[0], gallery=rankings.shape[1])


@dataclass
class RetrievalReport:
    direction: str
    conditions: Dict[str, ConditionMetrics] = field(default_factory=dict)

    @property
    def mean(self) -> ConditionMetrics:
        return ConditionMetrics.mean_of(list(self.conditions.values()))

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "conditions": {name: metrics.scores() for name, metrics in self.conditions.items()},
            "mean": self.mean.scores(),
            "queries": {name: metrics.queries for name, metrics in self.conditions.items()},
            "gallery": {name: metrics.gallery for name, metrics in self.conditions.items()},
        }

    def rows(self) -> List[Tuple[str, str, float, float, float, float]]:
        out = [(self.direction, name, m.r1, m.r5, m.r10, m.ap) for name, m in self.conditions.items()]
        mean = self.mean
        out.append((self.direction, "Mean", mean.r1, mean.r5, mean.r10, mean.ap))
        return out
