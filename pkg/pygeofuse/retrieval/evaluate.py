# pygeofuse/retrieval/evaluate.py

import json
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..bench.dataset import DatasetIndex, read_image
from ..bench.scenes import auxiliary_raster
from ..bench.weather import WeatherCondition, apply_weather
from ..errors import ConfigurationError
from ..nn.tensor import no_grad
from ..utils import derive_seed
from .metrics import RetrievalReport, rank_all, score_rankings

DIRECTIONS = {"d2s": "drone->satellite", "s2d": "satellite->drone"}
REPORT_COLUMNS = ["direction", "condition", "r1", "r5", "r10", "ap"]
DEFAULT_SEVERITY = 0.7


def parse_directions(value: Union[str, Sequence[str]]) -> List[str]:
    """`both`, `d2s`, `s2d` or a list of the latter two."""
    items = [value] if isinstance(value, str) else list(value)
    if items == ["both"]:
        return list(DIRECTIONS)
    unknown = [item for item in items if item not in DIRECTIONS]
    if unknown or not items:
        raise ConfigurationError(f"Unknown directions {unknown}; expected both, d2s or s2d")
    return items


def gallery_features(model, dataset: DatasetIndex, modality: str = "roadmap") -> np.ndarray:
    """One fused satellite-auxiliary embedding per class, in class order."""
    rows = []
    with no_grad():
        for class_id in dataset.classes:
            satellite = read_image(dataset.paths("satellite", class_id)[0])
            roadmap = read_image(dataset.paths("roadmap", class_id)[0])
            rows.append(model.fused_feature(satellite, auxiliary_raster(modality, satellite, roadmap)).data)
    return np.stack(rows)


def drone_features(model, images: Sequence[np.ndarray], condition: WeatherCondition, severity: float, seed: int) -> np.ndarray:
    rows = []
    with no_grad():
        for number, image in enumerate(images):
            corrupted = apply_weather(image, condition, severity, derive_seed(seed, condition.index, number))
            rows.append(model.image_feature(corrupted).data)
    return np.stack(rows)


def evaluate_conditions(
    model,
    dataset: DatasetIndex,
    directions: Union[str, Sequence[str]] = "both",
    conditions: Optional[Sequence[WeatherCondition]] = None,
    severity: float = DEFAULT_SEVERITY,
    seed: int = 0,
    modality: str = "roadmap",
    log: Optional[Callable[[str], None]] = None,
) -> List[RetrievalReport]:
    """
    Per-condition retrieval reports.

    Drone->satellite ranks weather-corrupted drone queries against the fused
    class gallery; satellite->drone ranks the fused class embeddings against
    the corrupted drone views, all views of the class being relevant.
    """
    directions = parse_directions(directions)
    conditions = list(WeatherCondition) if conditions is None else list(conditions)

    labels = [class_id for class_id, _ in dataset.items("drone")]
    drones = [read_image(path) for _, path in dataset.items("drone")]
    gallery = gallery_features(model, dataset, modality)
    relevance = np.array([[label == class_id for class_id in dataset.classes] for label in labels])

    reports = {key: RetrievalReport(DIRECTIONS[key]) for key in directions}
    for condition in conditions:
        queries = drone_features(model, drones, condition, severity, seed)
        if "d2s" in reports:
            metrics = score_rankings(rank_all(queries, gallery), relevance)
            reports["d2s"].conditions[condition.value] = metrics
            if log is not None:
                log(f"d2s {condition.value:<12} R@1={metrics.r1:.4f} AP={metrics.ap:.4f}")
        if "s2d" in reports:
            metrics = score_rankings(rank_all(gallery, queries), relevance.T)
            reports["s2d"].conditions[condition.value] = metrics
            if log is not None:
                log(f"s2d {condition.value:<12} R@1={metrics.r1:.4f} AP={metrics.ap:.4f}")
    return [reports[key] for key in directions]


def reports_frame(reports: Sequence[RetrievalReport]) -> pd.DataFrame:
    return pd.DataFrame([row for report in reports for row in report.rows()], columns=REPORT_COLUMNS)


def write_report_json(reports: Sequence[RetrievalReport], filepath: Union[str, Path]) -> Path:
    filepath = Path(filepath)
    filepath.write_text(json.dumps([report.to_dict() for report in reports], indent=2) + "\n")
    return filepath


def write_report_csv(reports: Sequence[RetrievalReport], filepath: Union[str, Path]) -> Path:
    filepath = Path(filepath)
    reports_frame(reports).to_csv(filepath, index=False, lineterminator="\n")
    return filepath


def read_report_csv(filepath: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(filepath)


def summary_table(reports: Sequence[RetrievalReport]) -> str:
    """R@1 / AP per condition and direction, one line per direction."""
    frame = reports_frame(reports)
    frame["score"] = frame.apply(lambda row: f"{100 * row.r1:.2f}/{100 * row.ap:.2f}", axis=1)
    table = frame.pivot(index="direction", columns="condition", values="score")
    order = [c for c in frame["condition"].drop_duplicates()]
    return table[order].to_string()
