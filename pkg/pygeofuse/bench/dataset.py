# pygeofuse/bench/dataset.py

"""
On-disk datasets in the University-1652 style layout

    root/{train,test}/{drone,satellite,roadmap}/<class_id>/*.png

and the synthetic exporter that writes them.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Tuple, Union

import numpy as np
from PIL import Image

from ..errors import DataError
from ..utils import derive_seed, write_manifest
from .scenes import drone_warp, generate_scene, render_roadmap, render_satellite, view_jitter

SPLITS = ("train", "test")
VIEWS = ("drone", "satellite", "roadmap")
MANIFEST_NAME = "manifest.tsv"


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Decode an 8-bit RGB raster to float in [0, 1] as value/255."""
    try:
        with Image.open(path) as image:
            data = np.asarray(image.convert("RGB"), dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise DataError(f"Cannot read image {path}: {exc}") from exc
    return data / 255.0


def write_image(path: Union[str, Path], image: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels, "RGB").save(path, format="PNG")


@dataclass
class DatasetIndex:
    root: Path
    split: str
    classes: List[str]
    images: Dict[str, Dict[str, List[Path]]] = field(default_factory=dict)

    def paths(self, view: str, class_id: str) -> List[Path]:
        return self.images[view][class_id]

    def items(self, view: str) -> Iterator[Tuple[str, Path]]:
        """(class_id, path) pairs of `view` in class order, then file order."""
        for class_id in self.classes:
            for path in self.images[view][class_id]:
                yield class_id, path

    def count(self, view: str) -> int:
        return sum(len(self.images[view][c]) for c in self.classes)

    def relative_rows(self) -> List[Tuple[str, str, str]]:
        """(class_id, view, path relative to the dataset root) for every image."""
        return [
            (class_id, view, path.relative_to(self.root).as_posix())
            for view in VIEWS
            for class_id, path in self.items(view)
        ]


def load_dataset(root: Union[str, Path], split: str = "train") -> DatasetIndex:
    """
    Index one split of a dataset tree.

    Classes are sorted lexicographically and files by name. Every class must
    have at least one image in each of the three views.
    """
    if split not in SPLITS:
        raise DataError(f"Unknown split {split}; expected one of {SPLITS}")
    root = Path(root)
    base = root / split
    if not base.is_dir():
        raise DataError(f"Split {split} not found under {root}")

    images: Dict[str, Dict[str, List[Path]]] = {view: {} for view in VIEWS}
    for view in VIEWS:
        view_dir = base / view
        if not view_dir.is_dir():
            continue
        for class_dir in sorted(p for p in view_dir.iterdir() if p.is_dir()):
            images[view][class_dir.name] = sorted(class_dir.glob("*.png"))

    classes = sorted(set().union(*(images[view].keys() for view in VIEWS)))
    if not classes:
        raise DataError(f"Split {split} under {root} is empty")
    for class_id in classes:
        for view in VIEWS:
            if not images[view].get(class_id):
                raise DataError(f"Class {class_id} in split {split} has no {view} image")
    return DatasetIndex(root, split, classes, images)


def export_dataset(
    root: Union[str, Path],
    num_classes: int,
    image_size: int,
    seed: int,
    train_drones: int,
    test_drones: int,
) -> List[Tuple[str, str, int, str]]:
    """
    Render a synthetic dataset and its manifest.

    One satellite and one roadmap raster per class, written to both splits;
    drone views of the two splits use disjoint seed streams. Returns the
    manifest rows `(class_id, view, seed, path)` with paths relative to
    `root`.
    """
    root = Path(root)
    rows = []
    for number in range(num_classes):
        class_id = f"{number:04d}"
        scene = generate_scene(class_id, derive_seed(seed, number))
        satellite, roadmap = render_satellite(scene, image_size), render_roadmap(scene, image_size)
        for split, count, stream in (("train", train_drones, 1), ("test", test_drones, 2)):
            for k in range(count):
                view_seed = derive_seed(seed, number, stream, k)
                drone = drone_warp(satellite, view_jitter(scene, view_seed, image_size))
                rel = f"{split}/drone/{class_id}/{k:03d}.png"
                write_image(root / rel, drone)
                rows.append((class_id, "drone", view_seed, rel))
            for view, raster in (("satellite", satellite), ("roadmap", roadmap)):
                rel = f"{split}/{view}/{class_id}/000.png"
                write_image(root / rel, raster)
                rows.append((class_id, view, scene.seed, rel))
    write_manifest(rows, root / MANIFEST_NAME)
    return rows
