# pygeofuse/bench/scenes.py

"""
Procedural scenes and their three aligned views.

A scene is a road graph plus building footprints in unit-square
coordinates. The satellite view draws textured ground, buildings and roads;
the roadmap view draws the same roads alone, dark on white; the drone view
resamples the satellite view under a fixed oblique warp with per-view
jitter.
"""

import zlib
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from ..errors import ConfigurationError
from ..utils import derive_rng

Point = Tuple[float, float]

ROAD_RGB = (92, 92, 96)
ROADMAP_RGB = (32, 32, 32)
BUILDING_PALETTE = (
    (196, 82, 64),
    (210, 190, 140),
    (120, 130, 170),
    (170, 170, 160),
    (150, 96, 60),
    (230, 226, 214),
)


@dataclass(frozen=True)
class Building:
    x0: float
    y0: float
    x1: float
    y1: float
    color: int


@dataclass(frozen=True)
class SceneSpec:
    class_id: str
    seed: int
    roads: Tuple[Tuple[Point, ...], ...]
    buildings: Tuple[Building, ...] = field(default_factory=tuple)

    def without_buildings(self) -> "SceneSpec":
        return SceneSpec(self.class_id, self.seed, self.roads, ())


def class_key(class_id: Union[str, int]) -> int:
    """Integer stream key of a class id; numeric ids map to themselves."""
    text = str(class_id)
    return int(text) if text.isdigit() else zlib.crc32(text.encode("utf-8"))


def _clip(value: float) -> float:
    return float(min(1.0, max(0.0, value)))


def _road(rng: np.random.Generator) -> Tuple[Point, ...]:
    # random walk from one side of the square towards the opposite side
    side = int(rng.integers(4))
    t = rng.uniform(0.1, 0.9)
    start = [(0.0, t), (1.0, t), (t, 0.0), (t, 1.0)][side]
    heading = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)][side]
    points = [start]
    x, y = start
    for _ in range(int(rng.integers(2, 5))):
        step = rng.uniform(0.2, 0.45)
        x = _clip(x + heading[0] * step + rng.normal(0.0, 0.12))
        y = _clip(y + heading[1] * step + rng.normal(0.0, 0.12))
        points.append((x, y))
    return tuple((round(px, 6), round(py, 6)) for px, py in points)


def _building(rng: np.random.Generator) -> Building:
    w, h = rng.uniform(0.08, 0.25, size=2)
    x0, y0 = rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h)
    return Building(
        round(x0, 6), round(y0, 6), round(_clip(x0 + w), 6), round(_clip(y0 + h), 6),
        int(rng.integers(len(BUILDING_PALETTE))),
    )


def generate_scene(class_id: Union[str, int], seed: int) -> SceneSpec:
    """Deterministic scene for (`class_id`, `seed`): 2-4 roads and 2-6 buildings."""
    rng = derive_rng(seed, class_key(class_id))
    roads = tuple(_road(rng) for _ in range(int(rng.integers(2, 5))))
    buildings = tuple(_building(rng) for _ in range(int(rng.integers(2, 7))))
    return SceneSpec(str(class_id), int(seed), roads, buildings)


def road_width(size: int) -> int:
    return max(2, size // 24)


def _pixels(points: Tuple[Point, ...], size: int) -> List[Tuple[float, float]]:
    scale = size - 1
    return [(x * scale, y * scale) for x, y in points]


def _draw_roads(draw: ImageDraw.ImageDraw, scene: SceneSpec, size: int, color) -> None:
    for road in scene.roads:
        draw.line(_pixels(road, size), fill=color, width=road_width(size), joint="curve")


def _ground(scene: SceneSpec, size: int) -> np.ndarray:
    rng = derive_rng(scene.seed, class_key(scene.class_id), 1)
    base = np.array([96.0, 128.0, 72.0]) + rng.uniform(-24.0, 24.0, size=3)
    noise = ndimage.gaussian_filter(rng.normal(0.0, 1.0, size=(size, size)), sigma=size / 24)
    noise = noise / (np.abs(noise).max() + 1e-12)
    ground = base[None, None, :] + 28.0 * noise[..., None]
    return np.clip(np.round(ground), 0, 255).astype(np.uint8)


def render_satellite(scene: SceneSpec, size: int) -> np.ndarray:
    image = Image.fromarray(_ground(scene, size), "RGB")
    draw = ImageDraw.Draw(image)
    scale = size - 1
    for b in scene.buildings:
        draw.rectangle(
            [b.x0 * scale, b.y0 * scale, b.x1 * scale, b.y1 * scale],
            fill=BUILDING_PALETTE[b.color],
            outline=(40, 40, 40),
        )
    _draw_roads(draw, scene, size, ROAD_RGB)
    return np.asarray(image, dtype=np.float64) / 255.0


def render_roadmap(scene: SceneSpec, size: int) -> np.ndarray:
    """Roads only; depends on nothing but the road graph."""
    image = Image.new("RGB", (size, size), (255, 255, 255))
    _draw_roads(ImageDraw.Draw(image), scene, size, ROADMAP_RGB)
    return np.asarray(image, dtype=np.float64) / 255.0


def drone_warp(satellite: np.ndarray, jitter: Tuple[float, float, float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """
    Oblique resampling of a satellite raster.

    The top rows are compressed horizontally as in a forward-looking camera;
    `jitter` is (dx, dy, angle) in pixels and radians.
    """
    size = satellite.shape[0]
    dx, dy, angle = jitter
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    v = rows / (size - 1)
    c = (size - 1) / 2.0
    squeeze = 0.7 + 0.3 * v
    u = (cols - c) * squeeze
    w = (rows - c) * (0.85 + 0.15 * v)
    cos, sin = np.cos(angle), np.sin(angle)
    src_x = c + cos * u - sin * w + dx
    src_y = c + sin * u + cos * w + dy
    out = np.stack(
        [ndimage.map_coordinates(satellite[..., ch], [src_y, src_x], order=1, mode="reflect") for ch in range(3)],
        axis=-1,
    )
    return np.round(np.clip(out, 0.0, 1.0) * 255.0) / 255.0


def view_jitter(scene: SceneSpec, view_seed: int, size: int) -> Tuple[float, float, float]:
    rng = derive_rng(scene.seed, class_key(scene.class_id), 2, view_seed)
    shift = size / 16
    return (
        float(rng.uniform(-shift, shift)),
        float(rng.uniform(-shift, shift)),
        float(rng.uniform(-np.pi / 12, np.pi / 12)),
    )


def render_views(scene: SceneSpec, size: int, view_seed: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Render (satellite, roadmap, drone_clean) rasters of `scene` as (size, size, 3)
    float arrays on the 8-bit grid.
    """
    satellite = render_satellite(scene, size)
    roadmap = render_roadmap(scene, size)
    drone = drone_warp(satellite, view_jitter(scene, view_seed, size))
    return satellite, roadmap, drone


def satellite_road_mask(satellite: np.ndarray) -> np.ndarray:
    return np.all(np.round(satellite * 255.0) == np.array(ROAD_RGB), axis=-1)


def roadmap_road_mask(roadmap: np.ndarray) -> np.ndarray:
    return roadmap.mean(axis=-1) < 0.5


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    return float(np.logical_and(a, b).sum() / union) if union else 1.0


def pseudo_depth(satellite: np.ndarray) -> np.ndarray:
    """Blurred luminance of the satellite raster over three channels, on the 8-bit grid."""
    luminance = satellite @ np.array([0.299, 0.587, 0.114])
    blurred = ndimage.gaussian_filter(luminance, sigma=2.0)
    return np.repeat(np.round(np.clip(blurred, 0.0, 1.0) * 255.0)[..., None] / 255.0, 3, axis=-1)


def blank_raster(size: int) -> np.ndarray:
    return np.ones((size, size, 3))


MODALITIES = ("roadmap", "blank", "pseudo")


def auxiliary_raster(modality: str, satellite: np.ndarray, roadmap: np.ndarray) -> np.ndarray:
    """The raster fused with `satellite` under `modality`."""
    if modality == "roadmap":
        return roadmap
    if modality == "blank":
        return blank_raster(satellite.shape[0])
    if modality == "pseudo":
        return pseudo_depth(satellite)
    raise ConfigurationError(f"Unknown modality {modality}; expected one of {MODALITIES}")
