# pygeofuse/bench/__init__.py

from .weather import WeatherCondition, apply_weather
from .scenes import (
    SceneSpec,
    Building,
    generate_scene,
    render_views,
    render_satellite,
    render_roadmap,
    pseudo_depth,
    blank_raster,
    auxiliary_raster,
    MODALITIES,
)
from .augment import (
    DihedralTransform,
    sample_dihedral,
    apply_transform,
    invert_transform,
    synchronized_augment,
    random_shift_crop,
)
from .dataset import (
    DatasetIndex,
    load_dataset,
    export_dataset,
    read_image,
    write_image,
    SPLITS,
    VIEWS,
)

__all__ = [
    "WeatherCondition",
    "apply_weather",
    "SceneSpec",
    "Building",
    "generate_scene",
    "render_views",
    "render_satellite",
    "render_roadmap",
    "pseudo_depth",
    "blank_raster",
    "auxiliary_raster",
    "MODALITIES",
    "DihedralTransform",
    "sample_dihedral",
    "apply_transform",
    "invert_transform",
    "synchronized_augment",
    "random_shift_crop",
    "DatasetIndex",
    "load_dataset",
    "export_dataset",
    "read_image",
    "write_image",
    "SPLITS",
    "VIEWS",
]
