# pygeofuse/bench/augment.py

from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..errors import DataError
from ..utils import derive_rng


class DihedralTransform(NamedTuple):
    """Optional horizontal flip followed by `quarter_turns` counter-clockwise rotations."""

    flip: bool = False
    quarter_turns: int = 0

    @property
    def is_identity(self) -> bool:
        return not self.flip and self.quarter_turns % 4 == 0


def sample_dihedral(seed: int) -> DihedralTransform:
    rng = derive_rng(seed)
    return DihedralTransform(bool(rng.random() < 0.5), int(rng.integers(4)))


def apply_transform(image: np.ndarray, transform: DihedralTransform) -> np.ndarray:
    out = image[:, ::-1] if transform.flip else image
    return np.ascontiguousarray(np.rot90(out, transform.quarter_turns, axes=(0, 1)))


def invert_transform(image: np.ndarray, transform: DihedralTransform) -> np.ndarray:
    out = np.rot90(image, -transform.quarter_turns, axes=(0, 1))
    return np.ascontiguousarray(out[:, ::-1] if transform.flip else out)


def synchronized_augment(
    satellite: np.ndarray,
    roadmap: np.ndarray,
    seed: int,
    transform: Optional[DihedralTransform] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply one sampled flip/rotation identically to a satellite-roadmap pair.

    Pass `transform` to bypass sampling.
    """
    if satellite.shape != roadmap.shape:
        raise DataError(f"satellite {satellite.shape} and roadmap {roadmap.shape} differ in size")
    transform = sample_dihedral(seed) if transform is None else transform
    return apply_transform(satellite, transform), apply_transform(roadmap, transform)


def random_shift_crop(image: np.ndarray, seed: int, max_shift: Optional[int] = None) -> np.ndarray:
    """Reflect-pad by `max_shift` (default 1/16 of the side) and crop back at a random offset."""
    size = image.shape[0]
    pad = size // 16 if max_shift is None else int(max_shift)
    if pad <= 0:
        return image.copy()
    rng = derive_rng(seed)
    top, left = (int(v) for v in rng.integers(0, 2 * pad + 1, size=2))
    padded = np.pad(image, ((pad, pad), (pad, pad), (0, 0)), mode="reflect")
    return np.ascontiguousarray(padded[top:top + size, left:left + image.shape[1]])
