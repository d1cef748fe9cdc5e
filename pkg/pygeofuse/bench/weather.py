# pygeofuse/bench/weather.py

"""
The ten weather conditions and their parametric corruptions.

All corruptions take an (H, W, 3) float image in [0, 1], a severity in
[0, 1] and an integer seed, and are deterministic in those arguments.
"""

from enum import Enum
from typing import Tuple

import numpy as np
from scipy import ndimage

from ..errors import ConfigurationError, DataError
from ..utils import derive_rng


class WeatherCondition(Enum):
    NORMAL = "Normal"
    FOG = "Fog"
    RAIN = "Rain"
    SNOW = "Snow"
    FOG_RAIN = "FogRain"
    FOG_SNOW = "FogSnow"
    RAIN_SNOW = "RainSnow"
    DARK = "Dark"
    OVER_EXPOSED = "OverExposed"
    WIND = "Wind"

    @property
    def index(self) -> int:
        return list(WeatherCondition).index(self)

    @property
    def components(self) -> Tuple["WeatherCondition", ...]:
        """Constituents in application order; a simple condition is its own constituent."""
        return _COMPOUND.get(self, (self,))

    @classmethod
    def parse(cls, name: str) -> "WeatherCondition":
        """Accepts `FogRain`, `Fog+Rain`, `fog_rain`, `FOG_RAIN` and the like."""
        key = str(name).replace("+", "").replace("_", "").replace("-", "").lower()
        for condition in cls:
            if condition.value.lower() == key:
                return condition
        raise DataError(f"Unknown weather condition: {name}")


_COMPOUND = {
    WeatherCondition.FOG_RAIN: (WeatherCondition.FOG, WeatherCondition.RAIN),
    WeatherCondition.FOG_SNOW: (WeatherCondition.FOG, WeatherCondition.SNOW),
    WeatherCondition.RAIN_SNOW: (WeatherCondition.RAIN, WeatherCondition.SNOW),
}

FOG_DENSITY = 0.75
RAIN_DROPS = 0.03
RAIN_LENGTH = 9
SNOW_FLAKES = 0.02


def _fog(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    # x + a(1 - x) keeps every pixel >= its input
    return image + FOG_DENSITY * severity * (1.0 - image)


def _rain(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    h, w = image.shape[:2]
    drops = (rng.random((h, w)) < RAIN_DROPS * severity).astype(np.float64)
    streaks = ndimage.convolve1d(drops, np.ones(RAIN_LENGTH), axis=0, mode="wrap")
    streaks = np.clip(streaks, 0.0, 1.0)
    alpha = (0.6 * severity * streaks)[..., None]
    darkened = image * (1.0 - 0.15 * severity)
    return darkened * (1.0 - alpha) + 0.85 * alpha


def _snow(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    h, w = image.shape[:2]
    flakes = (rng.random((h, w)) < SNOW_FLAKES * severity).astype(np.float64)
    flakes = ndimage.grey_dilation(flakes, size=(2, 2))
    flakes = np.clip(ndimage.gaussian_filter(flakes, sigma=0.6) * 2.0, 0.0, 1.0)
    whitened = image + 0.25 * severity * (1.0 - image)
    alpha = (severity * flakes)[..., None]
    return whitened * (1.0 - alpha) + alpha


def _dark(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    return np.power(image, 1.0 + 2.0 * severity) * (1.0 - 0.5 * severity)


def _over_exposed(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    return image * (1.0 + 1.5 * severity) + 0.2 * severity


def _wind(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    length = 1 + 2 * int(round(6 * severity))
    kernel = np.full(length, 1.0 / length)
    return ndimage.convolve1d(image, kernel, axis=1, mode="reflect")


_CORRUPTIONS = {
    WeatherCondition.FOG: _fog,
    WeatherCondition.RAIN: _rain,
    WeatherCondition.SNOW: _snow,
    WeatherCondition.DARK: _dark,
    WeatherCondition.OVER_EXPOSED: _over_exposed,
    WeatherCondition.WIND: _wind,
}


def apply_weather(image: np.ndarray, condition: WeatherCondition, severity: float = 1.0, seed: int = 0) -> np.ndarray:
    """
    Corrupt `image` with `condition` at `severity`.

    Compound conditions apply their constituents in fixed order (Fog then
    Rain, Fog then Snow, Rain then Snow), each with its own seeded stream.
    Normal and severity 0 return an unchanged copy. The output keeps the
    input shape and is clipped to [0, 1].
    """
    if not 0.0 <= severity <= 1.0:
        raise ConfigurationError(f"severity is {severity} but must be in [0, 1]")
    if not isinstance(condition, WeatherCondition):
        condition = WeatherCondition.parse(condition)
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataError(f"weather corruptions expect an (H, W, 3) image, got {image.shape}")

    out = image.copy()
    if condition is WeatherCondition.NORMAL or severity == 0.0:
        return out
    for position, part in enumerate(condition.components):
        out = np.clip(_CORRUPTIONS[part](out, severity, derive_rng(seed, part.index, position)), 0.0, 1.0)
    return out
