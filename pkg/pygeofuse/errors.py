# pygeofuse/errors.py


class GeoFuseError(Exception):
    """Base class of every error raised by pygeofuse."""

    exit_code = 1


class ConfigurationError(GeoFuseError, ValueError):
    """A configuration value is invalid or unknown."""


class DataError(GeoFuseError, ValueError):
    """Input data (images, labels, datasets, checkpoints) is malformed."""


class DimensionError(GeoFuseError, ValueError):
    """Tensor shapes do not agree."""


class ContractError(GeoFuseError, ValueError):
    """A function was called in violation of its contract."""


class NumericalError(GeoFuseError, RuntimeError):
    """A numerical failure: non-finite loss, failed gradient check."""

    exit_code = 2


class GeoFuseWarning(UserWarning):
    """Soft conditions that are reported but do not abort a run."""


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, GeoFuseError):
        return error.exit_code
    return 1
