# pygeofuse/utils/__init__.py

from .utils import (
    get_caller_dir,
    resolve_path,
    out_dir_handler,
    derive_seed,
    derive_rng,
    write_manifest,
    read_manifest,
    MANIFEST_COLUMNS,
)
from .runner import RunLog, RunResult, run_command

__all__ = [
    "get_caller_dir",
    "resolve_path",
    "out_dir_handler",
    "derive_seed",
    "derive_rng",
    "write_manifest",
    "read_manifest",
    "MANIFEST_COLUMNS",
    "RunLog",
    "RunResult",
    "run_command",
]
