# pygeofuse/utils/utils.py

import os
import sys
import inspect
from pathlib import Path
from typing import Iterable, Tuple, Union

import numpy as np
import pandas as pd
from IPython import get_ipython

from ..errors import ConfigurationError

MANIFEST_COLUMNS = ["class_id", "view", "seed", "path"]


def get_caller_dir() -> Path:
    """
    Get the directory of the script that's using pygeofuse.

    For .py files, traverses the call stack to find the first frame outside
    the pygeofuse package, presumed to be the user's code. For .ipynb files
    (Jupyter notebooks), returns the current working directory.

    Returns:
        Path: Absolute path to the directory containing the calling script
    """
    # Jupyter: the notebook runs from the working directory
    try:
        shell = get_ipython().__class__.__name__
        if shell == 'ZMQInteractiveShell':
            return Path(os.getcwd())
    except NameError:
        # plain interpreter, walk the stack instead
        pass

    frame = inspect.currentframe()
    try:
        # frames under this directory belong to pygeofuse itself
        package_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        caller_frame = frame.f_back

        while caller_frame:
            caller_file = caller_frame.f_code.co_filename
            # first frame outside pygeofuse and site-packages; '<string>' is a REPL or eval frame
            if (not caller_file.startswith(package_path) and
                not caller_file.startswith(sys.prefix) and
                not caller_file == '<string>'):
                return Path(os.path.dirname(os.path.abspath(caller_file)))
            caller_frame = caller_frame.f_back

        # no user frame on the stack
        return Path(os.getcwd())
    finally:
        # frames hold references to their locals
        del frame


def resolve_path(
    path: Union[str, Path],
    caller_dir: Path,
    create_parent: bool = True,
) -> Path:
    """Resolves a path relative to `caller_dir` if not absolute.

    Parameters
    ----------
    path : Path
        Input path (relative or absolute).
    caller_dir : Path
        Base directory for resolving relative paths.
    create_parent : bool
        Create the parent directory when it does not exist.

    Returns
    -------
    Path
        Resolved absolute path.
    """
    path = Path(path)
    if not path.is_absolute():
        path = Path(caller_dir) / path

    path = path.resolve()

    if create_parent:
        os.makedirs(path.parent, exist_ok=True)

    return path


def out_dir_handler(
    out_dir: Union[str, Path],
    force: bool = False,
    must_be_empty: bool = False,
) -> Path:
    """
    Creates the output directory of a command.

    When `must_be_empty` is set, an existing non-empty directory is refused
    unless `force` is given.
    """
    out_dir = Path(out_dir)
    if must_be_empty and out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise ConfigurationError(
            f"Output directory {out_dir} exists and is not empty; pass force=True to overwrite"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed from a tuple of non-negative integer keys."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def derive_rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def write_manifest(rows: Iterable[Tuple[str, str, int, str]], filepath: Union[str, Path]) -> None:
    """Writes `class_id<TAB>view<TAB>seed<TAB>path` lines."""
    frame = pd.DataFrame(list(rows), columns=MANIFEST_COLUMNS)
    frame.to_csv(filepath, sep="\t", header=False, index=False, lineterminator="\n")


def read_manifest(filepath: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(
        filepath,
        sep="\t",
        header=None,
        names=MANIFEST_COLUMNS,
        dtype={"class_id": str, "view": str, "seed": np.int64, "path": str},
        keep_default_na=False,
    )
