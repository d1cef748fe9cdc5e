# pygeofuse/parsers/synth_gen_parser.py

import pandas as pd
from typing import Generator

from ..bench import DatasetIndex, load_dataset
from ..bench.dataset import MANIFEST_NAME
from ..config import SynthGenConfig
from ..utils import read_manifest

class SynthGenParser:
    """
    A class for parsing the output of the SynthGenConfig.
    """
    def __init__(self, config: SynthGenConfig):
        self.root = config.out_dir
        self.manifest = config.out_dir / MANIFEST_NAME

    def to_pandas(self) -> pd.DataFrame:
        """
        Returns the manifest as a DataFrame with columns class_id, view, seed, path.
        """
        return read_manifest(self.manifest)

    def to_list(self) -> list[dict]:
        """
        Returns a list of dictionaries, one per manifest line.
        """
        return self.to_pandas().to_dict(orient="records")

    def to_gen(self) -> Generator[dict, None, None]:
        """
        Returns a generator that yields one dictionary per manifest line.
        """
        for row in self.to_pandas().itertuples(index=False):
            yield row._asdict()

    def to_dataset(self, split: str = "train") -> DatasetIndex:
        """
        Returns the index of one split of the generated dataset.
        """
        return load_dataset(self.root, split)

    def to_path(self) -> str:
        """
        Returns the dataset root directory.

        Returns:
        --------
        str
        """
        return str(self.root)
