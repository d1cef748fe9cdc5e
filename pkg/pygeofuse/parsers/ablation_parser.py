# pygeofuse/parsers/ablation_parser.py

import pandas as pd
from typing import Generator

from ..config import AblationConfig

class AblationParser:
    """
    A class for parsing the output of the AblationConfig.
    """
    def __init__(self, config: AblationConfig):
        self.summary_table = config.summary_table
        self.runs_table = config.runs_table

    def to_pandas(self, runs: bool = False) -> pd.DataFrame:
        """
        Returns the summary over seeds, or with `runs=True` one row per seed.
        """
        return pd.read_csv(self.runs_table if runs else self.summary_table)

    def to_list(self) -> list[dict]:
        return self.to_pandas().to_dict(orient="records")

    def to_gen(self) -> Generator[dict, None, None]:
        for row in self.to_pandas().itertuples(index=False):
            yield row._asdict()

    def to_path(self) -> str:
        """
        Returns the path to the summary table.

        Returns:
        --------
        str
        """
        return str(self.summary_table)
