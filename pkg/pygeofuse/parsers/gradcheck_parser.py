# pygeofuse/parsers/gradcheck_parser.py

import pandas as pd
from typing import Generator

from ..config import GradCheckConfig

class GradCheckParser:
    """
    A class for parsing the output of the GradCheckConfig.
    """
    def __init__(self, config: GradCheckConfig):
        self.table = config.table

    def to_pandas(self) -> pd.DataFrame:
        """
        Returns one row per checked operation: scope, operation, max_rel_error, passed.
        """
        return pd.read_csv(self.table)

    def to_list(self) -> list[dict]:
        return self.to_pandas().to_dict(orient="records")

    def to_gen(self) -> Generator[dict, None, None]:
        for row in self.to_pandas().itertuples(index=False):
            yield row._asdict()

    def failed(self) -> list[str]:
        """
        Returns `scope/operation` of every check above the tolerance.
        """
        frame = self.to_pandas()
        frame = frame[~frame["passed"]]
        return [f"{row.scope}/{row.operation}" for row in frame.itertuples(index=False)]

    def to_path(self) -> str:
        return str(self.table)
