# pygeofuse/parsers/evaluate_parser.py

import json
import pandas as pd
from typing import Generator

from ..config import EvalConfig
from ..retrieval import read_report_csv

class EvalParser:
    """
    A class for parsing the output of the EvalConfig.
    """
    def __init__(self, config: EvalConfig):
        self.report_json = config.report_json
        self.report_csv = config.report_csv

    def to_pandas(self) -> pd.DataFrame:
        """
        Returns the report table: direction, condition, r1, r5, r10, ap, with a
        `Mean` row closing each direction.
        """
        return read_report_csv(self.report_csv)

    def to_list(self) -> list[dict]:
        return self.to_pandas().to_dict(orient="records")

    def to_gen(self) -> Generator[dict, None, None]:
        for row in self.to_pandas().itertuples(index=False):
            yield row._asdict()

    def to_dict(self) -> list[dict]:
        """
        Returns the JSON report, one entry per direction.
        """
        with open(self.report_json) as handle:
            return json.load(handle)

    def mean_r1(self) -> dict:
        """
        Returns the mean R@1 over the conditions, keyed by direction.
        """
        return {report["direction"]: report["mean"]["r1"] for report in self.to_dict()}

    def to_path(self) -> str:
        """
        Returns the path to the JSON report.

        Returns:
        --------
        str
        """
        return str(self.report_json)
