# pygeofuse/parsers/train_parser.py

import pandas as pd
from typing import Generator, Optional

from ..config import TrainConfig
from ..nn import GeoFuseModel, load_model
from ..retrieval import read_report_csv
from ..training import read_loss_log

class TrainParser:
    """
    A class for parsing the output of the TrainConfig.
    """
    def __init__(self, config: TrainConfig):
        self.checkpoint = config.checkpoint
        self.loss_log = config.loss_log
        self.final_eval_csv = config.final_eval_csv

    def to_pandas(self) -> pd.DataFrame:
        """
        Returns the loss log: one row per optimization step with columns
        epoch, step, L_IT, L_CE, L_CC, L_total, lr.
        """
        return read_loss_log(self.loss_log)

    def to_list(self) -> list[dict]:
        """
        Returns the loss log as a list of dictionaries.
        """
        return self.to_pandas().to_dict(orient="records")

    def to_gen(self) -> Generator[dict, None, None]:
        """
        Returns a generator that yields the loss log rows, read in chunks.
        """
        for chunk in pd.read_csv(self.loss_log, chunksize=512):
            yield from chunk.to_dict(orient="records")

    def epoch_means(self) -> pd.DataFrame:
        return self.to_pandas().groupby("epoch")[["L_IT", "L_CE", "L_CC", "L_total"]].mean()

    def final_eval(self) -> Optional[pd.DataFrame]:
        """
        Returns the evaluation run after training, or None when the dataset had no test split.
        """
        if not self.final_eval_csv.is_file():
            return None
        return read_report_csv(self.final_eval_csv)

    def to_model(self) -> GeoFuseModel:
        return load_model(self.checkpoint)

    def to_path(self) -> str:
        """
        Returns the path to the checkpoint.

        Returns:
        --------
        str
        """
        return str(self.checkpoint)
