import logging

import pandas as pd

from neuroaps.api.dataclasses import REPORT_COLUMNS, RunReport
from neuroaps.utils.utils import atomic_write, json_dumps

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_loss", "train_acc", "test_acc"]


def write_frame(path, frame: pd.DataFrame):
    with atomic_write(path) as f:
        frame.to_csv(f, index=False, lineterminator="\n")


def write_json(path, obj):
    with atomic_write(path) as f:
        f.write(json_dumps(obj, indent=2))
        f.write("\n")


def write_report(report: RunReport, csv_path, json_path=None):
    frame = report.sorted().to_frame()
    write_frame(csv_path, frame[REPORT_COLUMNS])
    if json_path:
        write_json(json_path, report.sorted().to_dict())
    logger.info("Report with %d rows written to %s", len(frame), csv_path)


def history_frame(history) -> pd.DataFrame:
    return pd.DataFrame([h.to_dict() if hasattr(h, "to_dict") else dict(h) for h in history], columns=HISTORY_COLUMNS)


def write_history(path, history, json_path=None):
    write_frame(path, history_frame(history))
    if json_path:
        write_json(json_path, [h.to_dict() if hasattr(h, "to_dict") else dict(h) for h in history])
