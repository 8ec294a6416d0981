import csv
import io
from pathlib import Path
from typing import Optional, Sequence, Union

from pydantic import BaseModel

from ..adversarial import TrainHistory
from ..destination import Destination, as_destination
from .metrics import RocPoint

LOSS_CURVE_HEADER = ("epoch", "loss_p_train", "loss_d_train", "loss_p_test")
ROC_HEADER = ("threshold", "fp_rate", "tp_rate")


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def loss_curve_csv(history: TrainHistory) -> str:
    """One row per epoch, an empty loss_p_test cell when no held-out set was given"""
    return _csv(
        LOSS_CURVE_HEADER,
        [
            (str(e.epoch), _fmt(e.loss_p_train), _fmt(e.loss_d_train), _fmt(e.loss_p_test))
            for e in history.epochs
        ],
    )


def roc_csv(points: Sequence[RocPoint]) -> str:
    return _csv(
        ROC_HEADER,
        [
            ("inf" if p.threshold is None else _fmt(p.threshold), _fmt(p.fp_rate), _fmt(p.tp_rate))
            for p in points
        ],
    )


def write_loss_curve(history: TrainHistory, target: Union[Destination, Path]):
    as_destination(target).upload_str(loss_curve_csv(history))


def write_roc(points: Sequence[RocPoint], target: Union[Destination, Path]):
    as_destination(target).upload_str(roc_csv(points))


def write_report(report: BaseModel, target: Union[Destination, Path]):
    as_destination(target).upload_model(report)
