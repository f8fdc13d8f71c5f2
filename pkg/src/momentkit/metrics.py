"""Moment-retrieval metrics: temporal IoU, R1@tau, mIoU and mAP@tau.

Predictions carry no scores; list order is the rank order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import Moment

DEFAULT_R1_TAUS = (0.5, 0.7)
DEFAULT_MAP_TAUS = (0.5, 0.75)
AVG_BAND = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


class EmptyDataset(ValueError):
    pass


@dataclass(frozen=True)
class QueryResult:
    qid: str
    predictions: tuple[Moment, ...]
    ground_truth: tuple[Moment, ...]

    def __post_init__(self):
        object.__setattr__(self, "predictions", tuple(_as_moment(m) for m in self.predictions))
        object.__setattr__(self, "ground_truth", tuple(_as_moment(m) for m in self.ground_truth))
        if not self.ground_truth:
            raise ValueError(f"query {self.qid!r} has no ground-truth moments")


def _as_moment(m) -> Moment:
    return m if isinstance(m, Moment) else Moment(float(m[0]), float(m[1]))


def temporal_iou(a: Moment, b: Moment) -> float:
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    if inter <= 0:
        return 0.0
    union = (a.end_s - a.start_s) + (b.end_s - b.start_s) - inter
    return inter / union if union > 0 else 0.0


def top1_iou(result: QueryResult) -> float:
    if not result.predictions:
        return 0.0
    top = result.predictions[0]
    return max(temporal_iou(top, g) for g in result.ground_truth)


def _require(results) -> None:
    if not results:
        raise EmptyDataset("no query results to evaluate")


def recall_at_1(results: Sequence[QueryResult], tau: float) -> float:
    _require(results)
    if not (0 < tau <= 1):
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    return sum(top1_iou(r) >= tau for r in results) / len(results)


def mean_iou(results: Sequence[QueryResult]) -> float:
    _require(results)
    return float(np.mean([top1_iou(r) for r in results]))


def match_predictions(result: QueryResult, tau: float) -> list[bool]:
    """TP/FP flag per prediction under greedy rank-priority matching.

    Each prediction, in rank order, takes the unmatched ground-truth window
    of highest IoU (lowest index on ties); it is a true positive iff that IoU
    reaches ``tau``, and only then is the window consumed.
    """
    matched = [False] * len(result.ground_truth)
    flags = []
    for p in result.predictions:
        best, best_iou = -1, -1.0
        for j, g in enumerate(result.ground_truth):
            if matched[j]:
                continue
            iou = temporal_iou(p, g)
            if iou > best_iou:
                best, best_iou = j, iou
        hit = best >= 0 and best_iou >= tau
        if hit:
            matched[best] = True
        flags.append(hit)
    return flags


def precision_recall(flags: Sequence[bool], n_gt: int) -> tuple[np.ndarray, np.ndarray]:
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    ranks = np.arange(1, len(flags) + 1, dtype=np.float64)
    return tp / ranks, tp / n_gt


def average_precision(result: QueryResult, tau: float) -> float:
    """All-point interpolated AP over the ground-truth count."""
    if not result.predictions:
        return 0.0
    precision, recall = precision_recall(match_predictions(result, tau), len(result.ground_truth))
    # precision envelope: best precision at this or any higher recall
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


def mean_average_precision(results: Sequence[QueryResult], tau: float) -> float:
    _require(results)
    return float(np.mean([average_precision(r, tau) for r in results]))


@dataclass(frozen=True)
class MetricReport:
    r1: dict[float, float]
    miou: float
    map: dict[float, float]
    map_avg: float
    n_queries: int
    band: tuple[float, ...] = field(default=())

    def row(self) -> dict[str, float]:
        out = {"mIoU": self.miou}
        out.update({f"R1@{t:g}": v for t, v in self.r1.items()})
        out.update({f"mAP@{t:g}": v for t, v in self.map.items()})
        out["mAP@avg"] = self.map_avg
        return out


def evaluate(
    results: Sequence[QueryResult],
    r1_taus: Sequence[float] = DEFAULT_R1_TAUS,
    map_taus: Sequence[float] = DEFAULT_MAP_TAUS,
    avg_band: bool | Sequence[float] = False,
) -> MetricReport:
    """Score a dataset.

    ``map_avg`` is the mean mAP over ``avg_band`` when given (``True`` selects
    0.5:0.05:0.95), otherwise the mean over ``map_taus``.
    """
    _require(results)
    r1 = {float(t): recall_at_1(results, t) for t in r1_taus}
    maps = {float(t): mean_average_precision(results, t) for t in map_taus}
    if avg_band is True:
        band = AVG_BAND
    elif avg_band:
        band = tuple(float(t) for t in avg_band)
    else:
        band = ()
    if band:
        map_avg = float(np.mean([maps.get(t, mean_average_precision(results, t)) for t in band]))
    else:
        map_avg = float(np.mean(list(maps.values()))) if maps else 0.0
    return MetricReport(r1, mean_iou(results), maps, map_avg, len(results), band)


def _table_columns(report: MetricReport) -> list[tuple[str, float]]:
    cols = [("mIoU", report.miou)]
    cols += [(f"R1@{t:g}", v) for t, v in report.r1.items()]
    cols += [(f"mAP@{t:g}", v) for t, v in report.map.items()]
    if report.band:
        cols.append(("mAP@avg", report.map_avg))
    return cols


def report_csv(report: MetricReport) -> str:
    cols = _table_columns(report)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n_queries"] + [name for name, _ in cols])
    writer.writerow([report.n_queries] + [f"{v:.6f}" for _, v in cols])
    return buf.getvalue()


def report_markdown(report: MetricReport) -> str:
    """Percentages with two decimals, the usual layout of results tables."""
    cols = _table_columns(report)
    head = "| " + " | ".join(name for name, _ in cols) + " |"
    rule = "|" + "|".join("---:" for _ in cols) + "|"
    body = "| " + " | ".join(f"{100 * v:.2f}" for _, v in cols) + " |"
    return "\n".join([head, rule, body]) + "\n"
