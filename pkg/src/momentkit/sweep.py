"""Grid sweeps over frame count, keyframes, retention, audio length and strategy."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .metrics import QueryResult, evaluate
from .parsing import Unrecoverable, parse_moments
from .pipeline import PipelineConfig, map_records
from .synthetic import echo_prediction, jitter_prediction

log = logging.getLogger(__name__)

CSV_HEADER = ["N", "k", "rho", "L", "strategy", "R1@0.5", "R1@0.7", "mAP@0.5", "mAP@0.75", "mIoU", "ratio"]


class MissingPredictions(FileNotFoundError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    n_frames: tuple[int, ...] = (80,)
    k: tuple[int, ...] = (32,)
    rho: tuple[float, ...] = (0.25,)
    audio_length: tuple[int, ...] = (150,)  # 0 means audio off
    strategy: tuple[str, ...] = ("overall",)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        aliases = {"N": "n_frames", "L": "audio_length"}
        out = {}
        for key, value in d.items():
            key = aliases.get(key, key)
            out[key] = value if key == "seed" else tuple(value if isinstance(value, list) else [value])
        return cls(**out)

    def points(self):
        for n, k, rho, L, strategy in itertools.product(self.n_frames, self.k, self.rho, self.audio_length, self.strategy):
            if k > n:
                raise ValueError(f"grid point k={k} exceeds N={n}")
            yield GridPoint(n, k, rho, L, strategy)

    def __len__(self) -> int:
        return len(self.n_frames) * len(self.k) * len(self.rho) * len(self.audio_length) * len(self.strategy)


@dataclass(frozen=True)
class GridPoint:
    n_frames: int
    k: int
    rho: float
    audio_length: int
    strategy: str

    @property
    def point_id(self) -> str:
        return f"N{self.n_frames}_k{self.k}_rho{self.rho:g}_L{self.audio_length}_{self.strategy}"

    def config(self, base: PipelineConfig, seed: int) -> PipelineConfig:
        return replace(base, n_frames=self.n_frames, k=self.k, rho=self.rho, audio_length=self.audio_length, strategy=self.strategy, seed=seed)


def load_predictions(path) -> dict[str, str]:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                preds[rec["qid"]] = rec.get("raw", "")
    return preds


def score_predictions(records, preds: dict[str, str]):
    results = []
    for rec in records:
        raw = preds.get(rec["qid"], "")
        try:
            moments = parse_moments(raw, float(rec["duration_s"])).moments
        except Unrecoverable:
            moments = ()
        results.append(QueryResult(rec["qid"], moments, tuple(tuple(m) for m in rec["moments"])))
    return evaluate(results)


def run_sweep(
    records,
    sweep: SweepConfig,
    predictions_dir,
    base: PipelineConfig | None = None,
    workers: int = 1,
    skipped: list | None = None,
) -> list[dict]:
    """One metric row per grid point with predictions.

    Points without a predictions file are skipped; pass ``skipped`` to collect
    a :class:`MissingPredictions` for each of them.
    """
    base = base or PipelineConfig()
    rows = []
    for point in sweep.points():
        pred_path = Path(predictions_dir) / f"{point.point_id}.jsonl"
        if not pred_path.exists():
            log.warning("missing predictions for %s, skipped", point.point_id)
            if skipped is not None:
                skipped.append(MissingPredictions(str(pred_path)))
            continue
        cfg = point.config(base, sweep.seed)
        ratios = []
        for row, _ in map_records(records, cfg, workers):
            if row["status"] == "ok":
                ratios.append(float(row["ratio"]))
            else:
                log.error("%s %s: %s", point.point_id, row["qid"], row["status"])
        report = score_predictions(records, load_predictions(pred_path))
        rows.append(
            {
                "N": point.n_frames,
                "k": point.k,
                "rho": point.rho,
                "L": point.audio_length,
                "strategy": point.strategy,
                "R1@0.5": report.r1[0.5],
                "R1@0.7": report.r1[0.7],
                "mAP@0.5": report.map[0.5],
                "mAP@0.75": report.map[0.75],
                "mIoU": report.miou,
                "ratio": float(np.mean(ratios)) if ratios else float("nan"),
            }
        )
    return rows


def _cell(column: str, value) -> str:
    if column in ("N", "k", "L", "strategy"):
        return str(value)
    if column == "rho":
        return f"{value:g}"
    return f"{value:.6f}"


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([_cell(c, r[c]) for c in CSV_HEADER])
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[dict]:
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        row = dict(r)
        for c in CSV_HEADER:
            if c in ("N", "k", "L"):
                row[c] = int(row[c])
            elif c != "strategy":
                row[c] = float(row[c])
        rows.append(row)
    return rows


def write_stub_predictions(records, sweep: SweepConfig, out_dir, mode: str = "echo", jitter: float = 0.0) -> list[Path]:
    """Stub model output for every grid point, in the prediction batch format."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if mode == "echo":
        lines = [json.dumps({"qid": r["qid"], "raw": echo_prediction(r)}) for r in records]
    elif mode == "jitter":
        lines = [json.dumps({"qid": r["qid"], "raw": jitter_prediction(r, jitter, sweep.seed)}) for r in records]
    else:
        raise ValueError(f"unknown stub mode {mode!r}")
    text = "".join(line + "\n" for line in lines)
    paths = []
    for point in sweep.points():
        p = out / f"{point.point_id}.jsonl"
        p.write_text(text, encoding="utf-8", newline="\n")
        paths.append(p)
    return paths
