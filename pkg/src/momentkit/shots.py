"""Shot partitioning: a difference-threshold detector and boundary import."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .features import ShotSpan, VideoFeatures
from .keyframes import frame_deltas, gaussian_smooth


class ShotSource(str, Enum):
    DETECTED = "detected"
    IMPORTED = "imported"


class ShotImportError(ValueError):
    pass


class OutOfRange(ShotImportError):
    pass


class NonMonotonic(ShotImportError):
    pass


@dataclass(frozen=True)
class ShotList:
    spans: tuple[ShotSpan, ...]
    source: ShotSource = ShotSource.DETECTED

    @property
    def n_frames(self) -> int:
        return self.spans[-1].last_frame + 1 if self.spans else 0

    @property
    def boundaries(self) -> list[int]:
        """First frame of every shot after the first."""
        return [s.first_frame for s in self.spans[1:]]

    def shot_index(self) -> np.ndarray:
        """Shot id of every frame."""
        out = np.empty(self.n_frames, dtype=np.int64)
        for i, s in enumerate(self.spans):
            out[s.first_frame : s.last_frame + 1] = i
        return out

    def __len__(self) -> int:
        return len(self.spans)

    def __iter__(self):
        return iter(self.spans)


def spans_from_boundaries(boundaries, n_frames: int) -> tuple[ShotSpan, ...]:
    edges = [0, *boundaries, n_frames]
    return tuple(ShotSpan(a, b - 1) for a, b in zip(edges[:-1], edges[1:]))


def is_partition(shots: ShotList, n_frames: int) -> bool:
    expected = 0
    for s in shots.spans:
        if s.first_frame != expected or s.last_frame < s.first_frame:
            return False
        expected = s.last_frame + 1
    return expected == n_frames


@dataclass(frozen=True)
class ShotDetectConfig:
    # impulses (cuts) are diluted by smoothing; detection runs on the raw deltas by default
    sigma: float = 0.0
    threshold_mode: str = "adaptive"
    fixed_threshold: float = 0.0
    k_sigma: float = 3.0
    min_shot_len: int = 2

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.threshold_mode not in ("adaptive", "fixed"):
            raise ValueError(f"threshold_mode must be 'adaptive' or 'fixed', got {self.threshold_mode!r}")
        if self.min_shot_len < 1:
            raise ValueError("min_shot_len must be positive")


def shot_threshold(score: np.ndarray, cfg: ShotDetectConfig) -> float:
    if cfg.threshold_mode == "fixed":
        return float(cfg.fixed_threshold)
    # population std, so a single frame gives std 0
    return float(score.mean() + cfg.k_sigma * score.std())


def detect_shots(vf: VideoFeatures, cfg: ShotDetectConfig | None = None) -> ShotList:
    """Cut before frames whose smoothed change exceeds the threshold.

    Each maximal run of consecutive supra-threshold frames yields a single cut
    at the run's peak (first frame on ties), so a smoothed spike spread over
    several frames is not split into slivers. Shots shorter than
    ``min_shot_len`` are then merged into the preceding shot.
    """
    cfg = cfg or ShotDetectConfig()
    n = vf.n_frames
    score = gaussian_smooth(frame_deltas(vf), cfg.sigma)
    thr = shot_threshold(score, cfg)
    above = score > thr

    cuts: list[int] = []
    i = 0
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        peak = i + int(np.argmax(score[i : j + 1]))
        if peak >= 1:
            cuts.append(peak)
        i = j + 1

    # merge short shots into their predecessor (the first shot has none, so it
    # absorbs its successor instead)
    merged: list[int] = []
    for c in cuts:
        start = merged[-1] if merged else 0
        if c - start < cfg.min_shot_len:
            if not merged:
                continue
            merged[-1] = c
            continue
        merged.append(c)
    # a short trailing shot is absorbed by the shot before it
    if merged and n - merged[-1] < cfg.min_shot_len:
        merged.pop()
    return ShotList(spans_from_boundaries(merged, n), ShotSource.DETECTED)


def import_shots(boundaries, n_frames: int) -> ShotList:
    boundaries = [int(b) for b in boundaries]
    for pos, b in enumerate(boundaries):
        if not (1 <= b <= n_frames - 1):
            raise OutOfRange(f"boundary {b} at position {pos} not in [1, {n_frames - 1}]")
        if pos and b <= boundaries[pos - 1]:
            raise NonMonotonic(f"boundary {b} at position {pos} does not increase")
    return ShotList(spans_from_boundaries(boundaries, n_frames), ShotSource.IMPORTED)


def read_boundary_file(path) -> list[int]:
    text = Path(path).read_text(encoding="utf-8")
    return [int(line) for line in text.split("\n") if line.strip()]


def write_boundary_file(path, boundaries) -> None:
    Path(path).write_text("".join(f"{int(b)}\n" for b in boundaries), encoding="utf-8", newline="\n")
