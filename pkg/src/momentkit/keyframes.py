"""Motion-magnitude scoring and keyframe selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .features import VideoFeatures

if TYPE_CHECKING:
    from .shots import ShotList

DEFAULT_SIGMA = 1.0


class InvalidK(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MotionSeries:
    raw: np.ndarray
    smoothed: np.ndarray
    sigma: float

    def __len__(self) -> int:
        return self.raw.shape[0]


@dataclass(frozen=True)
class KeyframeSet:
    indices: tuple[int, ...]
    k_requested: int
    forced: tuple[int, ...] = ()

    def __contains__(self, frame: int) -> bool:
        return frame in self._lookup

    @property
    def _lookup(self) -> frozenset:
        return frozenset(self.indices)

    def __len__(self) -> int:
        return len(self.indices)


def frame_deltas(vf: VideoFeatures) -> np.ndarray:
    """L2 norm of each frame's change from its predecessor; frame 0 gets 0."""
    flat = vf.frame_features.reshape(vf.n_frames, -1).astype(np.float64)
    d = np.zeros(vf.n_frames, dtype=np.float64)
    if vf.n_frames > 1:
        d[1:] = np.linalg.norm(np.diff(flat, axis=0), axis=1)
    return d


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized taps ``exp(-j^2 / 2 sigma^2)`` for ``|j| <= ceil(3 sigma)``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.ones(1)
    radius = math.ceil(3.0 * sigma)
    j = np.arange(-radius, radius + 1, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        w = np.exp(-(j**2) / (2.0 * sigma**2))
    # subnormal sigma: every off-centre tap underflows
    w[~np.isfinite(w)] = 0.0
    w[radius] = 1.0
    return w / w.sum()


def convolve_reflect(d, kernel) -> np.ndarray:
    """Centered convolution of ``d`` with an odd-length kernel.

    Out-of-range samples mirror the signal including the edge sample
    (``c b a | a b c | c b a``), repeating as needed for short signals.
    """
    d = np.asarray(d, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 1 or kernel.size % 2 != 1:
        raise ValueError("kernel must be 1-D with odd length")
    if d.size == 0:
        return d.copy()
    radius = kernel.size // 2
    padded = np.pad(d, radius, mode="symmetric")
    # kernel is symmetric for the Gaussian case, but flip for a true convolution
    return np.convolve(padded, kernel[::-1], mode="valid")


def gaussian_smooth(d, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if sigma == 0:
        return d.copy()
    return convolve_reflect(d, gaussian_kernel(sigma))


def motion_series(vf: VideoFeatures, sigma: float = DEFAULT_SIGMA) -> MotionSeries:
    raw = frame_deltas(vf)
    return MotionSeries(raw=raw, smoothed=gaussian_smooth(raw, sigma), sigma=float(sigma))


def _rank_desc(values: np.ndarray) -> np.ndarray:
    # stable sort on the negated score: equal scores keep ascending index order
    return np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")


def _per_shot_quota(shots: "ShotList", k: int) -> list[int]:
    lengths = np.array([len(s) for s in shots.spans], dtype=np.float64)
    share = k * lengths / lengths.sum()
    quota = np.floor(share).astype(int)
    leftover = k - int(quota.sum())
    for i in _rank_desc(share - quota)[:leftover]:
        quota[i] += 1
    return [min(int(q), len(s)) for q, s in zip(quota, shots.spans)]


def select_keyframes(series: MotionSeries, shots: "ShotList", k: int, per_shot: bool = False) -> KeyframeSet:
    """Top-``k`` frames by smoothed motion, plus one anchor per uncovered shot.

    Ties go to the smaller frame index. Anchors are added on top of the
    top-``k`` picks, so the result may hold more than ``k`` frames. With
    ``per_shot`` the budget is split across shots in proportion to their
    length instead of ranked globally.
    """
    score = np.asarray(series.smoothed, dtype=np.float64)
    n = score.shape[0]
    if not (1 <= k <= n):
        raise InvalidK(f"k must be in [1, {n}], got {k}")

    if per_shot:
        chosen: set[int] = set()
        for span, quota in zip(shots.spans, _per_shot_quota(shots, k)):
            local = score[span.first_frame : span.last_frame + 1]
            chosen.update(int(span.first_frame + i) for i in _rank_desc(local)[:quota])
    else:
        chosen = {int(i) for i in _rank_desc(score)[:k]}

    forced = []
    for span in shots.spans:
        if not any(span.first_frame <= f <= span.last_frame for f in chosen):
            local = score[span.first_frame : span.last_frame + 1]
            forced.append(span.first_frame + int(np.argmax(local)))
    chosen.update(forced)
    return KeyframeSet(indices=tuple(sorted(chosen)), k_requested=k, forced=tuple(forced))
