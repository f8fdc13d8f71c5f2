"""Core numeric and temporal types shared across the toolkit.

Feature arrays are stored as float32; reductions over them are done in
float64 by the modules that consume them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class FeatureError(ValueError):
    """Base class for invalid feature inputs."""


class ShapeMismatch(FeatureError):
    pass


class NonFiniteValue(FeatureError):
    def __init__(self, index: int):
        super().__init__(f"non-finite value at flat index {index}")
        self.index = index


class NonMonotonicTimestamps(FeatureError):
    def __init__(self, index: int):
        super().__init__(f"timestamp {index} does not strictly increase")
        self.index = index


def _frozen(array, dtype=np.float32) -> np.ndarray:
    out = np.ascontiguousarray(array, dtype=dtype)
    if out is array:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureTensor:
    """Dense real32 array with an explicit shape.

    ``data`` is an immutable C-contiguous float32 ndarray; the flat row-major
    view is ``data.ravel()``.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data))

    @classmethod
    def from_flat(cls, shape, flat) -> "FeatureTensor":
        flat = np.asarray(flat, dtype=np.float32).ravel()
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape, dtype=np.int64)) != flat.size:
            raise ShapeMismatch(f"shape {shape} needs {int(np.prod(shape))} values, got {flat.size}")
        return cls(flat.reshape(shape))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> str:
        return "real32"

    def __eq__(self, other):
        if not isinstance(other, FeatureTensor):
            return NotImplemented
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))


class StreamKind(str, Enum):
    MIXED = "mixed"
    VOICE = "voice"
    AMBIENT = "ambient"


@dataclass(frozen=True, eq=False)
class VideoFeatures:
    """Per-frame query tokens of one video, shape ``[N, Q, D]``."""

    video_id: str
    frame_features: np.ndarray
    frame_timestamps_s: np.ndarray
    duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "frame_features", _frozen(self.frame_features))
        object.__setattr__(self, "frame_timestamps_s", _frozen(self.frame_timestamps_s, np.float64))
        object.__setattr__(self, "duration_s", float(self.duration_s))

    @property
    def n_frames(self) -> int:
        return self.frame_features.shape[0]

    @property
    def n_positions(self) -> int:
        return self.frame_features.shape[1]

    @property
    def dim(self) -> int:
        return self.frame_features.shape[2]


@dataclass(frozen=True, eq=False)
class AudioFeatures:
    """Audio token stream ``[T, D_a]``; ``T == 0`` means the video is silent."""

    video_id: str
    tokens: np.ndarray
    stream_kind: StreamKind = StreamKind.MIXED

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.float32)
        if tokens.ndim == 1 and tokens.size == 0:
            tokens = tokens.reshape(0, 0)
        if tokens.ndim != 2:
            raise ShapeMismatch(f"audio tokens must be 2-D [T, D_a], got shape {tokens.shape}")
        object.__setattr__(self, "tokens", _frozen(tokens))
        object.__setattr__(self, "stream_kind", StreamKind(self.stream_kind))

    @property
    def length(self) -> int:
        return self.tokens.shape[0]


@dataclass(frozen=True, order=True)
class Moment:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not (0.0 <= self.start_s <= self.end_s):
            raise ValueError(f"invalid moment [{self.start_s}, {self.end_s}]")

    @property
    def length(self) -> float:
        return self.end_s - self.start_s

    def as_list(self) -> list[float]:
        return [self.start_s, self.end_s]


@dataclass(frozen=True)
class ShotSpan:
    first_frame: int
    last_frame: int  # inclusive

    def __post_init__(self):
        if not (0 <= self.first_frame <= self.last_frame):
            raise ValueError(f"invalid shot span [{self.first_frame}, {self.last_frame}]")

    def __len__(self) -> int:
        return self.last_frame - self.first_frame + 1

    @property
    def frames(self) -> range:
        return range(self.first_frame, self.last_frame + 1)


def validate_tensor(t: FeatureTensor) -> None:
    flat = t.data.ravel()
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise NonFiniteValue(int(bad[0]))


def validate_video_features(vf: VideoFeatures) -> None:
    """Raise a :class:`FeatureError` subclass if ``vf`` breaks an invariant."""
    feats = vf.frame_features
    if feats.ndim != 3 or min(feats.shape) < 1:
        raise ShapeMismatch(f"frame features must be [N, Q, D] with positive dims, got {feats.shape}")
    n = feats.shape[0]
    ts = vf.frame_timestamps_s
    if ts.ndim != 1 or ts.shape[0] != n:
        raise ShapeMismatch(f"expected {n} timestamps, got shape {ts.shape}")
    validate_tensor(FeatureTensor(feats))
    if not np.isfinite(ts).all() or ts[0] < 0:
        raise NonMonotonicTimestamps(0)
    steps = np.flatnonzero(np.diff(ts) <= 0)
    if steps.size:
        raise NonMonotonicTimestamps(int(steps[0]) + 1)
    if not (vf.duration_s > 0) or ts[-1] > vf.duration_s:
        raise ShapeMismatch(f"last timestamp {ts[-1]} exceeds duration {vf.duration_s}")
