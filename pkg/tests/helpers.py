"""Small constructors shared by the test modules."""

from __future__ import annotations

import numpy as np

from momentkit.features import VideoFeatures


def make_vf(frames, video_id="v", duration=None) -> VideoFeatures:
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim == 2:
        frames = frames[:, None, :]
    n = frames.shape[0]
    ts = np.arange(n, dtype=np.float64)
    return VideoFeatures(video_id, frames, ts, float(duration if duration is not None else n))


def random_partition(rng, n, n_shots):
    n_shots = max(1, min(n_shots, n))
    cuts = sorted(rng.choice(np.arange(1, n), size=n_shots - 1, replace=False).tolist()) if n_shots > 1 else []
    return cuts
