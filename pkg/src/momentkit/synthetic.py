"""Synthetic feature videos with planted shots and dynamic query positions.

Each shot is a constant prototype plus isotropic Gaussian noise. Consecutive
prototypes differ by exactly ``cut_magnitude`` in L2 norm over the flattened
``Q x D`` frame. ``noise_sigma`` is the expected L2 norm of a frame's noise
vector, so the per-entry standard deviation is ``noise_sigma / sqrt(Q * D)``.
Planted positions get a quadratic ramp inside each shot, which makes them the
highest-variance positions of every multi-frame shot.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .features import AudioFeatures, Moment, VideoFeatures
from .parsing import render_moments
from .tensorio import write_tensor


@dataclass(frozen=True)
class SyntheticSpec:
    n_videos: int = 4
    n_frames: int = 80
    n_positions: int = 8
    dim: int = 16
    # an int, or an inclusive (lo, hi) range drawn per video
    shots_per_video: int | tuple[int, int] = 3
    noise_sigma: float = 0.0
    cut_magnitude: float = 100.0
    planted_dynamic_positions: tuple[int, ...] = ()
    seed: int = 0
    ramp_amplitude: float = 1.0
    min_generated_shot: int = 4
    audio_tokens: int = 160
    audio_dim: int = 8
    fps: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "planted_dynamic_positions", tuple(int(p) for p in self.planted_dynamic_positions))
        if isinstance(self.shots_per_video, list):
            object.__setattr__(self, "shots_per_video", tuple(self.shots_per_video))
        bad = [p for p in self.planted_dynamic_positions if not 0 <= p < self.n_positions]
        if bad:
            raise ValueError(f"planted positions {bad} outside [0, {self.n_positions})")


@dataclass(frozen=True, eq=False)
class SyntheticVideo:
    video: VideoFeatures
    audio: AudioFeatures
    shots: list[tuple[int, int]]
    keyframes: list[int]
    moment: Moment
    planted_positions: tuple[int, ...] = field(default=())

    @property
    def boundaries(self) -> list[int]:
        return [a for a, _ in self.shots[1:]]


def _shot_lengths(rng, n_frames: int, n_shots: int, min_len: int) -> list[int]:
    min_len = max(1, min(min_len, n_frames // n_shots))
    extra = n_frames - n_shots * min_len
    parts = rng.multinomial(extra, [1.0 / n_shots] * n_shots)
    return [min_len + int(p) for p in parts]


def make_video(spec: SyntheticSpec, index: int) -> SyntheticVideo:
    rng = np.random.default_rng([spec.seed, index])
    n, q, d = spec.n_frames, spec.n_positions, spec.dim
    if isinstance(spec.shots_per_video, tuple):
        lo, hi = spec.shots_per_video
        n_shots = int(rng.integers(lo, hi + 1))
    else:
        n_shots = int(spec.shots_per_video)
    n_shots = max(1, min(n_shots, n))
    lengths = _shot_lengths(rng, n, n_shots, spec.min_generated_shot)

    entry_sigma = spec.noise_sigma / math.sqrt(q * d)
    proto = rng.normal(0.0, 1.0, size=(q, d))
    planted = list(spec.planted_dynamic_positions)
    frames = np.empty((n, q, d), dtype=np.float64)
    shots, keyframes = [], []
    start = 0
    for s, length in enumerate(lengths):
        if s:
            step = rng.normal(size=(q, d))
            proto = proto + spec.cut_magnitude * step / np.linalg.norm(step)
        block = np.broadcast_to(proto, (length, q, d)).copy()
        if planted and length > 1:
            ramp = spec.ramp_amplitude * (np.arange(length) / (length - 1)) ** 2
            block[:, planted, :] += ramp[:, None, None]
        frames[start : start + length] = block
        shots.append((start, start + length - 1))
        # the quadratic ramp changes fastest at the last frame of the shot
        keyframes.append(start + length - 1 if planted and length > 1 else start)
        start += length
    if entry_sigma > 0:
        frames += rng.normal(0.0, entry_sigma, size=frames.shape)

    duration = n / spec.fps
    timestamps = np.arange(n, dtype=np.float64) / spec.fps
    vid = f"synth{index:05d}"
    audio = rng.normal(0.0, 1.0, size=(spec.audio_tokens, spec.audio_dim))
    # ground-truth moment: the time span of one randomly chosen shot
    a, b = shots[int(rng.integers(len(shots)))]
    moment = Moment(float(timestamps[a]), float(min(duration, timestamps[b] + 1.0 / spec.fps)))
    return SyntheticVideo(
        VideoFeatures(vid, frames.astype(np.float32), timestamps, duration),
        AudioFeatures(vid, audio.astype(np.float32)),
        shots,
        keyframes,
        moment,
        tuple(planted),
    )


def gen_synthetic(spec: SyntheticSpec, out_dir) -> list[dict]:
    """Write tensors, ``manifest.jsonl`` and ``truth.json`` under ``out_dir``."""
    out = Path(out_dir)
    (out / "tensors").mkdir(parents=True, exist_ok=True)
    records, truth = [], {}
    for i in range(spec.n_videos):
        sv = make_video(spec, i)
        vid = sv.video.video_id
        visual_path = Path("tensors") / f"{vid}.visual.stcf"
        audio_path = Path("tensors") / f"{vid}.audio.stcf"
        write_tensor(sv.video.frame_features, out / visual_path)
        write_tensor(sv.audio.tokens, out / audio_path)
        records.append(
            {
                "qid": f"q{i:05d}",
                "video_id": vid,
                "duration_s": sv.video.duration_s,
                "query": f"synthetic query {i}",
                "moments": [sv.moment.as_list()],
                "visual_path": visual_path.as_posix(),
                "audio_path": audio_path.as_posix(),
            }
        )
        truth[vid] = {
            "shots": [list(s) for s in sv.shots],
            "boundaries": sv.boundaries,
            "keyframes": sv.keyframes,
            "planted_positions": list(sv.planted_positions),
        }
    with open(out / "manifest.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    spec_dict = asdict(spec)
    (out / "truth.json").write_text(json.dumps({"spec": spec_dict, "videos": truth}, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return records


def echo_prediction(record: dict) -> str:
    moments = [Moment(float(s), float(e)) for s, e in record["moments"]]
    return render_moments(sorted(moments))


def jitter_prediction(record: dict, jitter: float, seed: int = 0) -> str:
    """Shift each ground-truth window by ``jitter * u * length`` (``u`` in [0.5, 1]).

    Direction and ``u`` are fixed by ``(seed, qid)``, so IoU is non-increasing
    in ``jitter`` for every query.
    """
    key = [seed, *record["qid"].encode("utf-8")]
    rng = np.random.default_rng(key)
    duration = float(record["duration_s"])
    out = []
    for s, e in record["moments"]:
        u = rng.uniform(0.5, 1.0)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        shift = sign * jitter * u * (e - s)
        a = min(max(s + shift, 0.0), duration)
        b = min(max(e + shift, 0.0), duration)
        out.append(Moment(round(a, 3), round(b, 3)))
    return render_moments(sorted(out))
