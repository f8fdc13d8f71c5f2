"""Manifest ingestion and the per-record compression/assembly pipeline."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .audio import DEFAULT_AUDIO_LENGTH, PooledAudio, pool_audio, pool_dual
from .features import AudioFeatures, StreamKind, VideoFeatures, validate_video_features
from .keyframes import DEFAULT_SIGMA, motion_series, select_keyframes
from .sequence import PromptSequence, Strategy, assemble, serialize_sequence
from .shots import ShotDetectConfig, ShotList, detect_shots, import_shots, read_boundary_file
from .stc import DEFAULT_RHO, CompressedVisual, compress, compression_report, plan_variance
from .tensorio import read_tensor, write_tensor

log = logging.getLogger(__name__)


class InvalidN(ValueError):
    pass


class ManifestError(ValueError):
    pass


def sample_frames(n_available: int, n: int, mode: str = "uniform", seed: int = 0) -> list[int]:
    if not (1 <= n <= n_available):
        raise InvalidN(f"cannot sample {n} of {n_available} frames")
    if mode == "uniform":
        return [(i * n_available) // n for i in range(n)]
    if mode == "seeded_random":
        rng = np.random.default_rng(seed)
        return sorted(int(i) for i in rng.choice(n_available, size=n, replace=False))
    raise ValueError(f"unknown sampling mode {mode!r}")


_MANIFEST_KEYS = {
    "qid", "video_id", "duration_s", "query", "moments", "visual_path", "audio_path",
    "voice_path", "ambient_path", "shots_path", "shots_inline", "frame_timestamps",
}


def load_manifest(path) -> list[dict]:
    """Read a JSON Lines manifest; relative paths resolve against its directory."""
    path = Path(path)
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = {"qid", "video_id", "duration_s", "query", "moments", "visual_path"} - rec.keys()
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            unknown = rec.keys() - _MANIFEST_KEYS
            if unknown:
                log.warning("%s:%d: ignoring unknown fields %s", path, lineno, sorted(unknown))
            if rec["qid"] in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate qid {rec['qid']!r}")
            seen.add(rec["qid"])
            rec["_base"] = str(path.parent)
            records.append(rec)
    return records


def _resolve(rec: dict, key: str) -> Path | None:
    value = rec.get(key)
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else Path(rec.get("_base", ".")) / p


@dataclass(frozen=True)
class PipelineConfig:
    n_frames: int | None = None  # None: use every available frame
    sampling: str = "uniform"
    seed: int = 0
    stc: bool = True
    sigma: float = DEFAULT_SIGMA
    k: int = 32
    per_shot_quota: bool = False
    rho: float = DEFAULT_RHO
    variance_aggregate: str = "mean"
    audio_length: int = DEFAULT_AUDIO_LENGTH  # 0 disables audio
    strategy: str = Strategy.OVERALL.value
    time_style: str = "int_seconds"
    prompt: str | None = None
    shot_detect: ShotDetectConfig = field(default_factory=ShotDetectConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if "shot_detect" in d and isinstance(d["shot_detect"], dict):
            d["shot_detect"] = ShotDetectConfig(**d["shot_detect"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pipeline settings {sorted(unknown)}")
        return cls(**d)


def load_video(rec: dict, cfg: PipelineConfig) -> VideoFeatures:
    feats = read_tensor(_resolve(rec, "visual_path")).data
    if feats.ndim != 3:
        raise ManifestError(f"{rec['qid']}: visual tensor must be [frames, Q, D], got {feats.shape}")
    n_avail = feats.shape[0]
    duration = float(rec["duration_s"])
    if rec.get("frame_timestamps") is not None:
        ts = np.asarray(rec["frame_timestamps"], dtype=np.float64)
    else:
        ts = np.arange(n_avail, dtype=np.float64) * (duration / n_avail)
    n = n_avail if cfg.n_frames is None else cfg.n_frames
    idx = sample_frames(n_avail, n, cfg.sampling, cfg.seed)
    vf = VideoFeatures(rec["video_id"], feats[idx], ts[idx], duration)
    validate_video_features(vf)
    return vf


def _load_audio(rec: dict, key: str, kind: StreamKind) -> AudioFeatures | None:
    path = _resolve(rec, key)
    if path is None:
        return None
    return AudioFeatures(rec["video_id"], read_tensor(path).data, kind)


def load_audio(rec: dict, cfg: PipelineConfig):
    if cfg.audio_length == 0:
        return None
    if Strategy(cfg.strategy) is Strategy.DUAL_STREAM:
        voice = _load_audio(rec, "voice_path", StreamKind.VOICE)
        ambient = _load_audio(rec, "ambient_path", StreamKind.AMBIENT)
        if voice is None and ambient is None:
            return None
        empty = np.zeros((0, 0), dtype=np.float32)
        if voice is None:
            voice = AudioFeatures(rec["video_id"], empty, StreamKind.VOICE)
        if ambient is None:
            ambient = AudioFeatures(rec["video_id"], empty, StreamKind.AMBIENT)
        return voice, ambient
    return _load_audio(rec, "audio_path", StreamKind.MIXED)


def record_shots(rec: dict, vf: VideoFeatures, cfg: PipelineConfig) -> ShotList:
    # imported boundaries are sampled-frame indices
    if rec.get("shots_inline") is not None:
        return import_shots(rec["shots_inline"], vf.n_frames)
    path = _resolve(rec, "shots_path")
    if path is not None:
        return import_shots(read_boundary_file(path), vf.n_frames)
    return detect_shots(vf, cfg.shot_detect)


@dataclass(frozen=True, eq=False)
class VideoResult:
    shots: ShotList
    compressed: CompressedVisual
    audio: PooledAudio | tuple[PooledAudio, PooledAudio] | None
    sequence: PromptSequence

    @property
    def audio_count(self) -> int:
        if self.audio is None:
            return 0
        if isinstance(self.audio, tuple):
            return sum(a.length for a in self.audio)
        return self.audio.length


def process_video(
    vf: VideoFeatures,
    shots: ShotList,
    audio,
    query: str,
    cfg: PipelineConfig,
) -> VideoResult:
    """Keyframes, variance plan, compression, audio pooling and assembly.

    ``cfg.k`` is capped at the frame count. With ``cfg.stc`` off every frame
    is a keyframe, so nothing is discarded.
    """
    series = motion_series(vf, cfg.sigma)
    if cfg.stc:
        k, rho = min(cfg.k, vf.n_frames), cfg.rho
    else:
        k, rho = vf.n_frames, 1.0
    keyframes = select_keyframes(series, shots, k, per_shot=cfg.per_shot_quota)
    plan = plan_variance(vf, shots, rho, cfg.variance_aggregate)
    cv = compress(vf, keyframes, plan)

    pooled = None
    if audio is not None and cfg.audio_length > 0:
        if isinstance(audio, tuple):
            pooled = pool_dual(audio[0], audio[1], cfg.audio_length)
        else:
            pooled = pool_audio(audio, cfg.audio_length)
    seq = assemble(cv, pooled, vf, query, cfg.prompt, cfg.strategy, cfg.time_style)
    return VideoResult(shots, cv, pooled, seq)


REPORT_FIELDS = [
    "qid", "video_id", "status", "n_frames", "n_positions", "n_shots", "n_keyframes",
    "S_v", "uncompressed", "ratio", "S_a", "seq_len",
]


def process_record(rec: dict, cfg: PipelineConfig) -> tuple[dict, str | None]:
    """Run one manifest record; failures come back as a report row, not an exception."""
    row = {k: "" for k in REPORT_FIELDS}
    row.update(qid=rec["qid"], video_id=rec["video_id"])
    try:
        vf = load_video(rec, cfg)
        shots = record_shots(rec, vf, cfg)
        res = process_video(vf, shots, load_audio(rec, cfg), rec["query"], cfg)
    except Exception as exc:  # noqa: BLE001 - per-record failures are reported, the run continues
        row["status"] = f"error: {type(exc).__name__}: {exc}"
        return row, None
    rep = compression_report(res.compressed.selection)
    row.update(
        status="ok",
        n_frames=vf.n_frames,
        n_positions=vf.n_positions,
        n_shots=len(shots),
        n_keyframes=len(res.compressed.keyframes),
        S_v=rep.retained,
        uncompressed=rep.uncompressed,
        ratio=f"{rep.ratio:.6f}",
        S_a=res.audio_count,
        seq_len=len(res.sequence),
    )
    return row, serialize_sequence(res.sequence)


def _process_star(args):
    return process_record(*args)


def map_records(records, cfg: PipelineConfig, workers: int = 1):
    """Yield ``process_record`` results in manifest order."""
    if workers <= 1:
        for rec in records:
            yield process_record(rec, cfg)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_process_star, [(r, cfg) for r in records], chunksize=8)


def reports_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_pipeline(records, cfg: PipelineConfig, out_dir, workers: int = 1) -> list[dict]:
    """Write ``sequences/<qid>.txt`` and ``reports.csv``; return report rows."""
    out = Path(out_dir)
    (out / "sequences").mkdir(parents=True, exist_ok=True)
    rows = []
    for row, text in map_records(records, cfg, workers):
        rows.append(row)
        if text is not None:
            with open(out / "sequences" / f"{row['qid']}.txt", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            log.error("record %s failed: %s", row["qid"], row["status"])
    (out / "reports.csv").write_text(reports_csv(rows), encoding="utf-8", newline="\n")
    return rows


def with_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def save_compressed(res: VideoResult, out_dir, video_id: str) -> tuple[Path, Path]:
    """Compressed tokens as STCF plus a JSON sidecar describing the selection."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cv = res.compressed
    tensor_path = out / f"{video_id}.tokens.stcf"
    write_tensor(cv.tokens, tensor_path)
    mask = cv.selection.mask
    sidecar = {
        "video_id": video_id,
        "n_frames": int(mask.shape[0]),
        "n_positions": int(mask.shape[1]),
        "shots": [[s.first_frame, s.last_frame] for s in res.shots.spans],
        "shot_source": res.shots.source.value,
        "keyframes": list(cv.keyframes.indices),
        "forced_keyframes": list(cv.keyframes.forced),
        "rho": cv.plan.rho,
        "retained_positions": [list(p.retained_positions) for p in cv.plan.per_shot],
        "tokens": cv.selection.provenance.tolist(),
    }
    sidecar_path = out / f"{video_id}.selection.json"
    sidecar_path.write_text(json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8", newline="\n")
    return tensor_path, sidecar_path
