"""Average pooling of audio token streams to a target length."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import AudioFeatures, FeatureTensor, StreamKind

DEFAULT_AUDIO_LENGTH = 150


class InvalidL(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PooledAudio:
    tokens: FeatureTensor
    bin_map: tuple[tuple[int, int], ...]
    stream_kind: StreamKind = StreamKind.MIXED

    @property
    def length(self) -> int:
        return self.tokens.shape[0]


def bin_edges(n_items: int, n_bins: int) -> np.ndarray:
    """Edges ``floor(b * n_items / n_bins)`` for ``b = 0..n_bins``."""
    b = np.arange(n_bins + 1, dtype=np.int64)
    return (b * n_items) // n_bins


def pool_audio(a: AudioFeatures, L: int = DEFAULT_AUDIO_LENGTH) -> PooledAudio:
    if L < 1:
        raise InvalidL(f"L must be >= 1, got {L}")
    tokens = a.tokens
    t = tokens.shape[0]
    if t <= L:
        return PooledAudio(FeatureTensor(tokens), tuple((i, i + 1) for i in range(t)), a.stream_kind)
    edges = bin_edges(t, L)
    sums = np.add.reduceat(tokens.astype(np.float64), edges[:-1], axis=0)
    means = sums / np.diff(edges)[:, None]
    bins = tuple((int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]))
    return PooledAudio(FeatureTensor(means.astype(np.float32)), bins, a.stream_kind)


def pool_dual(voice: AudioFeatures, ambient: AudioFeatures, L: int = DEFAULT_AUDIO_LENGTH) -> tuple[PooledAudio, PooledAudio]:
    """Pool pre-separated voice and ambient streams, each to ``ceil(L / 2)``."""
    if L < 1:
        raise InvalidL(f"L must be >= 1, got {L}")
    if voice.stream_kind is not StreamKind.VOICE or ambient.stream_kind is not StreamKind.AMBIENT:
        raise ValueError("pool_dual expects a voice stream and an ambient stream")
    half = math.ceil(L / 2)
    return pool_audio(voice, half), pool_audio(ambient, half)
