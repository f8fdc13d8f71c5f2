"""Multimodal prompt-sequence assembly and its line-oriented text format.

Layout of the default ("overall") strategy::

    TIME t_1, VIS.., TIME t_2, VIS.., ..., SEP V_E, AUD.., SEP A_E, QUERY, PROMPT
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from importlib import resources
from typing import Union

import numpy as np

from .audio import PooledAudio, bin_edges
from .features import StreamKind, VideoFeatures
from .stc import CompressedVisual


class AssemblyError(ValueError):
    pass


class EmptyVisual(AssemblyError):
    pass


class EmptyQuery(AssemblyError):
    pass


class NegativeTime(ValueError):
    pass


class SequenceFormatError(ValueError):
    pass


class Strategy(str, Enum):
    OVERALL = "overall"
    INTERLEAVED = "interleaved"
    DUAL_STREAM = "dual_stream"


class TimeStyle(str, Enum):
    INT_SECONDS = "int_seconds"
    TWO_DECIMALS = "two_decimals"


@dataclass(frozen=True)
class Time:
    # the rendered token; the numeric value is derived from it so that the
    # text format round-trips exactly
    text: str
    frame: int = field(default=-1, compare=False)

    @property
    def seconds(self) -> float:
        return float(self.text)


@dataclass(frozen=True)
class Visual:
    frame: int
    position: int


@dataclass(frozen=True)
class Audio:
    stream: StreamKind
    index: int


@dataclass(frozen=True)
class SepVisualEnd:
    pass


@dataclass(frozen=True)
class SepAudioEnd:
    pass


@dataclass(frozen=True)
class QueryText:
    text: str


@dataclass(frozen=True)
class PromptText:
    text: str


SequenceElement = Union[Time, Visual, Audio, SepVisualEnd, SepAudioEnd, QueryText, PromptText]


@dataclass(frozen=True)
class SequenceStats:
    n_time: int
    n_visual: int
    n_audio: int
    total_len: int


@dataclass(frozen=True)
class PromptSequence:
    elements: tuple[SequenceElement, ...]
    # strategy is not recoverable from the text form when audio is absent
    strategy: Strategy = field(default=Strategy.OVERALL, compare=False)

    @property
    def stats(self) -> SequenceStats:
        n_time = sum(isinstance(e, Time) for e in self.elements)
        n_vis = sum(isinstance(e, Visual) for e in self.elements)
        n_aud = sum(isinstance(e, Audio) for e in self.elements)
        return SequenceStats(n_time, n_vis, n_aud, len(self.elements))

    def __len__(self) -> int:
        return len(self.elements)


def default_prompt() -> str:
    return resources.files("momentkit").joinpath("data/default_prompt.txt").read_text(encoding="utf-8").strip()


def format_time_token(seconds: float, style: TimeStyle | str = TimeStyle.INT_SECONDS) -> str:
    if seconds < 0:
        raise NegativeTime(f"negative time {seconds}")
    quantum = Decimal(1) if TimeStyle(style) is TimeStyle.INT_SECONDS else Decimal("0.01")
    return str(Decimal(repr(float(seconds))).quantize(quantum, rounding=ROUND_HALF_UP))


def _audio_elements(pooled: PooledAudio | None, lo: int = 0, hi: int | None = None) -> list[Audio]:
    if pooled is None:
        return []
    hi = pooled.length if hi is None else hi
    return [Audio(pooled.stream_kind, i) for i in range(lo, hi)]


def assemble(
    cv: CompressedVisual,
    audio: PooledAudio | tuple[PooledAudio | None, PooledAudio | None] | None,
    vf: VideoFeatures,
    query: str,
    prompt: str | None = None,
    strategy: Strategy | str = Strategy.OVERALL,
    time_style: TimeStyle | str = TimeStyle.INT_SECONDS,
) -> PromptSequence:
    """Lay out time, visual and audio elements followed by the query and prompt.

    ``audio`` is a single pooled stream for ``overall`` and ``interleaved``,
    a ``(voice, ambient)`` pair for ``dual_stream``, or ``None`` when the
    video has no audio.
    """
    strategy = Strategy(strategy)
    if cv.selection.retained_count == 0:
        raise EmptyVisual("compressed visual stream is empty")
    if not query or not query.strip():
        raise EmptyQuery("query text is empty")
    prompt = default_prompt() if prompt is None else prompt

    if strategy is Strategy.DUAL_STREAM:
        if isinstance(audio, PooledAudio):
            raise AssemblyError("dual_stream expects a (voice, ambient) pair")
        voice, ambient = audio if audio is not None else (None, None)
        single = None
    else:
        if isinstance(audio, tuple):
            raise AssemblyError(f"{strategy.value} expects a single pooled audio stream")
        single = audio

    mask = cv.selection.mask
    frames = [int(f) for f in np.flatnonzero(mask.any(axis=1))]
    ts = vf.frame_timestamps_s

    elements: list[SequenceElement] = []
    if strategy is Strategy.INTERLEAVED:
        n_audio = single.length if single is not None else 0
        edges = bin_edges(n_audio, len(frames))
    for i, f in enumerate(frames):
        elements.append(Time(format_time_token(float(ts[f]), time_style), f))
        elements.extend(Visual(f, int(q)) for q in np.flatnonzero(mask[f]))
        if strategy is Strategy.INTERLEAVED:
            elements.extend(_audio_elements(single, int(edges[i]), int(edges[i + 1])))
    elements.append(SepVisualEnd())
    if strategy is Strategy.OVERALL:
        elements.extend(_audio_elements(single))
    elif strategy is Strategy.DUAL_STREAM:
        elements.extend(_audio_elements(voice))
        elements.extend(_audio_elements(ambient))
    elements.append(SepAudioEnd())
    elements.append(QueryText(query))
    elements.append(PromptText(prompt))
    return PromptSequence(tuple(elements), strategy)


def check_sequence(ps: PromptSequence) -> None:
    """Raise :class:`SequenceFormatError` if separator/order invariants fail."""
    el = ps.elements
    sep_v = [i for i, e in enumerate(el) if isinstance(e, SepVisualEnd)]
    sep_a = [i for i, e in enumerate(el) if isinstance(e, SepAudioEnd)]
    if len(sep_v) != 1 or len(sep_a) != 1:
        raise SequenceFormatError("expected exactly one SEP V_E and one SEP A_E")
    if sep_v[0] > sep_a[0]:
        raise SequenceFormatError("SEP V_E must precede SEP A_E")
    if len(el) < 2 or not isinstance(el[-2], QueryText) or not isinstance(el[-1], PromptText):
        raise SequenceFormatError("sequence must end with QUERY then PROMPT")
    if any(isinstance(e, (QueryText, PromptText)) for e in el[:-2]):
        raise SequenceFormatError("QUERY/PROMPT may only appear at the end")
    for i, e in enumerate(el):
        if isinstance(e, Time):
            nxt = el[i + 1] if i + 1 < len(el) else None
            if not isinstance(nxt, Visual) or (e.frame >= 0 and nxt.frame != e.frame):
                raise SequenceFormatError(f"TIME at {i} is not followed by a visual token of its frame")
        if isinstance(e, Visual) and i > sep_v[0]:
            raise SequenceFormatError(f"visual token at {i} after SEP V_E")
        if isinstance(e, Audio) and i > sep_a[0]:
            raise SequenceFormatError(f"audio token at {i} after SEP A_E")


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"n": "\n", "r": "\r", "\\": "\\"}.get(nxt, "\\" + nxt))
            i += 2
            continue
        out.append(c)
        i += 1
    return "".join(out)


def serialize_sequence(ps: PromptSequence) -> str:
    lines = []
    for e in ps.elements:
        if isinstance(e, Time):
            lines.append(f"TIME {e.text}")
        elif isinstance(e, Visual):
            lines.append(f"VIS {e.frame} {e.position}")
        elif isinstance(e, Audio):
            lines.append(f"AUD {e.stream.value} {e.index}")
        elif isinstance(e, SepVisualEnd):
            lines.append("SEP V_E")
        elif isinstance(e, SepAudioEnd):
            lines.append("SEP A_E")
        elif isinstance(e, QueryText):
            lines.append(f"QUERY {_escape(e.text)}")
        elif isinstance(e, PromptText):
            lines.append(f"PROMPT {_escape(e.text)}")
        else:
            raise TypeError(f"unknown sequence element {e!r}")
    return "".join(line + "\n" for line in lines)


def _infer_strategy(elements) -> Strategy:
    sep_v = next((i for i, e in enumerate(elements) if isinstance(e, SepVisualEnd)), len(elements))
    if any(isinstance(e, Audio) for e in elements[:sep_v]):
        return Strategy.INTERLEAVED
    if any(isinstance(e, Audio) and e.stream is not StreamKind.MIXED for e in elements):
        return Strategy.DUAL_STREAM
    return Strategy.OVERALL


def parse_sequence(text: str, strategy: Strategy | str | None = None) -> PromptSequence:
    elements: list[SequenceElement] = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pending_time: Time | None = None
    for lineno, line in enumerate(lines, 1):
        tag, _, rest = line.partition(" ")
        try:
            if tag == "TIME":
                float(rest)
                pending_time = Time(rest)
                elements.append(pending_time)
                continue
            if tag == "VIS":
                f, q = rest.split(" ")
                elements.append(Visual(int(f), int(q)))
                if pending_time is not None:
                    elements[-2] = Time(pending_time.text, int(f))
            elif tag == "AUD":
                kind, idx = rest.split(" ")
                elements.append(Audio(StreamKind(kind), int(idx)))
            elif line == "SEP V_E":
                elements.append(SepVisualEnd())
            elif line == "SEP A_E":
                elements.append(SepAudioEnd())
            elif tag == "QUERY":
                elements.append(QueryText(_unescape(rest)))
            elif tag == "PROMPT":
                elements.append(PromptText(_unescape(rest)))
            else:
                raise SequenceFormatError(f"line {lineno}: unknown tag {tag!r}")
        except ValueError as exc:
            if isinstance(exc, SequenceFormatError):
                raise
            raise SequenceFormatError(f"line {lineno}: {exc}") from exc
        pending_time = None
    strategy = _infer_strategy(elements) if strategy is None else Strategy(strategy)
    return PromptSequence(tuple(elements), strategy)
