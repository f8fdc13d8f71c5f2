"""Parsing and repair of nested-list timestamp outputs like ``[[s1, e1], [s2, e2]]``.

Repair mode applies these rules, in order, and records the tag of each rule
that changed something:

1. ``extract-numbers``  bracket structure unusable: pair up every numeric literal
2. ``append-brackets``  output truncated: close the open brackets
3. ``drop-incomplete``  discard a trailing half-written pair
4. ``swap``             start > end
5. ``clamp``            clip to ``[0, duration]``
6. ``dedup``            drop repeated identical pairs
7. ``sort``             order by start (stable)
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .features import Moment

EXTRACT = "extract-numbers"
APPEND = "append-brackets"
DROP = "drop-incomplete"
SWAP = "swap"
CLAMP = "clamp"
DEDUP = "dedup"
SORT = "sort"
REPAIR_ORDER = (EXTRACT, APPEND, DROP, SWAP, CLAMP, DEDUP, SORT)

_NUMBER = r"-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN_RE = re.compile(rf"\s*(?:(?P<num>{_NUMBER})|(?P<punct>[\[\],]))")
# a leading minus only counts when it is not glued to a preceding word ("10-20")
_LOOSE_NUMBER_RE = re.compile(rf"(?<![\w.]){_NUMBER}")


class ParseError(ValueError):
    pass


class Unrecoverable(ValueError):
    pass


@dataclass(frozen=True)
class MomentList:
    moments: tuple[Moment, ...] = ()
    repairs_applied: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.moments)

    def __iter__(self):
        return iter(self.moments)

    def as_lists(self) -> list[list[float]]:
        return [m.as_list() for m in self.moments]


def _tokenize(text: str):
    """Yield ``(kind, value)`` tokens; returns ``None`` on foreign characters."""
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            return None
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num"))))
        else:
            tokens.append((m.group("punct"), None))
        pos = m.end()
    return tokens


# states of the list grammar recognizer
_START, _OPEN, _P_OPEN, _P_NUM1, _P_COMMA, _P_NUM2, _AFTER_PAIR, _BETWEEN, _DONE = range(9)


def _run_grammar(tokens):
    """Feed tokens through the grammar.

    Returns ``(pairs, state, ok)``: ``ok`` is False on the first token the
    grammar rejects. ``pairs`` holds every fully closed pair seen.
    """
    state = _START
    pairs: list[tuple[float, float]] = []
    first = second = 0.0
    for kind, value in tokens:
        if state == _START and kind == "[":
            state = _OPEN
        elif state == _OPEN and kind == "[":
            state = _P_OPEN
        elif state == _OPEN and kind == "]" and not pairs:
            state = _DONE
        elif state == _P_OPEN and kind == "num":
            first, state = value, _P_NUM1
        elif state == _P_NUM1 and kind == ",":
            state = _P_COMMA
        elif state == _P_COMMA and kind == "num":
            second, state = value, _P_NUM2
        elif state == _P_NUM2 and kind == "]":
            pairs.append((first, second))
            state = _AFTER_PAIR
        elif state == _AFTER_PAIR and kind == ",":
            state = _BETWEEN
        elif state == _AFTER_PAIR and kind == "]":
            state = _DONE
        elif state == _BETWEEN and kind == "[":
            state = _P_OPEN
        else:
            return pairs, state, False
    return pairs, state, True


def _pending_pair(tokens, state):
    if state == _P_NUM2:
        # both numbers present, only the closing bracket is missing
        return (tokens[-3][1], tokens[-1][1])
    return None


def _normalize_pairs(pairs, duration_s: float, repairs: list[str]) -> tuple[Moment, ...]:
    swapped = [(min(s, e), max(s, e)) for s, e in pairs]
    if any(p != q for p, q in zip(pairs, swapped)):
        repairs.append(SWAP)

    def clip(x):
        return min(max(x, 0.0), duration_s)

    clamped = [(clip(s), clip(e)) for s, e in swapped]
    if clamped != swapped:
        repairs.append(CLAMP)

    seen = set()
    unique = []
    for p in clamped:
        if p not in seen:
            seen.add(p)
            unique.append(p)
    if len(unique) != len(clamped):
        repairs.append(DEDUP)

    ordered = sorted(unique, key=lambda p: p[0])
    if ordered != unique:
        repairs.append(SORT)
    return tuple(Moment(float(s), float(e)) for s, e in ordered)


def _strict(text: str, duration_s: float) -> MomentList:
    tokens = _tokenize(text)
    if tokens is None:
        raise ParseError("unexpected character outside the list grammar")
    pairs, state, ok = _run_grammar(tokens)
    if not ok or state != _DONE:
        raise ParseError("input is not a complete nested list of [start, end] pairs")
    moments = []
    for i, (s, e) in enumerate(pairs):
        if not (math.isfinite(s) and math.isfinite(e)) or not (0.0 <= s <= e <= duration_s):
            raise ParseError(f"pair {i} [{s}, {e}] is not a moment within [0, {duration_s}]")
        moments.append(Moment(s, e))
    return MomentList(tuple(moments))


def parse_moments(text, duration_s: float, strict: bool = False) -> MomentList:
    """Parse a model answer into moments.

    Strict mode accepts only the exact grammar with in-range, ordered pairs
    and raises :class:`ParseError` otherwise. Repair mode never raises for
    malformed input except :class:`Unrecoverable` when no numeric pair can
    be recovered.
    """
    if not (duration_s > 0):
        raise ValueError("duration_s must be positive")
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    if strict:
        return _strict(text, duration_s)

    repairs: list[str] = []
    tokens = _tokenize(text)
    pairs = None
    if tokens is not None:
        got, state, ok = _run_grammar(tokens)
        if ok and state == _DONE:
            pairs = got
        elif ok and state != _START:
            # well-formed but cut short
            pending = _pending_pair(tokens, state)
            if pending is not None:
                got.append(pending)
            elif state in (_P_OPEN, _P_NUM1, _P_COMMA, _BETWEEN):
                repairs.append(DROP)
            repairs.insert(0, APPEND)
            pairs = got
    if pairs is None:
        repairs = [EXTRACT]
        numbers = [float(m.group(0)) for m in _LOOSE_NUMBER_RE.finditer(text)]
        if len(numbers) % 2:
            numbers.pop()
            repairs.append(DROP)
        pairs = list(zip(numbers[::2], numbers[1::2]))
    if not pairs and repairs:
        raise Unrecoverable("no numeric [start, end] pair found")

    moments = _normalize_pairs(pairs, float(duration_s), repairs)
    return MomentList(moments, tuple(repairs))


def normalize_moments(ml, duration_s: float) -> MomentList:
    """Swap, clamp, dedup and sort; accepts a MomentList or raw ``(s, e)`` pairs."""
    if isinstance(ml, MomentList):
        pairs = [(m.start_s, m.end_s) for m in ml.moments]
        prior = list(ml.repairs_applied)
    else:
        pairs = [(float(s), float(e)) for s, e in ml]
        prior = []
    repairs: list[str] = []
    moments = _normalize_pairs(pairs, float(duration_s), repairs)
    return MomentList(moments, tuple(prior + [r for r in repairs if r not in prior]))


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def render_moments(ml) -> str:
    moments = ml.moments if isinstance(ml, MomentList) else ml
    return "[" + ", ".join(f"[{_fmt(m.start_s)}, {_fmt(m.end_s)}]" for m in moments) + "]"


def parse_record(record: dict, duration_s: float) -> dict:
    """One prediction-batch record ``{"qid", "raw"}`` to ``{"qid", "moments", "repairs"}``."""
    out = {"qid": record["qid"]}
    try:
        ml = parse_moments(record.get("raw", ""), duration_s)
    except Unrecoverable as exc:
        out.update(moments=[], repairs=[], error=f"Unrecoverable: {exc}")
        return out
    out.update(moments=ml.as_lists(), repairs=list(ml.repairs_applied))
    return out


def parse_batch(lines, durations: dict[str, float] | None = None):
    """Parse JSON Lines prediction records.

    A record's duration comes from its own ``duration_s`` field or from
    ``durations[qid]``.
    """
    durations = durations or {}
    for line in lines:
        if not line.strip():
            continue
        record = json.loads(line)
        duration = record.get("duration_s", durations.get(record["qid"]))
        if duration is None:
            raise KeyError(f"no duration known for qid {record['qid']!r}")
        yield parse_record(record, float(duration))
