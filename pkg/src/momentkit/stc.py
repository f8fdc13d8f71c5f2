"""Shot-aware token compression (per-shot variance retention).

Keyframes keep every query-position token. Non-keyframes keep only the
``m = ceil(rho * Q)`` positions with the highest temporal variance inside
their shot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FeatureTensor, ShotSpan, VideoFeatures
from .keyframes import KeyframeSet
from .shots import ShotList, is_partition

DEFAULT_RHO = 0.25


class InvalidRho(ValueError):
    pass


class InconsistentInputs(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ShotPlan:
    shot: ShotSpan
    position_variance: np.ndarray
    retained_positions: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.retained_positions)


@dataclass(frozen=True, eq=False)
class VariancePlan:
    per_shot: tuple[ShotPlan, ...]
    rho: float
    n_positions: int


@dataclass(frozen=True, eq=False)
class TokenSelection:
    mask: np.ndarray  # bool [N, Q]

    @property
    def retained_count(self) -> int:
        return int(self.mask.sum())

    @property
    def provenance(self) -> np.ndarray:
        """``(frame, position)`` rows of retained tokens, lexicographic order."""
        return np.argwhere(self.mask)


@dataclass(frozen=True, eq=False)
class CompressedVisual:
    tokens: FeatureTensor
    selection: TokenSelection
    frame_of_token: np.ndarray
    keyframes: KeyframeSet
    plan: VariancePlan

    @property
    def position_of_token(self) -> np.ndarray:
        return self.selection.provenance[:, 1]


def retained_budget(rho: float, n_positions: int) -> int:
    if not (0.0 < rho <= 1.0):
        raise InvalidRho(f"rho must be in (0, 1], got {rho}")
    # guard against rho * Q landing a hair above an integer (0.1 * 30 -> 3.0000000000000004)
    return min(n_positions, math.ceil(round(rho * n_positions, 9)))


def position_variance(block: np.ndarray, aggregate: str = "mean") -> np.ndarray:
    """Temporal variance per query position of a ``[frames, Q, D]`` block.

    Population variance over frames for every feature dimension, reduced over
    ``D`` by the mean (default) or the L2 norm.
    """
    var = block.astype(np.float64).var(axis=0)
    if aggregate == "mean":
        return var.mean(axis=-1)
    if aggregate == "l2":
        return np.linalg.norm(var, axis=-1)
    raise ValueError(f"unknown variance aggregate {aggregate!r}")


def plan_variance(vf: VideoFeatures, shots: ShotList, rho: float = DEFAULT_RHO, aggregate: str = "mean") -> VariancePlan:
    q = vf.n_positions
    m = retained_budget(rho, q)
    if not is_partition(shots, vf.n_frames):
        raise InconsistentInputs(f"shots do not partition {vf.n_frames} frames")
    feats = vf.frame_features
    plans = []
    for span in shots.spans:
        var = position_variance(feats[span.first_frame : span.last_frame + 1], aggregate)
        order = np.argsort(-var, kind="stable")
        plans.append(ShotPlan(span, var, tuple(sorted(int(p) for p in order[:m]))))
    return VariancePlan(tuple(plans), float(rho), q)


def selection_mask(n_frames: int, keyframes: KeyframeSet, plan: VariancePlan) -> np.ndarray:
    mask = np.zeros((n_frames, plan.n_positions), dtype=bool)
    covered = 0
    for sp in plan.per_shot:
        if sp.shot.first_frame != covered:
            raise InconsistentInputs("variance plan shots do not partition the frames")
        mask[sp.shot.first_frame : sp.shot.last_frame + 1, list(sp.retained_positions)] = True
        covered = sp.shot.last_frame + 1
    if covered != n_frames:
        raise InconsistentInputs(f"variance plan covers {covered} frames, video has {n_frames}")
    kf = np.asarray(keyframes.indices, dtype=np.int64)
    if kf.size and (kf.min() < 0 or kf.max() >= n_frames):
        raise InconsistentInputs("keyframe index out of range")
    mask[kf] = True
    return mask


def compress(vf: VideoFeatures, keyframes: KeyframeSet, plan: VariancePlan) -> CompressedVisual:
    if plan.n_positions != vf.n_positions:
        raise InconsistentInputs(f"plan has Q={plan.n_positions}, video has Q={vf.n_positions}")
    mask = selection_mask(vf.n_frames, keyframes, plan)
    mask.setflags(write=False)
    tokens = vf.frame_features[mask]
    frame_of_token = np.nonzero(mask)[0]
    return CompressedVisual(FeatureTensor(tokens), TokenSelection(mask), frame_of_token, keyframes, plan)


def expected_token_count(keyframes: KeyframeSet, plan: VariancePlan) -> int:
    """Closed form ``sum_s K_s * Q + (N_s - K_s) * m`` over shots."""
    kf = np.asarray(keyframes.indices)
    total = 0
    for sp in plan.per_shot:
        k_s = int(((kf >= sp.shot.first_frame) & (kf <= sp.shot.last_frame)).sum())
        total += k_s * plan.n_positions + (len(sp.shot) - k_s) * sp.m
    return total


@dataclass(frozen=True)
class CompressionReport:
    retained: int
    uncompressed: int

    @property
    def ratio(self) -> float:
        return self.retained / self.uncompressed

    def as_dict(self) -> dict:
        return {"S_v": self.retained, "uncompressed": self.uncompressed, "ratio": self.ratio}


def compression_report(sel: TokenSelection) -> CompressionReport:
    return CompressionReport(sel.retained_count, int(sel.mask.size))
