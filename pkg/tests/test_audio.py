import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentkit.audio import DEFAULT_AUDIO_LENGTH, InvalidL, bin_edges, pool_audio, pool_dual
from momentkit.features import AudioFeatures, StreamKind


def audio(values, kind=StreamKind.MIXED):
    v = np.asarray(values, dtype=np.float32)
    if v.ndim == 1:
        v = v[:, None]
    return AudioFeatures("v", v, kind)


def test_bin_means_by_hand():
    out = pool_audio(audio([1, 2, 3, 4, 5, 6]), 3)
    assert out.tokens.data[:, 0].tolist() == [1.5, 3.5, 5.5]
    assert out.bin_map == ((0, 2), (2, 4), (4, 6))


def test_identity_when_short(rng):
    a = audio(rng.normal(size=(150, 4)))
    out = pool_audio(a, 150)
    assert np.array_equal(out.tokens.data, a.tokens)


def test_default_length():
    assert DEFAULT_AUDIO_LENGTH == 150


def test_empty_stream():
    out = pool_audio(AudioFeatures("v", np.zeros((0, 3))), 10)
    assert out.length == 0


def test_invalid_length():
    with pytest.raises(InvalidL):
        pool_audio(audio([1.0]), 0)


def test_dual_split():
    v, a = pool_dual(audio([1, 2, 3, 4], StreamKind.VOICE), audio([1, 2, 3, 4], StreamKind.AMBIENT), 4)
    assert v.length == 2 and a.length == 2


def test_dual_empty_ambient():
    v, a = pool_dual(audio([1, 2, 3], StreamKind.VOICE), AudioFeatures("v", np.zeros((0, 1)), StreamKind.AMBIENT), 4)
    assert v.length == 2 and a.length == 0


def test_dual_single_bin_means():
    v, a = pool_dual(audio([0, 2], StreamKind.VOICE), audio([10, 30], StreamKind.AMBIENT), 2)
    assert v.tokens.data.tolist() == [[1.0]]
    assert a.tokens.data.tolist() == [[20.0]]


def test_dual_checks_kinds():
    with pytest.raises(ValueError):
        pool_dual(audio([1.0]), audio([1.0], StreamKind.AMBIENT), 2)
    with pytest.raises(InvalidL):
        pool_dual(audio([1.0], StreamKind.VOICE), audio([1.0], StreamKind.AMBIENT), 0)


streams = st.tuples(st.integers(0, 400), st.integers(1, 4), st.integers(1, 200), st.integers(0, 10**6))


@settings(max_examples=150, deadline=None)
@given(streams)
def test_length_law_and_bins(params):
    t, d, L, seed = params
    a = audio(np.random.default_rng(seed).normal(size=(t, d)))
    out = pool_audio(a, L)
    assert out.length == min(t, L)
    flat = [i for lo, hi in out.bin_map for i in range(lo, hi)]
    assert flat == list(range(t))
    sizes = {hi - lo for lo, hi in out.bin_map}
    assert not sizes or max(sizes) - min(sizes) <= 1


@settings(max_examples=150, deadline=None)
@given(streams)
def test_weighted_mean_preserved(params):
    t, d, L, seed = params
    if t == 0:
        return
    x = np.random.default_rng(seed).normal(size=(t, d)).astype(np.float32)
    out = pool_audio(audio(x), L)
    w = np.array([hi - lo for lo, hi in out.bin_map], dtype=np.float64)
    weighted = (out.tokens.data.astype(np.float64) * w[:, None]).sum(0) / t
    np.testing.assert_allclose(weighted, x.astype(np.float64).mean(0), atol=1e-6)
    if t % out.length == 0:
        np.testing.assert_allclose(out.tokens.data.astype(np.float64).mean(0), x.astype(np.float64).mean(0), atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(streams)
def test_idempotent(params):
    t, d, L, seed = params
    a = audio(np.random.default_rng(seed).normal(size=(t, d)))
    once = pool_audio(a, L)
    twice = pool_audio(AudioFeatures("v", once.tokens.data), L)
    assert np.array_equal(once.tokens.data, twice.tokens.data)


def test_bin_edges_match_floor_rule():
    assert bin_edges(7, 3).tolist() == [0, 2, 4, 7]
