import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from momentkit.features import (
    AudioFeatures,
    FeatureTensor,
    Moment,
    NonFiniteValue,
    NonMonotonicTimestamps,
    ShapeMismatch,
    ShotSpan,
    VideoFeatures,
    validate_video_features,
)
from momentkit.tensorio import decode_tensor, encode_tensor


def test_minimal_valid_instance():
    vf = VideoFeatures("v", np.arange(4, dtype=np.float32).reshape(2, 1, 2), [0.0, 1.0], 2.0)
    validate_video_features(vf)


def test_nan_reports_flat_index():
    data = np.zeros(4, dtype=np.float32)
    data[3] = np.nan
    vf = VideoFeatures("v", data.reshape(2, 1, 2), [0.0, 1.0], 2.0)
    with pytest.raises(NonFiniteValue) as exc:
        validate_video_features(vf)
    assert exc.value.index == 3


def test_repeated_timestamp_reports_index():
    vf = VideoFeatures("v", np.zeros((2, 1, 2)), [1.0, 1.0], 2.0)
    with pytest.raises(NonMonotonicTimestamps) as exc:
        validate_video_features(vf)
    assert exc.value.index == 1


@pytest.mark.parametrize(
    "frames, ts, duration",
    [
        (np.zeros((2, 1)), [0.0, 1.0], 2.0),  # not 3-D
        (np.zeros((2, 1, 2)), [0.0], 2.0),  # wrong timestamp count
        (np.zeros((2, 1, 2)), [0.0, 3.0], 2.0),  # past the end
        (np.zeros((0, 1, 2)), [], 2.0),  # no frames
    ],
)
def test_shape_errors(frames, ts, duration):
    with pytest.raises(ShapeMismatch):
        validate_video_features(VideoFeatures("v", frames, ts, duration))


def test_feature_tensor_from_flat_checks_product():
    t = FeatureTensor.from_flat([2, 3], range(6))
    assert t.shape == (2, 3)
    with pytest.raises(ShapeMismatch):
        FeatureTensor.from_flat([2, 2], [1.0, 2.0, 3.0])


def test_types_are_immutable():
    src = np.zeros((2, 1, 2), dtype=np.float32)
    vf = VideoFeatures("v", src, [0.0, 1.0], 2.0)
    src[0, 0, 0] = 5.0
    assert vf.frame_features[0, 0, 0] == 0.0
    with pytest.raises(ValueError):
        vf.frame_features[0, 0, 0] = 1.0


def test_empty_audio_is_legal():
    a = AudioFeatures("v", np.zeros((0, 4)))
    assert a.length == 0
    assert AudioFeatures("v", []).length == 0


def test_moment_and_span_invariants():
    with pytest.raises(ValueError):
        Moment(3.0, 1.0)
    with pytest.raises(ValueError):
        Moment(-1.0, 1.0)
    with pytest.raises(ValueError):
        ShotSpan(4, 2)
    assert len(ShotSpan(2, 4)) == 3


finite = st.floats(-1e6, 1e6, width=32)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 5), st.integers(1, 3), st.integers(1, 3)), elements=finite | st.just(np.nan)))
def test_validation_stable_under_roundtrip(frames):
    n = frames.shape[0]
    vf = VideoFeatures("v", frames, np.arange(n, dtype=float), float(n))
    back = VideoFeatures("v", decode_tensor(encode_tensor(vf.frame_features)).data, vf.frame_timestamps_s, vf.duration_s)

    def verdict(x):
        try:
            validate_video_features(x)
            return None
        except Exception as exc:  # noqa: BLE001
            return type(exc), getattr(exc, "index", None)

    assert verdict(vf) == verdict(back)
