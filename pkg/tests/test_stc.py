import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_vf, random_partition
from momentkit.keyframes import KeyframeSet
from momentkit.shots import import_shots
from momentkit.stc import (
    InconsistentInputs,
    InvalidRho,
    compress,
    compression_report,
    expected_token_count,
    plan_variance,
    position_variance,
    retained_budget,
)
from oracles import ceil_budget, position_variance_bruteforce


def kfset(indices):
    return KeyframeSet(tuple(sorted(indices)), max(1, len(indices)), ())


def test_hand_variance_example():
    frames = np.array([[[0.0], [0.0]], [[0.0], [3.0]], [[0.0], [6.0]]])
    plan = plan_variance(make_vf(frames), import_shots([], 3), 0.5)
    np.testing.assert_allclose(plan.per_shot[0].position_variance, [0.0, 6.0])
    assert plan.per_shot[0].retained_positions == (1,)


def test_identical_frames_tie_break():
    frames = np.ones((4, 4, 2))
    plan = plan_variance(make_vf(frames), import_shots([], 4), 0.5)
    assert plan.per_shot[0].retained_positions == (0, 1)


def test_full_retention(rng):
    vf = make_vf(rng.normal(size=(6, 5, 2)))
    plan = plan_variance(vf, import_shots([2, 4], 6), 1.0)
    assert all(sp.retained_positions == (0, 1, 2, 3, 4) for sp in plan.per_shot)


@pytest.mark.parametrize("rho", [0.0, -0.1, 1.01])
def test_invalid_rho(rho):
    with pytest.raises(InvalidRho):
        plan_variance(make_vf(np.zeros((2, 2, 1))), import_shots([], 2), rho)


def test_budget_guards_float_error():
    assert retained_budget(0.1, 30) == 3
    assert retained_budget(0.25, 32) == 8
    assert retained_budget(0.01, 4) == 1


def test_l2_aggregate():
    block = np.array([[[0.0, 0.0]], [[2.0, 4.0]]])  # variances 1 and 4
    np.testing.assert_allclose(position_variance(block, "l2"), [np.sqrt(17.0)])
    np.testing.assert_allclose(position_variance(block, "mean"), [2.5])


def test_reference_configuration(rng):
    vf = make_vf(rng.normal(size=(80, 32, 4)))
    shots = import_shots([], 80)
    kf = kfset(rng.choice(80, size=32, replace=False).tolist())
    cv = compress(vf, kf, plan_variance(vf, shots, 0.25))
    rep = compression_report(cv.selection)
    assert rep.retained == 1408 and rep.uncompressed == 2560
    assert rep.ratio == pytest.approx(0.55)
    assert cv.tokens.shape == (1408, 4)


def test_all_keyframes_keep_everything(rng):
    vf = make_vf(rng.normal(size=(5, 3, 2)))
    cv = compress(vf, kfset(range(5)), plan_variance(vf, import_shots([2], 5), 0.3))
    assert np.array_equal(cv.tokens.data, vf.frame_features.reshape(-1, 2))
    assert compression_report(cv.selection).ratio == 1.0


def test_rho_one_keeps_everything(rng):
    vf = make_vf(rng.normal(size=(5, 3, 2)))
    cv = compress(vf, kfset([0]), plan_variance(vf, import_shots([2], 5), 1.0))
    assert cv.selection.retained_count == 15


def test_single_token():
    vf = make_vf(np.ones((1, 1, 1)))
    cv = compress(vf, kfset([0]), plan_variance(vf, import_shots([], 1), 0.25))
    assert compression_report(cv.selection).ratio == 1.0


def test_inconsistent_inputs(rng):
    vf = make_vf(rng.normal(size=(6, 2, 2)))
    with pytest.raises(InconsistentInputs):
        plan_variance(vf, import_shots([], 5), 0.5)
    plan = plan_variance(make_vf(rng.normal(size=(5, 2, 2))), import_shots([], 5), 0.5)
    with pytest.raises(InconsistentInputs):
        compress(vf, kfset([0]), plan)


def test_token_order_and_provenance(rng):
    vf = make_vf(rng.normal(size=(4, 3, 2)))
    cv = compress(vf, kfset([2]), plan_variance(vf, import_shots([], 4), 0.34))
    prov = cv.selection.provenance
    assert [tuple(r) for r in prov] == sorted(tuple(r) for r in prov)
    for tok, (f, q) in zip(cv.tokens.data, prov):
        assert np.array_equal(tok, vf.frame_features[f, q])
    assert np.all(np.diff(cv.frame_of_token) >= 0)


small_instance = st.tuples(st.integers(1, 8), st.integers(1, 4), st.integers(1, 3), st.integers(0, 10**6))


@settings(max_examples=120, deadline=None)
@given(small_instance, st.sampled_from([0.1, 0.25, 0.3, 0.5, 0.75, 1.0]))
def test_plan_matches_bruteforce(inst, rho):
    n, q, d, seed = inst
    rng = np.random.default_rng(seed)
    frames = rng.integers(-3, 4, size=(n, q, d)).astype(np.float32)  # ties are common
    cuts = random_partition(rng, n, int(rng.integers(1, n + 1)))
    plan = plan_variance(make_vf(frames), import_shots(cuts, n), rho)
    m = ceil_budget(rho, q)
    for sp in plan.per_shot:
        block = frames[sp.shot.first_frame : sp.shot.last_frame + 1].tolist()
        var = position_variance_bruteforce(block)
        np.testing.assert_allclose(sp.position_variance, var, rtol=0, atol=1e-9)
        expected = sorted(sorted(range(q), key=lambda p: (-var[p], p))[:m])
        assert list(sp.retained_positions) == expected


@settings(max_examples=120, deadline=None)
@given(small_instance, st.floats(0.01, 1.0), st.data())
def test_count_identity_and_keyframe_completeness(inst, rho, data):
    n, q, d, seed = inst
    rng = np.random.default_rng(seed)
    vf = make_vf(rng.normal(size=(n, q, d)))
    cuts = random_partition(rng, n, int(rng.integers(1, n + 1)))
    kf = kfset(data.draw(st.sets(st.integers(0, n - 1), min_size=1)))
    plan = plan_variance(vf, import_shots(cuts, n), rho)
    cv = compress(vf, kf, plan)
    assert cv.selection.retained_count == expected_token_count(kf, plan) == cv.tokens.shape[0]
    assert cv.selection.mask[list(kf.indices)].all()
    for sp in plan.per_shot:
        for f in range(sp.shot.first_frame, sp.shot.last_frame + 1):
            if f not in kf.indices:
                assert np.flatnonzero(cv.selection.mask[f]).tolist() == list(sp.retained_positions)


@settings(max_examples=80, deadline=None)
@given(small_instance)
def test_retention_nested_in_rho(inst):
    n, q, d, seed = inst
    rng = np.random.default_rng(seed)
    vf = make_vf(rng.integers(0, 3, size=(n, q, d)))
    shots = import_shots([], n)
    prev = set()
    for rho in (0.1, 0.25, 0.5, 0.75, 1.0):
        cur = set(plan_variance(vf, shots, rho).per_shot[0].retained_positions)
        assert prev <= cur
        prev = cur


@settings(max_examples=60, deadline=None)
@given(small_instance)
def test_dimension_permutation_equivariance(inst):
    n, q, d, seed = inst
    rng = np.random.default_rng(seed)
    frames = rng.normal(size=(n, q, d))
    perm = rng.permutation(d)
    shots = import_shots([], n)
    a = plan_variance(make_vf(frames), shots, 0.5)
    b = plan_variance(make_vf(frames[:, :, perm]), shots, 0.5)
    np.testing.assert_allclose(a.per_shot[0].position_variance, b.per_shot[0].position_variance, rtol=1e-12, atol=1e-12)
    assert a.per_shot[0].retained_positions == b.per_shot[0].retained_positions
