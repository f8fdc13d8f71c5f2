import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentkit.features import Moment
from momentkit.metrics import (
    EmptyDataset,
    QueryResult,
    average_precision,
    evaluate,
    mean_average_precision,
    mean_iou,
    recall_at_1,
    report_csv,
    report_markdown,
    temporal_iou,
)
from oracles import ap_oracle, interval_iou, map_oracle, miou_oracle, recall_oracle

FIXTURE = json.loads((Path(__file__).parent / "data" / "metrics_fixture.json").read_text())


def qr(preds, gts, qid="q"):
    return QueryResult(qid, tuple(preds), tuple(gts))


@pytest.mark.parametrize(
    "a, b, expected",
    [((0, 10), (0, 10), 1.0), ((5, 15), (10, 20), 5 / 15), ((0, 1), (2, 3), 0.0), ((3, 3), (3, 3), 0.0)],
)
def test_iou_examples(a, b, expected):
    assert temporal_iou(Moment(*a), Moment(*b)) == pytest.approx(expected, abs=1e-12)


def test_recall_examples():
    assert recall_at_1([qr([(0, 10)], [(0, 10)])], 1.0) == 1.0
    assert recall_at_1([qr([], [(0, 10)])], 0.5) == 0.0
    # top-1 IoUs 0.6, 0.4, 0.9
    data = [qr([(0, 6)], [(0, 10)]), qr([(0, 4)], [(0, 10)]), qr([(0, 9)], [(0, 10)])]
    assert recall_at_1(data, 0.5) == pytest.approx(2 / 3)
    assert mean_iou(data) == pytest.approx(1.9 / 3)


def test_miou_examples():
    assert mean_iou([qr([(0, 10)], [(0, 10)]), qr([(0, 5)], [(0, 10)])]) == 0.75
    assert mean_iou([qr([(0, 10)], [(0, 10)])]) == 1.0


def test_ap_examples():
    assert average_precision(qr([(0, 10), (20, 30)], [(0, 10)]), 0.5) == 1.0
    assert average_precision(qr([(20, 30), (0, 10)], [(0, 10)]), 0.5) == 0.5
    assert average_precision(qr([], [(0, 10)]), 0.5) == 0.0


def test_empty_dataset():
    for fn in (lambda: recall_at_1([], 0.5), lambda: mean_iou([]), lambda: evaluate([]), lambda: mean_average_precision([], 0.5)):
        with pytest.raises(EmptyDataset):
            fn()


def test_perfect_predictions_score_one():
    data = [qr([(i, i + 5)], [(i, i + 5)], f"q{i}") for i in range(5)]
    rep = evaluate(data, avg_band=True)
    assert rep.miou == 1.0 and rep.map_avg == 1.0
    assert all(v == 1.0 for v in (*rep.r1.values(), *rep.map.values()))
    assert rep.r1.keys() == {0.5, 0.7} and rep.map.keys() == {0.5, 0.75}


def test_shipped_fixture():
    data = [qr(q["predictions"], q["ground_truth"], q["qid"]) for q in FIXTURE["queries"]]
    rep = evaluate(data).row()
    raw = [(q["predictions"], q["ground_truth"]) for q in FIXTURE["queries"]]
    oracle = {
        "R1@0.5": recall_oracle(raw, 0.5),
        "R1@0.7": recall_oracle(raw, 0.7),
        "mIoU": miou_oracle(raw),
        "mAP@0.5": map_oracle(raw, 0.5),
        "mAP@0.75": map_oracle(raw, 0.75),
    }
    for name, (num, den) in FIXTURE["expected"].items():
        assert rep[name] == pytest.approx(num / den, abs=1e-12)
        assert oracle[name] == pytest.approx(num / den, abs=1e-12)


def test_reports():
    rep = evaluate([qr([(0, 10)], [(0, 10)])])
    assert report_csv(rep).splitlines()[0] == "n_queries,mIoU,R1@0.5,R1@0.7,mAP@0.5,mAP@0.75"
    md = report_markdown(rep).splitlines()
    assert md[0] == "| mIoU | R1@0.5 | R1@0.7 | mAP@0.5 | mAP@0.75 |"
    assert md[2].startswith("| 100.00")


def test_band_average():
    rep = evaluate([qr([(0, 8)], [(0, 10)])], avg_band=True)
    # IoU 0.8: hits from 0.5 through 0.8 inclusive, i.e. 7 of 10 thresholds
    assert rep.map_avg == pytest.approx(0.7)


window = st.tuples(st.integers(0, 40), st.integers(1, 15)).map(lambda t: (float(t[0]), float(t[0] + t[1])))
query = st.tuples(st.lists(window, max_size=3), st.lists(window, min_size=1, max_size=2))


@settings(max_examples=150, deadline=None)
@given(window, window)
def test_iou_properties(a, b):
    ma, mb = Moment(*a), Moment(*b)
    v = temporal_iou(ma, mb)
    assert v == temporal_iou(mb, ma)
    assert 0.0 <= v <= 1.0
    assert (v == 1.0) == (a == b)
    assert v == pytest.approx(interval_iou(a, b), abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.lists(query, min_size=1, max_size=4), st.sampled_from([0.3, 0.5, 0.7, 0.75, 0.9]))
def test_oracle_equivalence(queries, tau):
    data = [qr(p, g, f"q{i}") for i, (p, g) in enumerate(queries)]
    for r, (p, g) in zip(data, queries):
        assert average_precision(r, tau) == pytest.approx(ap_oracle(p, g, tau), abs=1e-9)
    assert recall_at_1(data, tau) == pytest.approx(recall_oracle(queries, tau), abs=1e-9)
    assert mean_iou(data) == pytest.approx(miou_oracle(queries), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(query, min_size=1, max_size=4))
def test_monotone_in_tau(queries):
    data = [qr(p, g) for p, g in queries]
    taus = np.linspace(0.05, 1.0, 20)
    r1 = [recall_at_1(data, t) for t in taus]
    ap = [mean_average_precision(data, t) for t in taus]
    assert all(x >= y for x, y in zip(r1, r1[1:]))
    assert all(x >= y - 1e-12 for x, y in zip(ap, ap[1:]))


@settings(max_examples=100, deadline=None)
@given(st.lists(query, min_size=1, max_size=4), st.integers(1, 500))
def test_shift_invariance(queries, c):
    def shift(ws):
        return [(s + c, e + c) for s, e in ws]

    a = evaluate([qr(p, g) for p, g in queries]).row()
    b = evaluate([qr(shift(p), shift(g)) for p, g in queries]).row()
    for k in a:
        assert a[k] == pytest.approx(b[k], abs=1e-12)
