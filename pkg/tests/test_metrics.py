import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tnet.metrics import ConfusionMatrix, derive, to_csv, to_text
from tnet.objective import IGNORE


def _cm(counts):
    counts = np.array(counts, dtype=np.int64)
    return ConfusionMatrix(len(counts), counts)


def test_identity_matrix():
    s = derive(_cm([[5, 0], [0, 5]]))
    assert (s.oa, s.miou, s.mf1) == (1.0, 1.0, 1.0)


def test_golden_3124():
    s = derive(_cm([[3, 1], [2, 4]]))
    assert abs(s.oa - 0.7) <= 1e-12
    assert abs(s.iou[0] - 0.5) <= 1e-12 and abs(s.iou[1] - 4 / 7) <= 1e-12
    assert abs(s.miou - (0.5 + 4 / 7) / 2) <= 1e-12
    assert abs(s.f1[0] - 6 / 9) <= 1e-12 and abs(s.f1[1] - 8 / 11) <= 1e-12


def test_exclusion():
    s = derive(_cm([[3, 1], [2, 4]]), excluded_classes={1})
    assert s.miou == 0.5 == s.iou[0]
    assert s.iou[1] == pytest.approx(4 / 7)
    text = to_text(s, ["road", "car"])
    assert "car" in text and "excluded" in text


def test_accumulate_and_ignore():
    cm = ConfusionMatrix(2).accumulate(np.array([0, 1, 1, 0, 0, 1, 1, 0, 1, 1]), np.array([0, 1, 1, 0, 0, 1, 1, 0, 1, 1]))
    assert np.trace(cm.counts) == 10 == cm.total
    cm = ConfusionMatrix(3).accumulate(np.zeros((2, 4, 4), int), np.full((2, 4, 4), IGNORE))
    assert not cm.counts.any() and cm.ignored_pixels == 32
    with pytest.raises(ValueError):
        derive(cm)


def test_out_of_range_labels():
    with pytest.raises(ValueError):
        ConfusionMatrix(2).accumulate(np.array([2]), np.array([0]))


def test_absent_class_skipped_from_means():
    s = derive(_cm([[4, 0, 0], [0, 2, 0], [0, 0, 0]]))
    assert math.isnan(s.iou[2]) and s.miou == 1.0 and s.present == [True, True, False]


def test_table_layout():
    rows = to_csv(derive(_cm([[3, 1], [2, 4]]))).splitlines()
    assert rows[0] == "metric,class0,class1,mF1,OA,mIoU"
    assert rows[1].startswith("F1,66.67,72.73,") and rows[1].endswith(",70.00,53.57")


labels = st.integers(0, 3)


@settings(max_examples=60, deadline=None)
@given(
    gt=arrays(np.int64, 40, elements=st.one_of(labels, st.just(IGNORE))),
    pred=arrays(np.int64, 40, elements=labels),
    cut=st.integers(0, 40),
)
def test_streaming_equals_batch(gt, pred, cut):
    whole = ConfusionMatrix(4).accumulate(pred, gt)
    a = ConfusionMatrix(4).accumulate(pred[:cut], gt[:cut])
    b = ConfusionMatrix(4).accumulate(pred[cut:], gt[cut:])
    merged = a.merge(b)
    assert np.array_equal(merged.counts, whole.counts) and merged.ignored_pixels == whole.ignored_pixels
    assert whole.total + whole.ignored_pixels == 40
    if whole.total:
        x, y = derive(merged), derive(whole)
        assert x.oa == y.oa
        np.testing.assert_array_equal([x.miou, x.mf1, *x.iou, *x.f1], [y.miou, y.mf1, *y.iou, *y.f1])


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, (4, 4), elements=st.integers(0, 50)), st.permutations(range(4)))
def test_iou_below_f1_and_permutation(counts, perm):
    if counts.sum() == 0:
        return
    s = derive(_cm(counts))
    for i, f in zip(s.iou, s.f1):
        if not math.isnan(i):
            assert 0 <= i <= f <= 1
    perm = np.array(perm)
    p = derive(_cm(counts[np.ix_(perm, perm)]))
    assert p.oa == s.oa
    assert p.miou == pytest.approx(s.miou, rel=1e-12, nan_ok=True)
    assert p.mf1 == pytest.approx(s.mf1, rel=1e-12, nan_ok=True)
    np.testing.assert_allclose(p.iou, np.array(s.iou)[perm], rtol=1e-15)
