import numpy as np
import pytest
from hypothesis import given, strategies as st

from autoregtrack.geometry import Box
from autoregtrack.metrics import (THRESHOLDS, EvalReport, average_overlap, evaluate, precision,
                                  success_auc, success_curve, success_rate)

G = Box(0, 0, 10, 10)


def box_with_iou(v: float) -> Box:
    """Box nested in G with IoU v."""
    return Box(0, 0, 10, 10 * v)


def preds_for(ious):
    return [G] + [box_with_iou(v) for v in ious], [G] * (len(ious) + 1)


def test_perfect_and_disjoint():
    assert average_overlap([G, G, G], [G, G, G]) == 1.0
    far = Box(50, 50, 60, 60)
    assert average_overlap([G, far], [G, G]) == 0.0


def test_ao_four_sevenths():
    p, g = preds_for([1.0, 1 / 7])
    assert average_overlap(p, g) == pytest.approx(4 / 7, abs=1e-15)


def test_frame_zero_excluded():
    far = Box(50, 50, 60, 60)
    assert average_overlap([far, G], [G, G]) == 1.0


def test_success_rate_counting():
    p, g = preds_for([1.0, 0.6, 0.4])
    assert success_rate(p, g, 0.5) == pytest.approx(2 / 3)
    assert success_rate(p, g, 0.0) == 1.0


def test_success_strict_at_threshold():
    p, g = preds_for([0.5])
    assert success_rate(p, g, 0.5) == 0.0


def test_auc_constant_iou():
    p, g = preds_for([0.6, 0.6])
    assert success_auc(p, g) == 12 / 21


def test_precision_cases():
    assert precision([G, G], [G, G]) == (1.0, 1.0)
    moved = G.translate(12, 16)  # 20 px center error
    assert precision([G, moved], [G, G])[0] == 1.0
    gt = Box(0, 0, 6, 8)  # diagonal 10
    off = gt.translate(3, 4)  # normalized error 0.5
    assert precision([gt, off], [gt, gt]) == (1.0, 0.0)


def test_length_mismatch():
    with pytest.raises(ValueError):
        average_overlap([G], [G, G])


def test_threshold_grid():
    assert len(THRESHOLDS) == 21 and THRESHOLDS[0] == 0.0 and THRESHOLDS[-1] == 1.0


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=30))
def test_curve_monotone(ious):
    p, g = preds_for(ious)
    c = success_curve(p, g)
    assert np.all(np.diff(c) <= 0)
    assert np.all((c >= 0) & (c <= 1))


def test_ao_is_limit_of_auc(rng):
    ious = rng.random(40)
    p, g = preds_for(ious)
    fine = np.linspace(0, 1, 1001)
    assert abs(success_curve(p, g, fine).mean() - average_overlap(p, g)) < 5e-3


@given(st.floats(0.1, 10))
def test_scale_invariance(s):
    p, g = preds_for([0.3, 0.9])
    p2, g2 = [b.scale(s) for b in p], [b.scale(s) for b in g]
    assert average_overlap(p2, g2) == pytest.approx(average_overlap(p, g))


def test_report_outputs():
    p, g = preds_for([1.0, 0.6, 0.4])
    rep = evaluate({"b": p, "a": p}, {"a": g, "b": g}, {"a": 2.0})
    assert [s.name for s in rep.sequences] == ["a", "b"]
    assert rep.overall().frames == 6
    assert rep.ao == pytest.approx(2.0 / 3)
    tsv = rep.to_tsv().splitlines()
    assert tsv[0].split("\t")[:3] == ["sequence", "frames", "AO"]
    assert len(tsv) == 4
    curve = rep.curve_tsv().splitlines()
    assert len(curve) == 22
    text = rep.to_text().splitlines()
    assert len({len(line) for line in text}) == 1


def test_empty_report():
    with pytest.raises(ValueError):
        EvalReport().overall()
