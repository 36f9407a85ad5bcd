import math

import numpy as np
import pytest

from autoregtrack import tensor as T
from autoregtrack.loss import (FrameLossReport, LossWeights, coordinate_ce, expected_box,
                               format_log_line, iou_l1, is_visible, reconstruction_mse,
                               total_frame_loss)
from autoregtrack.tensor import NumericError, Tensor
from autoregtrack.tokenizer import TokenizedBox, VocabularyConfig

GT = TokenizedBox((1, 2, 3, 4))


def test_uniform_logits_give_log_v():
    assert coordinate_ce(Tensor(np.zeros((4, 10))), GT).item() == pytest.approx(math.log(10))


def test_confident_logits_near_zero():
    logits = np.zeros((4, 10))
    logits[np.arange(4), GT.tokens] = 100.0
    assert coordinate_ce(Tensor(logits), GT).item() < 1e-40


def test_ce_gradient_identity(rng):
    x = Tensor(rng.standard_normal((4, 10)), requires_grad=True)
    coordinate_ce(x, GT).backward()
    onehot = np.zeros((4, 10))
    onehot[np.arange(4), GT.tokens] = 1.0
    assert np.allclose(x.grad, (T.softmax(x, 1).data - onehot) / 4)


def test_mse_cases(rng):
    target = rng.standard_normal((3, 4))
    prev = rng.standard_normal((3, 4))
    assert reconstruction_mse(Tensor(target), target, prev, True).item() == 0.0
    assert reconstruction_mse(Tensor(target + 1), target, prev, True).item() == pytest.approx(1.0)
    a = reconstruction_mse(Tensor(prev + 0.5), target, prev, False).item()
    b = reconstruction_mse(Tensor(prev + 0.5), target * 7, prev, False).item()
    assert a == b == pytest.approx(0.25)


def test_mse_shape_mismatch():
    with pytest.raises(T.ShapeError):
        reconstruction_mse(Tensor(np.zeros((2, 2))), np.zeros((3, 2)), np.zeros((3, 2)), True)


def test_l1_values_and_subgradient():
    assert iou_l1(0.3, 0.8) == pytest.approx(0.5)
    assert iou_l1(0.4, 0.4) == 0.0
    p = Tensor([[0.9]], requires_grad=True)
    iou_l1(p, 0.2).backward()
    assert p.grad[0, 0] == pytest.approx(1.0)


def test_weighted_total():
    total, rep = total_frame_loss(1.0, 1.0, 1.0, 1.0, LossWeights(2, 1, 1))
    assert total == 5.0
    assert isinstance(rep, FrameLossReport) and rep.total == 5.0


def test_report_invariant(rng):
    for _ in range(50):
        parts = rng.random(4)
        w = LossWeights(*rng.random(3))
        _, rep = total_frame_loss(*parts, w)
        expect = rep.ce + w.lambda_siou * rep.siou + w.lambda_mse * rep.mse + w.lambda_l1 * rep.l1
        assert abs(rep.total - expect) <= 1e-12


def test_zero_weight_drops_term(rng):
    recon = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
    mse = reconstruction_mse(recon, np.zeros((2, 2)), np.zeros((2, 2)), True)
    total, _ = total_frame_loss(Tensor(1.0, requires_grad=True) * 1.0, None, mse, None,
                                LossWeights(2, 0, 1))
    total.backward()
    assert recon.grad is None


def test_non_finite_total_raises():
    with pytest.raises(NumericError):
        total_frame_loss(float("nan"), 0.0, 0.0, 0.0, LossWeights())


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        LossWeights(-1, 1, 1)


def test_visibility_threshold():
    assert is_visible(0.5) and not is_visible(0.49)


def test_expected_box_of_peaked_logits():
    v = VocabularyConfig(11, 0.0, 1.0)
    logits = np.full((4, 11), -1e3)
    logits[np.arange(4), [2, 3, 6, 8]] = 0.0
    assert np.allclose(expected_box(Tensor(logits), v).data, [0.2, 0.3, 0.6, 0.8])


def test_expected_box_canonical():
    v = VocabularyConfig(11, 0.0, 1.0)
    logits = np.full((4, 11), -1e3)
    logits[np.arange(4), [8, 6, 2, 3]] = 0.0
    x0, y0, x1, y1 = expected_box(Tensor(logits), v).data
    assert x0 <= x1 and y0 <= y1


def test_log_line_is_tab_separated():
    line = format_log_line(3, 1.0, 0.5, 0.25, 0.125, 2.0, 1e-3)
    assert line.split("\t") == ["3", "1.0", "0.5", "0.25", "0.125", "2.0", "0.001"]
