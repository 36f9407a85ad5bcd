import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from autoregtrack import tensor as T
from autoregtrack.tensor import MaskError, NumericError, Tensor, grad_check, no_grad

finite = st.floats(-3, 3, allow_nan=False)


def test_square_gradient():
    x = Tensor(3.0, requires_grad=True)
    (x * x).backward()
    assert x.grad == pytest.approx(6.0)


def test_shared_subexpression_accumulates():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = x * 2.0
    T.tsum(y * y + y).backward()
    assert np.allclose(x.grad, 8 * x.data + 2)


def test_broadcast_gradient_unbroadcasts():
    a = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.arange(4.0), requires_grad=True)
    T.tsum(a + b).backward()
    assert b.grad.shape == (4,)
    assert np.allclose(b.grad, 3.0)


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert y._parents == ()


def test_non_finite_raises():
    with pytest.raises(NumericError):
        T.log(Tensor([0.0]))


def test_backward_needs_scalar():
    with pytest.raises(T.ShapeError):
        Tensor(np.ones(3), requires_grad=True).backward()


def test_detach_blocks_gradient():
    x = Tensor([2.0], requires_grad=True)
    T.tsum(x.detach() * x).backward()
    assert np.allclose(x.grad, 2.0)


def test_take_fancy_index_accumulates():
    x = Tensor(np.arange(5.0), requires_grad=True)
    T.tsum(x[np.array([0, 0, 3])]).backward()
    assert np.allclose(x.grad, [2, 0, 0, 1, 0])


def test_where_rows_gradient_split():
    x = Tensor(np.ones((3, 2)), requires_grad=True)
    fill = Tensor(np.zeros((1, 2)), requires_grad=True)
    out = T.where_rows(np.array([True, False, True]), x, fill)
    T.tsum(out).backward()
    assert np.allclose(x.grad, [[0, 0], [1, 1], [0, 0]])
    assert np.allclose(fill.grad, [[2, 2]])


@given(arrays(np.float64, (3, 5), elements=finite))
def test_softmax_rows_sum_to_one(x):
    s = T.softmax(Tensor(x), axis=1).data
    assert np.allclose(s.sum(axis=1), 1.0)


def test_log_softmax_matches_log_of_softmax(rng):
    x = Tensor(rng.standard_normal((4, 7)))
    assert np.allclose(T.log_softmax(x, 1).data, np.log(T.softmax(x, 1).data))


def test_layer_norm_statistics(rng):
    x = Tensor(rng.standard_normal((5, 8)) * 3 + 2)
    y = T.layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8))).data
    assert np.allclose(y.mean(axis=1), 0.0, atol=1e-12)
    assert np.allclose(y.var(axis=1), 1.0, atol=1e-5)


def test_gelu_known_values():
    y = T.gelu(Tensor([0.0, 1.0, -1.0])).data
    assert np.allclose(y, [0.0, 0.8413447460685429, -0.15865525393145707])


def test_masked_attention_zero_weight_outside_mask(rng):
    n, d = 6, 4
    mask = np.ones((n, n), dtype=bool)
    mask[0, 3:] = False
    rec = []
    T.masked_attention(*(Tensor(rng.standard_normal((n, d))) for _ in range(3)), mask,
                       heads=2, record=rec)
    w = rec[0]
    assert w.shape == (2, n, n)
    assert np.all(w[:, 0, 3:] == 0.0)
    assert np.allclose(w.sum(axis=2), 1.0)


def test_masked_attention_empty_row_raises(rng):
    mask = np.ones((3, 3), dtype=bool)
    mask[1] = False
    q = Tensor(rng.standard_normal((3, 2)))
    with pytest.raises(MaskError):
        T.masked_attention(q, q, q, mask)


@pytest.mark.parametrize("op", [T.exp, T.sigmoid, T.gelu, T.sqrt, T.absolute])
def test_unary_grad_check(op, rng):
    x = rng.uniform(0.2, 2.0, size=(3, 3))
    assert grad_check(lambda t: T.tsum(op(t)), x) < 1e-6


def test_matmul_grad_check(rng):
    b = Tensor(rng.standard_normal((4, 2)))
    assert grad_check(lambda a: T.tsum(T.matmul(a, b) ** 2), rng.standard_normal((3, 4))) < 1e-6


def test_concat_and_reshape_grad(rng):
    y = Tensor(rng.standard_normal((2, 3)))
    f = lambda x: T.tsum(T.concat([x, y], axis=0).reshape(-1) * np.arange(12.0))  # noqa: E731
    assert grad_check(f, rng.standard_normal((2, 3))) < 1e-6


def test_grad_check_detects_wrong_gradient():
    def bad(x):
        # forward x^2 but backward as if 3x
        out = T._result(x.data ** 2, (x,), lambda g: (3 * g,), "bad")
        return T.tsum(out)
    assert grad_check(bad, np.array([1.0, 2.0])) > 0.1
