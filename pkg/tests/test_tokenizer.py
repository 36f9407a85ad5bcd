import numpy as np
import pytest
from hypothesis import given, strategies as st

from autoregtrack.geometry import Box
from autoregtrack.tokenizer import (BoxFormat, TokenizedBox, VocabularyConfig, detokenize,
                                    detokenize_box, embedding_ids, quantize, tokenize_box)

VOCAB = VocabularyConfig(400, -0.5, 1.5)
inrange = st.floats(-0.5, 1.5, allow_nan=False)


def test_bin_width():
    assert VOCAB.bin_width == pytest.approx(2.0 / 399)


def test_endpoints():
    assert quantize(-0.5, VOCAB) == 0
    assert quantize(1.5, VOCAB) == 399
    assert detokenize(399, VOCAB) == pytest.approx(1.5)


def test_out_of_range_clamps():
    assert quantize(-7.0, VOCAB) == 0
    assert quantize(9.0, VOCAB) == 399


def test_detokenize_out_of_vocabulary():
    with pytest.raises(IndexError):
        detokenize(400, VOCAB)


@given(inrange)
def test_round_trip_within_half_bin(c):
    assert abs(detokenize(quantize(c, VOCAB), VOCAB) - c) <= VOCAB.bin_width / 2 + 1e-12


@given(inrange, inrange)
def test_quantize_monotone(a, b):
    if a <= b:
        assert quantize(a, VOCAB) <= quantize(b, VOCAB)


@given(st.integers(0, 399))
def test_quantize_detokenize_idempotent(t):
    assert quantize(detokenize(t, VOCAB), VOCAB) == t


def test_corner_box_round_trip():
    b = Box(0.25, 0.3, 0.6, 0.9)
    back = detokenize_box(tokenize_box(b, VOCAB), VOCAB)
    assert np.allclose(back.as_tuple(), b.as_tuple(), atol=VOCAB.bin_width / 2)


def test_inverted_tokens_canonicalise():
    tb = TokenizedBox((300, 300, 100, 100))
    b = detokenize_box(tb, VOCAB)
    assert b.x_min <= b.x_max and b.y_min <= b.y_max


@pytest.mark.parametrize("fmt", list(BoxFormat))
def test_formats_round_trip(fmt):
    v = VocabularyConfig(200, -0.5, 1.5, fmt)
    b = Box(0.2, 0.1, 0.5, 0.7)
    back = detokenize_box(tokenize_box(b, v), v)
    assert np.allclose(back.as_tuple(), b.as_tuple(), atol=2 * v.bin_width)


def test_split_format_uses_second_table():
    v = VocabularyConfig(10, 0.0, 1.0, BoxFormat.CENTER_WH_SPLIT)
    assert v.table_rows == 20
    ids = embedding_ids(TokenizedBox((1, 2, 3, 4)), v)
    assert ids == [1, 2, 13, 14]


def test_tokenized_box_arity():
    with pytest.raises(ValueError):
        TokenizedBox((1, 2, 3))
