import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import direct_shift, prefix_means
from streamnet.causal import (
    CgapState,
    SqueezeExciteWeights,
    StreamBuffer,
    balanced_padding,
    causal_padding,
    causal_se,
    cgap_many,
    cgap_step,
    non_causal_se,
    positional_encoding,
    se_width,
    stream_buffer_apply,
    temporal_shift,
)
from streamnet.tensor import PaddingSpec, ShapeError, conv3d


@pytest.mark.parametrize(
    "k,balanced,causal", [(1, (0, 0), (0, 0)), (3, (1, 1), (2, 0)), (5, (2, 2), (4, 0)), (4, (1, 2), (3, 0))]
)
def test_padding(k, balanced, causal):
    assert balanced_padding(k) == balanced
    assert causal_padding(k) == causal
    assert sum(causal_padding(k)) == k - 1


def _frames(*values):
    return np.array(values, np.float32).reshape(len(values), 1, 1, 1)


def test_buffer_rolls_forward():
    buf = StreamBuffer(_frames(0, 0))
    clip = _frames(1, 2, 3)
    out, buf = stream_buffer_apply(buf, clip, lambda j: j[-3:])
    np.testing.assert_array_equal(out, clip)
    np.testing.assert_array_equal(buf.state, _frames(2, 3))
    _, buf = stream_buffer_apply(StreamBuffer(_frames(0, 9)), _frames(5), lambda j: j[-1:])
    np.testing.assert_array_equal(buf.state, _frames(9, 5))


def test_zero_width_buffer():
    buf = StreamBuffer.zeros(0, (1, 1, 1))
    out, buf = stream_buffer_apply(buf, _frames(4, 5), lambda j: j * 2)
    np.testing.assert_array_equal(out, _frames(8, 10))
    assert buf.b == 0


def test_buffer_errors():
    buf = StreamBuffer.zeros(2, (1, 1, 1))
    with pytest.raises(ShapeError):
        stream_buffer_apply(buf, np.zeros((2, 2, 1, 1), np.float32), lambda j: j[2:])
    with pytest.raises(ShapeError):
        stream_buffer_apply(buf, _frames(1, 2), lambda j: j)


def _causal_temporal_conv(x, kernel):
    return conv3d(x, kernel, padding=PaddingSpec(t=causal_padding(kernel.shape[0])), groups=x.shape[-1])


def _stream_conv(x, kernel, sizes):
    buf = StreamBuffer.zeros(kernel.shape[0] - 1, x.shape[1:])
    op = lambda j: conv3d(j, kernel, groups=x.shape[-1])  # noqa: E731
    outs, start = [], 0
    for s in sizes:
        out, buf = stream_buffer_apply(buf, x[start : start + s], op)
        outs.append(out)
        start += s
    return np.concatenate(outs)


@st.composite
def partitions(draw, total):
    cuts = draw(st.lists(st.integers(1, total - 1), unique=True, max_size=total - 1))
    edges = [0] + sorted(cuts) + [total]
    return [b - a for a, b in zip(edges, edges[1:])]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([3, 5, 7]), partitions(12))
def test_buffered_conv_is_partition_invariant(seed, k, sizes):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((12, 3, 3, 4)).astype(np.float32)
    kernel = rng.standard_normal((k, 1, 1, 1, 4)).astype(np.float32)
    np.testing.assert_allclose(_stream_conv(x, kernel, sizes), _causal_temporal_conv(x, kernel), atol=1e-6)


def test_identity_tap_passes_clip_through_buffer():
    x = np.random.default_rng(2).standard_normal((5, 2, 2, 3)).astype(np.float32)
    kernel = np.zeros((3, 1, 1, 1, 3), np.float32)
    kernel[2] = 1.0
    np.testing.assert_array_equal(_stream_conv(x, kernel, [2, 1, 2]), x)


def test_causal_conv_ignores_future():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((10, 2, 2, 3)).astype(np.float32)
    kernel = rng.standard_normal((5, 1, 1, 1, 3)).astype(np.float32)
    base = _causal_temporal_conv(x, kernel)
    for t in range(9):
        y = x.copy()
        y[t + 1 :] += 100.0
        np.testing.assert_array_equal(_causal_temporal_conv(y, kernel)[: t + 1], base[: t + 1])


def test_cgap_small_cases():
    state, means = CgapState(), []
    for v in (1.0, 2.0, 3.0):
        m, state = cgap_step(state, np.array([v], np.float32))
        means.append(float(m[0]))
    assert means == [1.0, 1.5, 2.0]
    out, state = cgap_many(CgapState(), _frames(2, 4, 6)[:, 0, 0])
    np.testing.assert_array_equal(out.ravel(), [2, 3, 4])
    assert state.count == 3
    out, _ = cgap_many(CgapState(), np.full((4, 2), 5.0, np.float32))
    np.testing.assert_array_equal(out, 5.0)
    with pytest.raises(ShapeError):
        cgap_many(CgapState(), np.zeros((0, 2), np.float32))


def test_cgap_matches_prefix_oracle_and_stepwise():
    rng = np.random.default_rng(4)
    for _ in range(20):
        frames = rng.standard_normal((20, 6)).astype(np.float32)
        chunked, state = [], CgapState()
        for piece in np.split(frames, [3, 4, 11]):
            out, state = cgap_many(state, piece)
            chunked.append(out)
        chunked = np.concatenate(chunked)
        np.testing.assert_allclose(chunked, prefix_means(frames), atol=1e-6)
        stepped, state = [], CgapState()
        for f in frames:
            out, state = cgap_step(state, f)
            stepped.append(out)
        np.testing.assert_array_equal(chunked, np.stack(stepped))


def test_positional_encoding_values():
    # sin(1), cos(1), sin(1/100), cos(1/100) for t=1, dim=4
    expected = [math.sin(1.0), math.cos(1.0), math.sin(0.01), math.cos(0.01)]
    np.testing.assert_allclose(positional_encoding(1, 4), expected, rtol=1e-6)
    np.testing.assert_array_equal(positional_encoding(0, 4), [0, 1, 0, 1])
    assert positional_encoding(3, 5)[-1] == 0.0
    assert positional_encoding(3, 5).shape == (5,)


@pytest.mark.parametrize("c,expected", [(8, 8), (16, 8), (40, 8), (48, 16), (72, 16), (80, 24), (240, 64), (96, 24)])
def test_se_width(c, expected):
    assert se_width(c) == expected


def _se_weights(rng, c, scale=1.0):
    cs = se_width(c)
    return SqueezeExciteWeights(
        (scale * rng.standard_normal((c, cs))).astype(np.float32),
        (scale * rng.standard_normal(cs)).astype(np.float32),
        (scale * rng.standard_normal((cs, c))).astype(np.float32),
        (scale * rng.standard_normal(c)).astype(np.float32),
    )


def test_zero_weight_se_halves_input():
    c = 8
    w = SqueezeExciteWeights(np.zeros((c, 8), np.float32), np.zeros(8, np.float32), np.zeros((8, c), np.float32), np.zeros(c, np.float32))
    x = np.random.default_rng(5).standard_normal((3, 2, 2, c)).astype(np.float32)
    out, _ = causal_se(x, w, CgapState(), 0)
    np.testing.assert_array_equal(out, x * np.float32(0.5))
    np.testing.assert_array_equal(non_causal_se(x, w), x * np.float32(0.5))


def test_zero_input_stays_zero():
    w = _se_weights(np.random.default_rng(6), 16)
    out, _ = causal_se(np.zeros((4, 2, 2, 16), np.float32), w, CgapState(), 7)
    np.testing.assert_array_equal(out, 0.0)


def test_causal_se_gates_from_prefix_mean():
    rng = np.random.default_rng(7)
    c = 16
    w = _se_weights(rng, c)
    x = rng.standard_normal((6, 3, 3, c)).astype(np.float32)
    out, _ = causal_se(x, w, CgapState(), 10)
    x64 = x.astype(np.float64)
    for t in range(6):
        squeezed = x64[: t + 1].mean(axis=(0, 1, 2))
        enc = [
            math.sin((10 + t) / 10000 ** (2 * i / c)) if j == 0 else math.cos((10 + t) / 10000 ** (2 * i / c))
            for i in range(c // 2)
            for j in range(2)
        ]
        s = squeezed + np.array(enc)
        hidden = np.maximum(s @ w.reduce + w.reduce_bias, 0)
        gate = np.clip((hidden @ w.expand + w.expand_bias + 3) / 6, 0, 1)
        np.testing.assert_allclose(out[t], x64[t] * gate, atol=1e-5)


def test_causal_se_chunking_and_posenc():
    rng = np.random.default_rng(8)
    w = _se_weights(rng, 8)
    x = rng.standard_normal((7, 2, 2, 8)).astype(np.float32)
    whole, _ = causal_se(x, w, CgapState(), 0)
    parts, state, start = [], CgapState(), 0
    for s in (2, 1, 4):
        out, state = causal_se(x[start : start + s], w, state, start)
        parts.append(out)
        start += s
    np.testing.assert_allclose(np.concatenate(parts), whole, atol=1e-6)
    plain, _ = causal_se(x, w, CgapState(), 0, use_pos_enc=False)
    assert not np.allclose(plain, whole)


def test_non_causal_se_oracle_and_single_frame():
    rng = np.random.default_rng(9)
    w = _se_weights(rng, 24)
    x = rng.standard_normal((5, 3, 3, 24)).astype(np.float32)
    squeezed = x.astype(np.float64).mean(axis=(0, 1, 2))
    hidden = np.maximum(squeezed @ w.reduce + w.reduce_bias, 0)
    gate = np.clip((hidden @ w.expand + w.expand_bias + 3) / 6, 0, 1)
    np.testing.assert_allclose(non_causal_se(x, w), x * gate, atol=1e-5)
    one = x[:1]
    causal, _ = causal_se(one, w, CgapState(), 0, use_pos_enc=False)
    np.testing.assert_allclose(causal, non_causal_se(one, w), atol=1e-6)


@pytest.mark.parametrize("fraction", [0.0, 0.25, 1.0])
def test_temporal_shift_matches_direct_shift(fraction):
    rng = np.random.default_rng(10)
    x = rng.standard_normal((9, 2, 2, 8)).astype(np.float32)
    expected = direct_shift(x, int(fraction * 8))
    for sizes in ([9], [1] * 9, [4, 2, 3]):
        buf, outs, start = StreamBuffer.zeros(1, x.shape[1:]), [], 0
        for s in sizes:
            out, buf = temporal_shift(x[start : start + s], buf, fraction)
            outs.append(out)
            start += s
        np.testing.assert_array_equal(np.concatenate(outs), expected)


def test_temporal_shift_rejects_bad_args():
    x = np.zeros((2, 1, 1, 4), np.float32)
    with pytest.raises(ValueError):
        temporal_shift(x, StreamBuffer.zeros(2, (1, 1, 4)), 0.5)
    with pytest.raises(ValueError):
        temporal_shift(x, StreamBuffer.zeros(1, (1, 1, 4)), 1.5)
