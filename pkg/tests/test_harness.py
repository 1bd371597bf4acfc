import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import random_video, trained_weights
from streamnet.arch import load_architecture
from streamnet.harness import (
    EvalResult,
    clip_windows,
    eval_multi_clip,
    eval_single_clip,
    eval_streaming,
    eval_temporal_ensemble,
)
from streamnet.model import forward_offline


@pytest.fixture(scope="module")
def tiny():
    spec = load_architecture("a0-tiny")
    return spec, trained_weights(spec, 3)


@given(arrays(np.float32, st.integers(1, 50), elements=st.floats(-50, 50, width=32)))
def test_probabilities_form_a_simplex(logits):
    r = EvalResult.from_logits(logits, k=5)
    assert abs(float(r.probabilities.sum()) - 1.0) <= 1e-5
    assert np.all(r.probabilities >= 0)
    probs = [p for _, p in r.top_k]
    assert probs == sorted(probs, reverse=True)
    assert len(r.top_k) == min(5, len(logits))


def test_single_clip_strides(tiny):
    spec, w = tiny
    video = random_video(spec, 8, 0)
    full = eval_single_clip(spec, w, video, stride=1)
    np.testing.assert_array_equal(full.logits, forward_offline(spec, w, video)[1])
    one = eval_single_clip(spec, w, video, stride=8)
    np.testing.assert_array_equal(one.logits, forward_offline(spec, w, video[:1])[1])
    twice = eval_single_clip(spec, w, random_video(spec, 16, 1), stride=2)
    pre = eval_single_clip(spec, w, random_video(spec, 16, 1)[::2], stride=1)
    np.testing.assert_array_equal(twice.logits, pre.logits)
    with pytest.raises(ValueError):
        eval_single_clip(spec, w, video, stride=0)


def test_multi_clip_identities(tiny):
    spec, w = tiny
    video = random_video(spec, 8, 2)
    single = eval_single_clip(spec, w, video)
    np.testing.assert_array_equal(eval_multi_clip(spec, w, video, 1, 8, 8).logits, single.logits)
    same = eval_multi_clip(spec, w, video, 3, 4, 0)
    np.testing.assert_array_equal(same.logits, eval_multi_clip(spec, w, video, 1, 4, 4).logits)


def test_multi_clip_differs_from_streaming(tiny):
    # Independent windows restart every buffer; streaming carries them across.
    spec, w = tiny
    video = random_video(spec, 8, 3)
    multi = eval_multi_clip(spec, w, video, 2, 4, 4)
    stream, _ = eval_streaming(spec, w, video, t_clip=4)
    assert np.max(np.abs(multi.logits - stream.logits)) > 1e-4


def test_window_errors():
    assert clip_windows(10, 3, 4, 3) == [(0, 4), (3, 7), (6, 10)]
    with pytest.raises(ValueError):
        clip_windows(10, 3, 4, 4)
    with pytest.raises(ValueError):
        clip_windows(10, 0, 4, 4)


def test_streaming_matches_single_clip(tiny):
    spec, w = tiny
    video = random_video(spec, 6, 4)
    stream, frames = eval_streaming(spec, w, video, t_clip=1)
    offline_frames, offline_clip = forward_offline(spec, w, video)
    np.testing.assert_allclose(stream.logits, offline_clip, atol=1e-5)
    np.testing.assert_allclose(frames, offline_frames, atol=1e-5)


def test_self_ensemble_and_symmetry(tiny):
    spec, w = tiny
    video = random_video(spec, 8, 5)
    ens = eval_temporal_ensemble(spec, w, spec, w, video, frame_offset=0)
    single = forward_offline(spec, w, video[0::2])[1]
    np.testing.assert_allclose(ens.logits, single, atol=1e-6)

    w2 = trained_weights(spec, 11)
    ab = eval_temporal_ensemble(spec, w, spec, w2, video, frame_offset=0)
    ba = eval_temporal_ensemble(spec, w2, spec, w, video, frame_offset=0)
    np.testing.assert_array_equal(ab.logits, ba.logits)
    shifted = eval_temporal_ensemble(spec, w, spec, w, video, frame_offset=1)
    assert shifted.meta["frames"] == "4+4"


def test_ensemble_too_short(tiny):
    spec, w = tiny
    with pytest.raises(ValueError):
        eval_temporal_ensemble(spec, w, spec, w, random_video(spec, 1, 0), frame_offset=1)
