"""Causal temporal operators and the stream buffer.

A stream buffer carries the last ``b`` frames of a layer's input across
subclip boundaries: the layer sees ``buffer ++ clip`` and the buffer becomes
the last ``b`` frames of that concatenation. With a causal temporal
convolution of extent ``k`` the buffer replaces the ``k - 1`` frames of left
padding, so a video can be pushed through in chunks of any size (down to a
single frame) and produce the same activations as one full-clip pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import (
    DTYPE,
    ShapeError,
    as_video,
    concat_time,
    global_avg_pool,
    hard_sigmoid,
    relu,
    slice_last_frames,
    spatial_mean,
)
from .units import round_to_multiple


def balanced_padding(k: int) -> tuple[int, int]:
    """SAME-style padding for a stride-1 kernel of extent ``k``."""
    if k < 1:
        raise ValueError(f"kernel extent must be >= 1, got {k}")
    if k % 2:
        return (k - 1) // 2, (k - 1) // 2
    return (k - 2) // 2, k // 2


def causal_padding(k: int) -> tuple[int, int]:
    """Balanced padding with everything moved before the first frame."""
    left, right = balanced_padding(k)
    return left + right, 0


@dataclass(frozen=True)
class StreamBuffer:
    """The last ``b`` input frames of one temporal layer; zeros at start."""

    state: np.ndarray

    @classmethod
    def zeros(cls, b: int, frame_shape: tuple[int, int, int]) -> "StreamBuffer":
        if b < 0:
            raise ValueError(f"buffer width must be >= 0, got {b}")
        return cls(np.zeros((b,) + tuple(frame_shape), dtype=DTYPE))

    @property
    def b(self) -> int:
        return self.state.shape[0]

    @property
    def nbytes(self) -> int:
        return self.state.nbytes


def stream_buffer_apply(
    buffer: StreamBuffer, clip: np.ndarray, op: Callable[[np.ndarray], np.ndarray]
) -> tuple[np.ndarray, StreamBuffer]:
    """Run ``op`` on ``buffer ++ clip`` and roll the buffer forward.

    ``op`` receives ``b + T`` frames and must return exactly ``T``.
    """
    clip = as_video(clip)
    if clip.shape[1:] != buffer.state.shape[1:]:
        raise ShapeError(f"clip frames {clip.shape[1:]} do not match buffer frames {buffer.state.shape[1:]}")
    joined = concat_time(buffer.state, clip)
    features = op(joined)
    if features.shape[0] != clip.shape[0]:
        raise ShapeError(f"buffered op returned {features.shape[0]} frames for a {clip.shape[0]}-frame clip")
    return features, StreamBuffer(slice_last_frames(joined, buffer.b))


@dataclass(frozen=True)
class CgapState:
    """Running sum and frame count for cumulative global average pooling."""

    running_sum: np.ndarray | None = None
    count: int = 0

    @property
    def nbytes(self) -> int:
        return 0 if self.running_sum is None else self.running_sum.nbytes


def _check_cgap_shape(state: CgapState, frame_shape: tuple[int, ...]):
    if state.running_sum is not None and state.running_sum.shape != frame_shape:
        raise ShapeError(f"CGAP frame shape changed from {state.running_sum.shape} to {frame_shape}")


def cgap_step(state: CgapState, frame: np.ndarray) -> tuple[np.ndarray, CgapState]:
    """Add one frame; return the mean over every frame seen so far."""
    frame = np.asarray(frame, dtype=DTYPE)
    _check_cgap_shape(state, frame.shape)
    total = frame.copy() if state.running_sum is None else state.running_sum + frame
    count = state.count + 1
    return total / DTYPE(count), CgapState(total, count)


def cgap_many(state: CgapState, frames: np.ndarray) -> tuple[np.ndarray, CgapState]:
    """Apply :func:`cgap_step` to each leading-axis slice of ``frames``.

    The prefix sums are accumulated sequentially from the carried sum, so the
    results are bitwise identical to stepping one frame at a time.
    """
    frames = np.asarray(frames, dtype=DTYPE)
    if frames.shape[0] == 0:
        raise ShapeError("CGAP needs at least one frame")
    _check_cgap_shape(state, frames.shape[1:])
    if state.running_sum is None:
        sums = np.cumsum(frames, axis=0, dtype=DTYPE)
    else:
        sums = np.cumsum(np.concatenate([state.running_sum[None], frames]), axis=0, dtype=DTYPE)[1:]
    counts = np.arange(state.count + 1, state.count + frames.shape[0] + 1, dtype=DTYPE)
    means = sums / counts.reshape((-1,) + (1,) * (frames.ndim - 1))
    return means, CgapState(sums[-1].copy(), state.count + frames.shape[0])


def positional_encoding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal encoding of frame index ``t`` over ``dim`` channels.

    Even entries are sines and odd entries cosines at geometrically spaced
    frequencies (base 10000). An odd ``dim`` gets a trailing zero.
    """
    even = dim - dim % 2
    i = np.arange(even // 2, dtype=np.float64)
    angle = t / np.power(10000.0, 2.0 * i / even) if even else i
    out = np.zeros(dim, dtype=np.float64)
    out[0:even:2] = np.sin(angle)
    out[1:even:2] = np.cos(angle)
    return out.astype(DTYPE)


def positional_encodings(start: int, count: int, dim: int) -> np.ndarray:
    return np.stack([positional_encoding(start + t, dim) for t in range(count)])


@dataclass(frozen=True)
class SqueezeExciteWeights:
    """Bottleneck projections of a squeeze-and-excitation gate."""

    reduce: np.ndarray  # (C, C_se)
    reduce_bias: np.ndarray
    expand: np.ndarray  # (C_se, C)
    expand_bias: np.ndarray

    @property
    def channels(self) -> int:
        return self.reduce.shape[0]

    def gate(self, squeezed: np.ndarray) -> np.ndarray:
        hidden = relu(squeezed @ self.reduce + self.reduce_bias)
        return hard_sigmoid(hidden @ self.expand + self.expand_bias)


def se_width(channels: int) -> int:
    """Bottleneck width: a quarter of ``channels`` rounded to 8, at least 8."""
    return max(8, round_to_multiple(channels / 4, 8))


def _check_se(clip: np.ndarray, weights: SqueezeExciteWeights):
    if clip.shape[-1] != weights.channels:
        raise ShapeError(f"SE expects {weights.channels} channels, clip has {clip.shape[-1]}")


def causal_se(
    clip: np.ndarray,
    weights: SqueezeExciteWeights,
    cgap: CgapState,
    base_frame_index: int,
    use_pos_enc: bool = True,
) -> tuple[np.ndarray, CgapState]:
    """Gate each frame by an SE computed from the cumulative mean up to it."""
    clip = as_video(clip)
    _check_se(clip, weights)
    squeezed, cgap = cgap_many(cgap, spatial_mean(clip))
    if use_pos_enc:
        squeezed = squeezed + positional_encodings(base_frame_index, clip.shape[0], clip.shape[-1])
    gates = weights.gate(squeezed)
    return clip * gates[:, None, None, :], cgap


def non_causal_se(clip: np.ndarray, weights: SqueezeExciteWeights) -> np.ndarray:
    """Gate every frame by one SE computed from the whole clip's mean."""
    clip = as_video(clip)
    _check_se(clip, weights)
    return clip * weights.gate(global_avg_pool(clip))


def temporal_shift(
    clip: np.ndarray, buffer: StreamBuffer, shift_fraction: float
) -> tuple[np.ndarray, StreamBuffer]:
    """Shift the first ``floor(shift_fraction * C)`` channels one frame later.

    Frame ``-1`` comes from the one-frame buffer, which makes this a stream
    buffer with ``b == 1``.
    """
    if buffer.b != 1:
        raise ValueError(f"temporal shift needs a one-frame buffer, got b={buffer.b}")
    if not 0.0 <= shift_fraction <= 1.0:
        raise ValueError(f"shift_fraction must lie in [0, 1], got {shift_fraction}")
    n = int(np.floor(shift_fraction * clip.shape[-1]))

    def shift(joined):
        out = joined[1:].copy()
        out[..., :n] = joined[:-1, ..., :n]
        return out

    return stream_buffer_apply(buffer, clip, shift)
