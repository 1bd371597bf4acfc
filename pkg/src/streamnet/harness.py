"""Evaluation modes: single clip, multi-clip logit averaging, temporal ensembles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arch import NetworkSpec, Weights
from .model import forward_offline
from .streaming import ClipPlan, StreamingSession, stream_video
from .tensor import as_video, softmax


@dataclass
class EvalResult:
    logits: np.ndarray
    probabilities: np.ndarray
    top_k: list[tuple[int, float]]
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_logits(cls, logits, k: int = 5, **meta) -> "EvalResult":
        logits = np.asarray(logits, dtype=np.float32)
        probs = softmax(logits)
        order = np.argsort(-probs, kind="stable")[:k]
        return cls(logits, probs, [(int(c), float(probs[c])) for c in order], meta)

    def format(self) -> str:
        meta = ", ".join(f"{k}={v}" for k, v in self.meta.items())
        lines = [f"[{meta}]"] if meta else []
        lines += [f"  class {c:>4}  p={p:.6f}  logit={self.logits[c]:+.6f}" for c, p in self.top_k]
        return "\n".join(lines)


def eval_single_clip(spec: NetworkSpec, weights: Weights, video, stride: int = 1, k: int = 5) -> EvalResult:
    """One offline pass over every ``stride``-th frame."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    clip = as_video(video)[::stride]
    _, logits = forward_offline(spec, weights, clip)
    return EvalResult.from_logits(logits, k, mode="single-clip", clips=1, frames=clip.shape[0], stride=stride)


def clip_windows(total: int, n: int, t_clip: int, step: int) -> list[tuple[int, int]]:
    if n < 1 or t_clip < 1 or step < 0:
        raise ValueError("multi-clip needs n >= 1, t_clip >= 1 and a non-negative step")
    windows = [(i * step, i * step + t_clip) for i in range(n)]
    if windows[-1][1] > total:
        raise ValueError(f"window {windows[-1]} runs past the {total}-frame video")
    return windows


def eval_multi_clip(
    spec: NetworkSpec, weights: Weights, video, n: int, t_clip: int, step: int, k: int = 5
) -> EvalResult:
    """Average the clip logits of ``n`` windows starting every ``step`` frames."""
    video = as_video(video)
    windows = clip_windows(video.shape[0], n, t_clip, step)
    logits = [forward_offline(spec, weights, video[a:b])[1] for a, b in windows]
    mean = np.mean(np.stack(logits), axis=0, dtype=np.float64).astype(np.float32) if n > 1 else logits[0]
    return EvalResult.from_logits(mean, k, mode="multi-clip", clips=n, frames=t_clip, step=step)


def eval_streaming(spec: NetworkSpec, weights: Weights, video, t_clip: int = 1, k: int = 5):
    """Push the video in ``t_clip`` chunks; return (result, per-frame logits)."""
    video = as_video(video)
    session = StreamingSession(spec, weights)
    frames = stream_video(session, video, ClipPlan.uniform(t_clip, video.shape[0]))
    result = EvalResult.from_logits(session.predict(), k, mode="stream", t_clip=t_clip, frames=video.shape[0])
    return result, frames


def eval_temporal_ensemble(
    spec_a: NetworkSpec,
    weights_a: Weights,
    spec_b: NetworkSpec,
    weights_b: Weights,
    video,
    frame_offset: int = 1,
    k: int = 5,
) -> EvalResult:
    """Mean logits of two half-frame-rate models.

    Model A sees frames 0, 2, 4, ...; model B sees ``frame_offset``,
    ``frame_offset + 2``, .... Logits are averaged before the softmax.
    """
    video = as_video(video)
    clip_a = video[0::2]
    clip_b = video[frame_offset::2]
    if frame_offset < 0 or clip_b.shape[0] == 0:
        raise ValueError(f"a {video.shape[0]}-frame video is too short for frame offset {frame_offset}")
    _, la = forward_offline(spec_a, weights_a, clip_a)
    _, lb = forward_offline(spec_b, weights_b, clip_b)
    mean = (la + lb) / np.float32(2)
    return EvalResult.from_logits(
        mean, k, mode="ensemble", members=2, frames=f"{clip_a.shape[0]}+{clip_b.shape[0]}", offset=frame_offset
    )
