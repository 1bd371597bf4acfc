"""Online inference: push subclips of any length, read per-frame logits.

A session owns one stream buffer per causal temporal convolution (holding
``k_t - 1`` frames of that layer's depthwise input), one CGAP state per
CausalSE layer and one for the head. Its state size does not depend on how
many frames have been pushed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .arch import NetworkSpec, Weights, check_weights, layer_path, spatial_sizes
from .causal import CgapState, StreamBuffer, causal_se, cgap_many, stream_buffer_apply
from .model import classify, forward_offline, frame_features, spatial_padding
from .tensor import PaddingSpec, ShapeError, as_video, conv3d


class StreamingUnsupported(ValueError):
    """The network has a temporal layer that looks at future frames."""


class _SessionContext:
    def __init__(self, session: "StreamingSession"):
        self.session = session

    def depthwise(self, path, x, kernel, layer):
        pad = spatial_padding(layer.kernel.space)
        stride = (layer.stride,) * 2
        groups = x.shape[-1]
        if layer.kernel.time == 1:
            return conv3d(x, kernel, stride, pad, groups=groups)

        def op(joined):
            return conv3d(joined, kernel, stride, pad, groups=groups)

        out, self.session.buffers[path] = stream_buffer_apply(self.session.buffers[path], x, op)
        return out

    def squeeze_excite(self, path, x, weights, layer):
        s = self.session
        out, s.se_states[path] = causal_se(x, weights, s.se_states[path], s.frames_seen)
        return out


class StreamingSession:
    """Stateful frame-by-frame inference for a streamable network."""

    def __init__(self, spec: NetworkSpec, weights: Weights):
        bad = spec.streaming_violations()
        if bad:
            raise StreamingUnsupported(
                f"{spec.name}: layer(s) {', '.join(bad)} aggregate future frames; streaming needs causal layers"
            )
        check_weights(spec, weights)
        self.spec = spec
        self.weights = weights
        self.reset()

    def reset(self):
        """Zero every buffer and forget every frame."""
        sizes = spatial_sizes(self.spec)
        self.buffers: dict[str, StreamBuffer] = {}
        self.se_states: dict[str, CgapState] = {}
        for n, (i, j, layer) in enumerate(self.spec.layers()):
            path = layer_path(i, j)
            if layer.kernel.time > 1:
                frame = (sizes[n], sizes[n], layer.expand)
                self.buffers[path] = StreamBuffer.zeros(layer.kernel.time - 1, frame)
            if layer.se == "causal":
                self.se_states[path] = CgapState()
        self.head_state = CgapState()
        self.frames_seen = 0

    def push(self, clip: np.ndarray) -> np.ndarray:
        """Feed ``T_clip >= 1`` new frames; return their (T_clip, classes) logits."""
        clip = as_video(clip)
        v = self.spec.video
        if clip.shape[1:] != (v.resolution, v.resolution, v.channels):
            raise ShapeError(
                f"clip frames {clip.shape[1:]} do not match spec input {(v.resolution, v.resolution, v.channels)}"
            )
        features = frame_features(self.spec, self.weights, clip, _SessionContext(self))
        _, self.head_state = cgap_many(self.head_state, features)
        self.frames_seen += clip.shape[0]
        return classify(self.weights, features)

    def predict(self) -> np.ndarray:
        """Clip logits from the cumulative mean of every frame feature so far."""
        if self.frames_seen == 0:
            raise ValueError("no frames have been pushed")
        mean = self.head_state.running_sum / np.float32(self.head_state.count)
        return classify(self.weights, mean)

    def state_nbytes(self) -> int:
        """Bytes of persistent state held between pushes."""
        return (
            sum(b.nbytes for b in self.buffers.values())
            + sum(s.nbytes for s in self.se_states.values())
            + self.head_state.nbytes
        )

    def buffer_widths(self) -> dict[str, int]:
        return {path: buf.b for path, buf in self.buffers.items()}


@dataclass(frozen=True)
class ClipPlan:
    """How a video is split into consecutive non-overlapping subclips."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes or min(self.sizes) < 1:
            raise ValueError(f"subclip sizes must be >= 1, got {self.sizes}")

    @classmethod
    def uniform(cls, t_clip: int, total: int) -> "ClipPlan":
        """``ceil(total / t_clip)`` pushes; the last one may be shorter."""
        if t_clip < 1:
            raise ValueError(f"t_clip must be >= 1, got {t_clip}")
        n = math.ceil(total / t_clip)
        return cls(tuple(min(t_clip, total - k * t_clip) for k in range(n)))

    @property
    def t_clip(self) -> int:
        return self.sizes[0]

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def label(self) -> str:
        if len(set(self.sizes[:-1])) <= 1 and self.sizes[-1] <= self.sizes[0]:
            return f"T_clip={self.t_clip} x{self.n}"
        return "split(" + ",".join(map(str, self.sizes)) + ")"


def stream_video(session: StreamingSession, video: np.ndarray, plan: ClipPlan, fault=None) -> np.ndarray:
    """Push ``video`` according to ``plan``; return all frame logits stacked."""
    video = as_video(video)
    if plan.total != video.shape[0]:
        raise ValueError(f"plan covers {plan.total} frames, video has {video.shape[0]}")
    outputs = []
    start = 0
    for k, size in enumerate(plan.sizes):
        outputs.append(session.push(video[start : start + size]))
        start += size
        if fault is not None:
            fault(session, k)
    return np.concatenate(outputs)


@dataclass
class PlanResult:
    plan: ClipPlan
    max_frame_delta: float
    clip_delta: float
    passed: bool


@dataclass
class EquivalenceReport:
    tolerance: float
    results: list[PlanResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def format(self) -> str:
        lines = [f"streaming vs offline, tolerance {self.tolerance:g}"]
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            lines.append(
                f"  {status}  {r.plan.label():<20} max|frame delta|={r.max_frame_delta:.3e}"
                f"  |clip delta|={r.clip_delta:.3e}"
            )
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def verify_equivalence(
    spec: NetworkSpec,
    weights: Weights,
    video: np.ndarray,
    plans: Sequence[ClipPlan],
    tolerance: float = 1e-5,
    fault: Callable[[StreamingSession, int], None] | None = None,
) -> EquivalenceReport:
    """Compare streamed logits under each plan to one offline pass.

    ``fault(session, push_index)`` runs after every push; tests use it to
    corrupt state and check that the report catches it.
    """
    frame_ref, clip_ref = forward_offline(spec, weights, video)
    report = EquivalenceReport(tolerance)
    for plan in plans:
        session = StreamingSession(spec, weights)
        frames = stream_video(session, video, plan, fault)
        frame_delta = float(np.max(np.abs(frames - frame_ref)))
        clip_delta = float(np.max(np.abs(session.predict() - clip_ref)))
        passed = frame_delta <= tolerance and clip_delta <= tolerance
        report.results.append(PlanResult(plan, frame_delta, clip_delta, passed))
    return report
