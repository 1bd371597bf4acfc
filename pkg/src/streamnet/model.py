"""Forward pass over a :class:`NetworkSpec`.

The layer arithmetic is shared between offline (full clip) and streaming
inference. The only operations that look across frames are the depthwise
temporal convolution, squeeze-and-excitation and the head's temporal pooling;
those are delegated to a context object. :class:`OfflineContext` realizes
them with zero padding and whole-clip statistics, while the streaming
session (``streaming.py``) realizes them with stream buffers and running
CGAP states.
"""

from __future__ import annotations

import numpy as np

from .arch import NetworkSpec, Weights, check_weights, has_residual, layer_path
from .causal import (
    CgapState,
    SqueezeExciteWeights,
    balanced_padding,
    causal_padding,
    causal_se,
    cgap_many,
    non_causal_se,
)
from .tensor import (
    DTYPE,
    PaddingSpec,
    ShapeError,
    as_video,
    avg_pool_spatial,
    conv3d,
    hard_swish,
    pointwise,
    spatial_mean,
)


def se_weights(weights: Weights, prefix: str) -> SqueezeExciteWeights:
    return SqueezeExciteWeights(
        weights[f"{prefix}/se/reduce"],
        weights[f"{prefix}/se/reduce_bias"],
        weights[f"{prefix}/se/expand"],
        weights[f"{prefix}/se/expand_bias"],
    )


def _norm(x, weights, prefix):
    return x * weights[f"{prefix}/scale"] + weights[f"{prefix}/bias"]


def _conv1x1(x, kernel):
    return pointwise(x, kernel.reshape(kernel.shape[-2], kernel.shape[-1]))


def spatial_padding(k: int) -> PaddingSpec:
    p = balanced_padding(k)
    return PaddingSpec(h=p, w=p)


class OfflineContext:
    """Temporal operations over a complete clip."""

    def __init__(self, causal_pool: bool):
        self.causal_pool = causal_pool

    def depthwise(self, path, x, kernel, layer):
        pad_t = causal_padding(layer.kernel.time) if layer.causal else balanced_padding(layer.kernel.time)
        pad = spatial_padding(layer.kernel.space)
        return conv3d(x, kernel, (layer.stride,) * 2, PaddingSpec(t=pad_t, h=pad.h, w=pad.w), groups=x.shape[-1])

    def squeeze_excite(self, path, x, weights, layer):
        if layer.se == "causal":
            return causal_se(x, weights, CgapState(), 0)[0]
        return non_causal_se(x, weights)

    def pool_time(self, features):
        if self.causal_pool:
            return cgap_many(CgapState(), features)[0][-1]
        return features.mean(axis=0, dtype=np.float64).astype(DTYPE)


def run_layer(x, layer, weights, path, block_first, ctx):
    """One inverted bottleneck: expand, depthwise, SE, project, residual."""
    h = hard_swish(_norm(_conv1x1(x, weights[f"{path}/expand"]), weights, f"{path}/expand_norm"))
    h = ctx.depthwise(path, h, weights[f"{path}/depthwise"], layer)
    h = hard_swish(_norm(h, weights, f"{path}/depthwise_norm"))
    if layer.se != "none":
        h = ctx.squeeze_excite(path, h, se_weights(weights, path), layer)
    h = _norm(_conv1x1(h, weights[f"{path}/project"]), weights, f"{path}/project_norm")

    if block_first:
        skip = avg_pool_spatial(x, 3, 2) if layer.stride == 2 else x
        skip = _norm(_conv1x1(skip, weights[f"{path}/skip/conv"]), weights, f"{path}/skip/norm")
    elif has_residual(layer, x.shape[-1], False):
        skip = x
    else:
        return h
    return skip + weights[f"{path}/rezero"] * h


def stem(spec: NetworkSpec, weights: Weights, video: np.ndarray) -> np.ndarray:
    video = as_video(video)
    if video.shape[-1] != spec.video.channels:
        raise ShapeError(f"spec expects {spec.video.channels} input channels, video has {video.shape[-1]}")
    x = conv3d(video, weights["stem/conv"], (2, 2), spatial_padding(spec.stem.kernel.space))
    return hard_swish(_norm(x, weights, "stem/norm"))


def frame_features(spec: NetworkSpec, weights: Weights, video: np.ndarray, ctx) -> np.ndarray:
    """Per-frame penultimate features, shape (T, head.conv)."""
    x = stem(spec, weights, video)
    for i, j, layer in spec.layers():
        x = run_layer(x, layer, weights, layer_path(i, j), j == 0, ctx)
    x = hard_swish(_norm(_conv1x1(x, weights["head/conv"]), weights, "head/norm"))
    return spatial_mean(x)


def classify(weights: Weights, features: np.ndarray) -> np.ndarray:
    """Dense head: features (..., conv) -> logits (..., classes)."""
    h = hard_swish(pointwise(features, weights["head/hidden/kernel"], weights["head/hidden/bias"]))
    return pointwise(h, weights["head/logits/kernel"], weights["head/logits/bias"])


def forward_offline(spec: NetworkSpec, weights: Weights, video: np.ndarray):
    """Full-clip inference.

    Returns ``(frame_logits, clip_logits)`` of shapes (T, classes) and
    (classes,). Clip logits pool the frame features over time (cumulatively
    for streamable specs, globally otherwise) before the dense head.
    """
    check_weights(spec, weights)
    ctx = OfflineContext(causal_pool=spec.streamable)
    features = frame_features(spec, weights, video, ctx)
    return classify(weights, features), classify(weights, ctx.pool_time(features))
