"""Analytical FLOPs and activation-memory accounting.

One multiply-accumulate counts as one FLOP. Convolution MACs are
``output_elements * k_t * k_h * k_w * C_in_per_group`` (padded taps included);
dense layers cost ``in * out``; fused norms, pooling sums, SE gating and
residual adds cost one MAC per output element.

Memory is activation memory only: for each op, input plus output
activations for the frames in flight, plus whatever state persists between
pushes in streaming mode. Peak memory is the maximum over ops.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .arch import LayerSpec, NetworkSpec, VideoSpec, downsample, has_residual, layer_path
from .causal import balanced_padding, se_width

BYTES = 4  # float32


@dataclass(frozen=True)
class CostRow:
    """One op of the network at a given frame count.

    ``input_shape`` / ``output_shape`` are (T, H, W, C); for dense ops H = W = 1.
    ``conv`` carries (k_t, k_h, k_w, C_in_per_group, stride, pad_hw) for convs.
    """

    name: str
    kind: str
    input_shape: tuple[int, int, int, int]
    output_shape: tuple[int, int, int, int]
    macs: int
    params: int
    conv: tuple | None = None

    @property
    def activation_bytes(self) -> int:
        return math.prod(self.output_shape) * BYTES

    def frame_bytes(self) -> int:
        """Input plus output bytes for one frame."""
        i, o = self.input_shape, self.output_shape
        return (math.prod(i[1:]) + math.prod(o[1:])) * BYTES


def conv_macs(output_shape, kernel, cin_per_group: int) -> int:
    return math.prod(output_shape) * math.prod(kernel) * cin_per_group


def _conv_row(name, in_shape, cout, kernel, groups=1, stride=1, kind="conv") -> CostRow:
    t, h, w, cin = in_shape
    kt, kh, kw = kernel
    pad = balanced_padding(kh)
    ho = downsample(h, kh, stride)
    wo = downsample(w, kw, stride)
    out = (t, ho, wo, cout)
    cin_g = cin // groups
    params = kt * kh * kw * cin_g * cout if kind == "conv" else 0
    return CostRow(name, kind, in_shape, out, conv_macs(out, kernel, cin_g), params, (kt, kh, kw, cin_g, stride, pad))


def _elementwise(name, kind, shape, params=0) -> CostRow:
    return CostRow(name, kind, shape, shape, math.prod(shape), params)


def _norm_row(name, shape) -> CostRow:
    return _elementwise(name, "norm", shape, 2 * shape[-1])


def _dense_row(name, n_in, n_out, times=1, bias=True) -> CostRow:
    return CostRow(name, "dense", (times, 1, 1, n_in), (times, 1, 1, n_out), times * n_in * n_out,
                   n_in * n_out + (n_out if bias else 0))


def _se_rows(name, shape, mode) -> list[CostRow]:
    t, h, w, c = shape
    cse = se_width(c)
    # Global SE squeezes once; CausalSE projects the cumulative squeeze every frame.
    times = t if mode == "causal" else 1
    rows = [CostRow(f"{name}/squeeze", "pool", shape, (times, 1, 1, c), t * h * w * c, 0)]
    if mode == "causal":
        rows.append(_elementwise(f"{name}/cgap_posenc", "elementwise", (t, 1, 1, c)))
    rows += [
        _dense_row(f"{name}/reduce", c, cse, times),
        _dense_row(f"{name}/expand", cse, c, times),
        _elementwise(f"{name}/gate", "elementwise", shape),
    ]
    return rows


def layer_rows(layer: LayerSpec, in_shape, path: str = "layer", block_first: bool = False) -> list[CostRow]:
    t, h, w, cin = in_shape
    ce, cb = layer.expand, layer.base
    k = (layer.kernel.time, layer.kernel.space, layer.kernel.space)
    rows = [_conv_row(f"{path}/expand", in_shape, ce, (1, 1, 1))]
    rows.append(_norm_row(f"{path}/expand_norm", rows[-1].output_shape))
    rows.append(_conv_row(f"{path}/depthwise", rows[-1].output_shape, ce, k, groups=ce, stride=layer.stride))
    mid = rows[-1].output_shape
    rows.append(_norm_row(f"{path}/depthwise_norm", mid))
    if layer.se != "none":
        rows += _se_rows(f"{path}/se", mid, layer.se)
    rows.append(_conv_row(f"{path}/project", mid, cb, (1, 1, 1)))
    out = rows[-1].output_shape
    rows.append(_norm_row(f"{path}/project_norm", out))
    if block_first:
        skip_in = in_shape
        if layer.stride == 2:
            rows.append(_conv_row(f"{path}/skip/pool", in_shape, cin, (1, 3, 3), groups=cin, stride=2, kind="pool"))
            skip_in = rows[-1].output_shape
        rows.append(_conv_row(f"{path}/skip/conv", skip_in, cb, (1, 1, 1)))
        rows.append(_norm_row(f"{path}/skip/norm", out))
    if has_residual(layer, cin, block_first):
        rows.append(_elementwise(f"{path}/rezero_add", "elementwise", out, 1))
    return rows


@dataclass(frozen=True)
class LayerCost:
    macs: int
    params: int
    activation_bytes: int
    output_shape: tuple[int, int, int, int]


def layer_cost(layer: LayerSpec, in_shape, block_first: bool = False) -> LayerCost:
    rows = layer_rows(layer, tuple(in_shape), block_first=block_first)
    return LayerCost(
        sum(r.macs for r in rows),
        sum(r.params for r in rows),
        sum(r.activation_bytes for r in rows),
        rows[-1].output_shape,
    )


def network_rows(spec: NetworkSpec, frames: int, resolution: int | None = None) -> list[CostRow]:
    """Every op of ``spec`` on a ``frames x resolution^2`` input, head included."""
    s = resolution or spec.video.resolution
    shape = (frames, s, s, spec.video.channels)
    ks = spec.stem.kernel.space
    rows = [_conv_row("stem/conv", shape, spec.stem.width, (1, ks, ks), stride=2)]
    rows.append(_norm_row("stem/norm", rows[-1].output_shape))
    shape = rows[-1].output_shape
    for i, j, layer in spec.layers():
        lr = layer_rows(layer, shape, layer_path(i, j), j == 0)
        rows += lr
        shape = lr[-1].output_shape
    h = spec.head
    rows.append(_conv_row("head/conv", shape, h.conv, (1, 1, 1)))
    rows.append(_norm_row("head/norm", rows[-1].output_shape))
    t = frames
    rows.append(CostRow("head/spatial_pool", "pool", rows[-1].output_shape, (t, 1, 1, h.conv),
                        math.prod(rows[-1].output_shape), 0))
    rows.append(CostRow("head/temporal_pool", "pool", (t, 1, 1, h.conv), (1, 1, 1, h.conv), t * h.conv, 0))
    rows.append(_dense_row("head/hidden", h.conv, h.hidden))
    rows.append(_dense_row("head/logits", h.hidden, h.classes))
    return rows


def network_macs(spec: NetworkSpec, frames: int | None = None, resolution: int | None = None) -> int:
    return sum(r.macs for r in network_rows(spec, frames or spec.video.frames, resolution))


def network_flops(spec: NetworkSpec, video: VideoSpec | None = None) -> float:
    """GFLOPs (billions of MACs) to classify one whole video."""
    video = video or spec.video
    return network_macs(spec, video.frames, video.resolution) / 1e9


def parameter_count(spec: NetworkSpec) -> int:
    return sum(r.params for r in network_rows(spec, 1))


def ensemble_flops(spec_a: NetworkSpec, spec_b: NetworkSpec, video: VideoSpec | None = None, offset: int = 1) -> float:
    """Two half-frame-rate members: A on even frames, B on frames offset, offset+2, ..."""
    video = video or spec_a.video
    n_a = len(range(0, video.frames, 2))
    n_b = len(range(offset, video.frames, 2))
    return (network_macs(spec_a, n_a, video.resolution) + network_macs(spec_b, n_b, video.resolution)) / 1e9


# --------------------------------------------------------------------------
# Evaluation modes and memory


@dataclass(frozen=True)
class Mode:
    """single: one pass over all T frames. multi: ``clips`` windows of
    ``t_clip`` frames, consecutive windows sharing ``overlap`` frames.
    stream: non-overlapping pushes of ``t_clip`` frames through buffers."""

    kind: str
    t_clip: int = 0
    clips: int = 1
    overlap: int = 0

    @classmethod
    def single(cls):
        return cls("single")

    @classmethod
    def multi(cls, clips: int, t_clip: int, overlap: int = 0):
        if not 0 <= overlap < t_clip:
            raise ValueError(f"overlap must lie in [0, t_clip), got {overlap}")
        return cls("multi", t_clip, clips, overlap)

    @classmethod
    def stream(cls, t_clip: int = 1):
        return cls("stream", t_clip)

    def __post_init__(self):
        if self.kind not in ("single", "multi", "stream"):
            raise ValueError(f"unknown evaluation mode {self.kind!r}")
        if self.kind != "single" and self.t_clip < 1:
            raise ValueError("t_clip must be >= 1")

    def label(self) -> str:
        if self.kind == "single":
            return "single_clip"
        if self.kind == "multi":
            return f"multi_clip(n={self.clips},T_clip={self.t_clip},overlap={self.overlap})"
        return f"streaming(T_clip={self.t_clip})"

    def coverage(self) -> int:
        """Distinct frames covered by a multi-clip layout."""
        return self.t_clip + (self.clips - 1) * (self.t_clip - self.overlap)


def persistent_bytes(spec: NetworkSpec, resolution: int | None = None) -> int:
    """State a streaming session keeps between pushes: buffers plus CGAP sums."""
    if not spec.streamable:
        bad = spec.streaming_violations()
        raise ValueError(f"{spec.name} is not streamable: {len(bad)} non-causal temporal layer(s), first {bad[0]}")
    s = resolution or spec.video.resolution
    size = downsample(s, spec.stem.kernel.space, 2)
    total = spec.head.conv * BYTES
    for _, _, layer in spec.layers():
        if layer.kernel.time > 1:
            total += (layer.kernel.time - 1) * size * size * layer.expand * BYTES
        if layer.se == "causal":
            total += layer.expand * BYTES
        size = downsample(size, layer.kernel.space, layer.stride)
    return total


def peak_memory(spec: NetworkSpec, video: VideoSpec | None, mode: Mode) -> int:
    video = video or spec.video
    rows = network_rows(spec, 1, video.resolution)
    per_frame = max(r.frame_bytes() for r in rows)
    if mode.kind == "single":
        return per_frame * video.frames
    if mode.kind == "multi":
        return per_frame * mode.t_clip
    return per_frame * mode.t_clip + persistent_bytes(spec, video.resolution)


def mode_flops(spec: NetworkSpec, video: VideoSpec | None, mode: Mode) -> float:
    video = video or spec.video
    if mode.kind == "multi":
        return mode.clips * network_macs(spec, mode.t_clip, video.resolution) / 1e9
    return network_flops(spec, video)


@dataclass
class CostReport:
    spec_name: str
    video: VideoSpec
    rows: list[CostRow]
    gflops_per_video: float
    params: int
    peak_memory_bytes: dict[str, int] = field(default_factory=dict)
    mode_gflops: dict[str, float] = field(default_factory=dict)

    def to_text(self) -> str:
        v = self.video
        lines = [
            f"{self.spec_name}: {v.frames}x{v.resolution}^2 input, stride {v.stride}",
            f"{'op':<34}{'output':>22}{'MACs':>15}{'params':>11}{'act bytes':>13}",
        ]
        for r in self.rows:
            shape = "x".join(map(str, r.output_shape))
            lines.append(f"{r.name:<34}{shape:>22}{r.macs:>15,}{r.params:>11,}{r.activation_bytes:>13,}")
        lines.append(f"total GFLOPs per video: {self.gflops_per_video:.4f}")
        lines.append(f"total params: {self.params:,}")
        for label, peak in self.peak_memory_bytes.items():
            lines.append(f"peak memory {label}: {peak:,} bytes ({peak / 2**20:.2f} MiB)"
                         f", {self.mode_gflops[label]:.4f} GFLOPs")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec_name,
            "video": asdict(self.video),
            "gflops_per_video": self.gflops_per_video,
            "params": self.params,
            "peak_memory_bytes": self.peak_memory_bytes,
            "mode_gflops": self.mode_gflops,
            "rows": [
                {
                    "name": r.name,
                    "kind": r.kind,
                    "output_shape": list(r.output_shape),
                    "macs": r.macs,
                    "params": r.params,
                    "activation_bytes": r.activation_bytes,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def cost_report(spec: NetworkSpec, video: VideoSpec | None = None, modes=(Mode.single(),)) -> CostReport:
    video = video or spec.video
    rows = network_rows(spec, video.frames, video.resolution)
    report = CostReport(
        spec.name,
        video,
        rows,
        sum(r.macs for r in rows) / 1e9,
        sum(r.params for r in network_rows(spec, 1, video.resolution)),
    )
    for mode in modes:
        report.peak_memory_bytes[mode.label()] = peak_memory(spec, video, mode)
        report.mode_gflops[mode.label()] = mode_flops(spec, video, mode)
    return report
