"""Declarative network specifications, architecture files and weight init.

A network is a stem (1 x k^2 strided conv), a list of blocks of inverted
bottleneck layers, and a head (1x1x1 conv, pooling, two dense layers).
Architecture files are YAML; see ``archs/a0.arch`` for a complete example::

    name: A0
    video: {frames: 50, resolution: 172, stride: 5, channels: 3}
    defaults: {se: global, causal: false}
    stem: {kernel: 1x3x3, width: 8}
    blocks:
      - layers:
          - {kernel: 1x5x5, base: 8, expand: 40, stride: 2}
    head: {conv: 480, hidden: 2048, classes: 600}

Layer fields ``stride`` (default 1), ``se`` (``none``/``global``/``causal``)
and ``causal`` fall back to ``defaults`` when omitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .causal import balanced_padding, se_width
from .tensor import DTYPE, conv_output_size

# C-accelerated YAML when libyaml is present
_Loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)
_Dumper = getattr(yaml, "CSafeDumper", yaml.SafeDumper)

SE_MODES = ("none", "global", "causal")
KERNEL_MENU = ((1, 3), (1, 5), (1, 7), (5, 1), (7, 1), (3, 3), (5, 3))


class SpecError(ValueError):
    """An architecture violates a structural rule or cannot be parsed."""


class WeightError(ValueError):
    """Weights do not match the parameters a spec demands."""


@dataclass(frozen=True)
class VideoSpec:
    frames: int
    resolution: int
    stride: int = 5
    channels: int = 3

    def __post_init__(self):
        for name in ("frames", "resolution", "stride", "channels"):
            if getattr(self, name) < 1:
                raise SpecError(f"video.{name} must be positive")
        if self.resolution % 2:
            raise SpecError(f"video.resolution must be even, got {self.resolution}")


@dataclass(frozen=True)
class KernelSpec:
    time: int
    space: int

    def __post_init__(self):
        if self.time < 1 or self.space < 1 or self.time % 2 == 0 or self.space % 2 == 0:
            raise SpecError(f"kernel extents must be odd and positive, got {self}")

    def __str__(self):
        return f"{self.time}x{self.space}x{self.space}"

    @classmethod
    def parse(cls, text) -> "KernelSpec":
        parts = str(text).lower().split("x")
        if len(parts) != 3 or not all(p.strip().isdigit() for p in parts):
            raise SpecError(f"kernel must look like 'TxSxS', got {text!r}")
        t, h, w = (int(p) for p in parts)
        if h != w:
            raise SpecError(f"kernel spatial extents must match, got {text!r}")
        return cls(t, h)


@dataclass(frozen=True)
class LayerSpec:
    kernel: KernelSpec
    base: int
    expand: int
    stride: int = 1
    se: str = "global"
    causal: bool = False

    @property
    def temporal(self) -> bool:
        """Whether the layer mixes information across frames."""
        return self.kernel.time > 1 or self.se in ("global", "causal")

    @property
    def streamable(self) -> bool:
        return (self.kernel.time == 1 or self.causal) and self.se != "global"


@dataclass(frozen=True)
class BlockSpec:
    layers: tuple[LayerSpec, ...]


@dataclass(frozen=True)
class StemSpec:
    kernel: KernelSpec = KernelSpec(1, 3)
    width: int = 16


@dataclass(frozen=True)
class HeadSpec:
    conv: int
    hidden: int
    classes: int


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    video: VideoSpec
    stem: StemSpec
    blocks: tuple[BlockSpec, ...]
    head: HeadSpec

    def __post_init__(self):
        validate(self)

    def layers(self):
        """Yield ``(block_index, layer_index, layer)`` in execution order."""
        for i, block in enumerate(self.blocks):
            for j, layer in enumerate(block.layers):
                yield i, j, layer

    @property
    def streamable(self) -> bool:
        return not self.streaming_violations()

    def streaming_violations(self) -> list[str]:
        return [layer_path(i, j) for i, j, layer in self.layers() if not layer.streamable]

    def depths(self) -> tuple[int, ...]:
        return tuple(len(b.layers) for b in self.blocks)


def layer_path(block: int, layer: int) -> str:
    return f"block{block + 2}/layer{layer + 1}"


def validate(spec: NetworkSpec):
    if not spec.blocks:
        raise SpecError("rule 'nonempty-blocks': a network needs at least one block")
    if spec.stem.kernel.time != 1:
        raise SpecError("rule 'stem-spatial': the stem kernel must be 1 x k x k")
    _check_width("stem.width", spec.stem.width)
    for i, block in enumerate(spec.blocks):
        if not block.layers:
            raise SpecError(f"rule 'block-depth': block{i + 2} has no layers")
        for j, layer in enumerate(block.layers):
            path = layer_path(i, j)
            _check_width(f"{path}.base", layer.base)
            _check_width(f"{path}.expand", layer.expand)
            if layer.stride not in (1, 2):
                raise SpecError(f"rule 'stride-1-or-2': {path} has stride {layer.stride}")
            if layer.stride == 2 and j > 0:
                raise SpecError(f"rule 'stride-first-layer-only': {path} is strided but not first in its block")
            if layer.se not in SE_MODES:
                raise SpecError(f"rule 'se-mode': {path} has se={layer.se!r}, expected one of {SE_MODES}")
    for name in ("conv", "hidden", "classes"):
        if getattr(spec.head, name) < 1:
            raise SpecError(f"rule 'head-widths': head.{name} must be positive")
    sizes = spatial_sizes(spec)
    for n, (i, j, layer) in enumerate(spec.layers()):
        if layer.stride == 2 and sizes[n] < 2:
            raise SpecError(
                f"rule 'resolution': {layer_path(i, j)} downsamples a {sizes[n]}x{sizes[n]} map; "
                "too many strided stages for the input resolution"
            )


def _check_width(path: str, value: int):
    if value < 8 or value % 8:
        raise SpecError(f"rule 'width-multiple-of-8': {path}={value} is not a positive multiple of 8")


def downsample(size: int, kernel: int, stride: int) -> int:
    return conv_output_size(size, kernel, stride, balanced_padding(kernel))


def spatial_sizes(spec: NetworkSpec) -> list[int]:
    """Spatial side length after the stem and after every layer."""
    size = downsample(spec.video.resolution, spec.stem.kernel.space, 2)
    sizes = [size]
    for _, _, layer in spec.layers():
        size = downsample(size, layer.kernel.space, layer.stride)
        sizes.append(size)
    return sizes


def make_causal(spec: NetworkSpec) -> NetworkSpec:
    """Streaming variant: causal temporal convs, and CausalSE in place of global SE."""
    blocks = []
    for block in spec.blocks:
        layers = tuple(
            replace(l, causal=True, se="causal" if l.se == "global" else l.se) for l in block.layers
        )
        blocks.append(BlockSpec(layers))
    return replace(spec, name=f"{spec.name}-Stream", blocks=tuple(blocks))


# --------------------------------------------------------------------------
# Architecture files


def _field(mapping, key, path, kind=int, default=None):
    if not isinstance(mapping, dict):
        raise SpecError(f"field '{path}': expected a mapping, got {type(mapping).__name__}")
    if key not in mapping:
        if default is not None:
            return default
        raise SpecError(f"field '{path}.{key}': missing")
    value = mapping[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise SpecError(f"field '{path}.{key}': expected an integer, got {value!r}")
    if kind is bool and not isinstance(value, bool):
        raise SpecError(f"field '{path}.{key}': expected true/false, got {value!r}")
    if kind is str and not isinstance(value, str):
        raise SpecError(f"field '{path}.{key}': expected a string, got {value!r}")
    return value


def _kernel(mapping, path) -> KernelSpec:
    try:
        return KernelSpec.parse(_field(mapping, "kernel", path, kind=str))
    except SpecError as e:
        raise SpecError(f"field '{path}.kernel': {e}") from None


def spec_from_dict(doc) -> NetworkSpec:
    if not isinstance(doc, dict):
        raise SpecError("field '<root>': expected a mapping at the top level")
    video = doc.get("video")
    video_spec = VideoSpec(
        frames=_field(video, "frames", "video"),
        resolution=_field(video, "resolution", "video"),
        stride=_field(video, "stride", "video", default=5),
        channels=_field(video, "channels", "video", default=3),
    )
    defaults = doc.get("defaults") or {}
    default_se = _field(defaults, "se", "defaults", kind=str, default="global")
    default_causal = _field(defaults, "causal", "defaults", kind=bool, default=False)

    stem = doc.get("stem")
    stem_spec = StemSpec(_kernel(stem, "stem"), _field(stem, "width", "stem"))

    blocks_doc = doc.get("blocks")
    if blocks_doc is None:
        raise SpecError("field 'blocks': missing")
    if not isinstance(blocks_doc, list):
        raise SpecError("field 'blocks': expected a list")
    blocks = []
    for i, block in enumerate(blocks_doc):
        bpath = f"blocks[{i}]"
        layers_doc = block.get("layers") if isinstance(block, dict) else None
        if not isinstance(layers_doc, list):
            raise SpecError(f"field '{bpath}.layers': expected a list of layers")
        layers = []
        for j, layer in enumerate(layers_doc):
            lpath = f"{bpath}.layers[{j}]"
            layers.append(
                LayerSpec(
                    kernel=_kernel(layer, lpath),
                    base=_field(layer, "base", lpath),
                    expand=_field(layer, "expand", lpath),
                    stride=_field(layer, "stride", lpath, default=1),
                    se=_field(layer, "se", lpath, kind=str, default=default_se),
                    causal=_field(layer, "causal", lpath, kind=bool, default=default_causal),
                )
            )
        blocks.append(BlockSpec(tuple(layers)))

    head = doc.get("head")
    head_spec = HeadSpec(
        conv=_field(head, "conv", "head"),
        hidden=_field(head, "hidden", "head"),
        classes=_field(head, "classes", "head"),
    )
    name = doc.get("name", "unnamed")
    return NetworkSpec(str(name), video_spec, stem_spec, tuple(blocks), head_spec)


def parse_architecture(text: str) -> NetworkSpec:
    """Parse and validate an architecture file's contents."""
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise SpecError(f"syntax error at {where}{getattr(e, 'problem', e)}") from None
    return spec_from_dict(doc)


def spec_to_dict(spec: NetworkSpec) -> dict:
    v = spec.video
    return {
        "name": spec.name,
        "video": {"frames": v.frames, "resolution": v.resolution, "stride": v.stride, "channels": v.channels},
        "stem": {"kernel": str(spec.stem.kernel), "width": spec.stem.width},
        "blocks": [
            {
                "layers": [
                    {
                        "kernel": str(l.kernel),
                        "base": l.base,
                        "expand": l.expand,
                        "stride": l.stride,
                        "se": l.se,
                        "causal": l.causal,
                    }
                    for l in block.layers
                ]
            }
            for block in spec.blocks
        ],
        "head": {"conv": spec.head.conv, "hidden": spec.head.hidden, "classes": spec.head.classes},
    }


def dump_architecture(spec: NetworkSpec) -> str:
    return yaml.dump(spec_to_dict(spec), Dumper=_Dumper, sort_keys=False, default_flow_style=None)


ARCH_DIR = Path(__file__).parent / "archs"


def load_architecture(path_or_name: str | Path) -> NetworkSpec:
    """Load an architecture file, a shipped file by stem (``a0-tiny``) or a builtin name."""
    path = Path(path_or_name)
    if path.is_file():
        return parse_architecture(path.read_text(encoding="utf-8"))
    shipped = ARCH_DIR / f"{path.name.removesuffix('.arch')}.arch"
    if shipped.is_file():
        return parse_architecture(shipped.read_text(encoding="utf-8"))
    try:
        return builtin(str(path_or_name))
    except KeyError:
        raise SpecError(f"no architecture file or builtin named {str(path_or_name)!r}") from None


# --------------------------------------------------------------------------
# Builtin architectures (K600, 600 classes)


def _block(*rows, stride=2):
    layers = []
    for j, (kt, ks, base, expand) in enumerate(rows):
        layers.append(LayerSpec(KernelSpec(kt, ks), base, expand, stride if j == 0 else 1))
    return BlockSpec(tuple(layers))


def _a0() -> NetworkSpec:
    return NetworkSpec(
        "A0",
        VideoSpec(50, 172, 5),
        StemSpec(KernelSpec(1, 3), 8),
        (
            _block((1, 5, 8, 40)),
            _block((5, 3, 32, 80), (3, 3, 32, 80), (3, 3, 32, 80)),
            _block((5, 3, 56, 184), (3, 3, 56, 112), (3, 3, 56, 184)),
            _block((5, 3, 56, 184), (3, 3, 56, 184), (3, 3, 56, 184), (3, 3, 56, 184), stride=1),
            _block((5, 3, 104, 344), (1, 5, 104, 280), (1, 5, 104, 280), (1, 5, 104, 344)),
        ),
        HeadSpec(480, 2048, 600),
    )


def _a2() -> NetworkSpec:
    return NetworkSpec(
        "A2",
        VideoSpec(50, 224, 5),
        StemSpec(KernelSpec(1, 3), 16),
        (
            _block((1, 5, 16, 40), (3, 3, 16, 40), (3, 3, 16, 64)),
            _block((3, 3, 40, 96), (3, 3, 40, 120), (3, 3, 40, 96), (3, 3, 40, 96), (3, 3, 40, 120)),
            _block((5, 3, 72, 240), (3, 3, 72, 160), (3, 3, 72, 240), (3, 3, 72, 192), (3, 3, 72, 240)),
            _block(
                (5, 3, 72, 240), (3, 3, 72, 240), (3, 3, 72, 240), (3, 3, 72, 240), (1, 5, 72, 144), (3, 3, 72, 240),
                stride=1,
            ),
            _block(
                (5, 3, 144, 480), (1, 5, 144, 384), (1, 5, 144, 384), (1, 5, 144, 480), (1, 5, 144, 480),
                (3, 3, 144, 480), (1, 3, 144, 576),
            ),
        ),
        HeadSpec(640, 2048, 600),
    )


_BUILTINS = {"A0": _a0, "A2": _a2}


def builtin(name: str, causal: bool = False) -> NetworkSpec:
    """The A0 or A2 network; ``causal=True`` (or an ``-Stream`` suffix) gives the streaming variant."""
    key = name.upper()
    if key.endswith("-STREAM"):
        key, causal = key[: -len("-STREAM")], True
    if key not in _BUILTINS:
        raise KeyError(f"unknown builtin architecture {name!r}; known: {sorted(_BUILTINS)}")
    spec = _BUILTINS[key]()
    return make_causal(spec) if causal else spec


# --------------------------------------------------------------------------
# Parameters

Weights = dict  # name -> float32 ndarray


def has_residual(layer: LayerSpec, in_channels: int, block_first: bool) -> bool:
    return block_first or (layer.stride == 1 and in_channels == layer.base)


def parameter_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    """Every parameter the network needs, in a fixed order."""
    shapes: dict[str, tuple[int, ...]] = {}

    def norm(prefix, c):
        shapes[f"{prefix}/scale"] = (c,)
        shapes[f"{prefix}/bias"] = (c,)

    c_in = spec.video.channels
    ks = spec.stem.kernel.space
    shapes["stem/conv"] = (1, ks, ks, c_in, spec.stem.width)
    norm("stem/norm", spec.stem.width)
    c_in = spec.stem.width
    for i, j, layer in spec.layers():
        p = layer_path(i, j)
        ce, cb = layer.expand, layer.base
        shapes[f"{p}/expand"] = (1, 1, 1, c_in, ce)
        norm(f"{p}/expand_norm", ce)
        shapes[f"{p}/depthwise"] = (layer.kernel.time, layer.kernel.space, layer.kernel.space, 1, ce)
        norm(f"{p}/depthwise_norm", ce)
        if layer.se != "none":
            cse = se_width(ce)
            shapes[f"{p}/se/reduce"] = (ce, cse)
            shapes[f"{p}/se/reduce_bias"] = (cse,)
            shapes[f"{p}/se/expand"] = (cse, ce)
            shapes[f"{p}/se/expand_bias"] = (ce,)
        shapes[f"{p}/project"] = (1, 1, 1, ce, cb)
        norm(f"{p}/project_norm", cb)
        if j == 0:
            shapes[f"{p}/skip/conv"] = (1, 1, 1, c_in, cb)
            norm(f"{p}/skip/norm", cb)
        if has_residual(layer, c_in, j == 0):
            shapes[f"{p}/rezero"] = ()
        c_in = cb
    h = spec.head
    shapes["head/conv"] = (1, 1, 1, c_in, h.conv)
    norm("head/norm", h.conv)
    shapes["head/hidden/kernel"] = (h.conv, h.hidden)
    shapes["head/hidden/bias"] = (h.hidden,)
    shapes["head/logits/kernel"] = (h.hidden, h.classes)
    shapes["head/logits/bias"] = (h.classes,)
    return shapes


def init_random_weights(spec: NetworkSpec, seed: int) -> Weights:
    """Fan-in uniform init; biases and norm shifts 0, norm scales 1, ReZero 0."""
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in parameter_shapes(spec).items():
        leaf = name.rsplit("/", 1)[-1]
        if leaf == "rezero" or leaf.endswith("bias"):
            value = np.zeros(shape)
        elif leaf == "scale":
            value = np.ones(shape)
        else:
            fan_in = math.prod(shape[:-1])
            limit = math.sqrt(6.0 / fan_in)
            value = rng.uniform(-limit, limit, size=shape)
        weights[name] = value.astype(DTYPE)
    return weights


def emulate_trained(weights: Weights, seed: int) -> Weights:
    """Perturb the parameters a fresh init leaves degenerate.

    Fresh ReZero scalars are zero, which silences every residual branch and
    would make streaming checks vacuous. This draws ReZero scalars, norm
    affines and biases from small ranges typical of a trained network.
    """
    rng = np.random.default_rng(seed)
    out = {}
    for name, value in weights.items():
        leaf = name.rsplit("/", 1)[-1]
        if leaf == "rezero":
            value = rng.uniform(0.2, 0.8, size=value.shape)
        elif leaf == "scale":
            value = rng.uniform(0.5, 1.5, size=value.shape)
        elif leaf.endswith("bias"):
            value = rng.uniform(-0.2, 0.2, size=value.shape)
        out[name] = np.asarray(value, dtype=DTYPE)
    return out


def check_weights(spec: NetworkSpec, weights: Weights):
    expected = parameter_shapes(spec)
    missing = [n for n in expected if n not in weights]
    extra = [n for n in weights if n not in expected]
    if missing or extra:
        raise WeightError(f"weights do not match spec {spec.name!r}: missing {missing[:5]}, unexpected {extra[:5]}")
    for name, shape in expected.items():
        if tuple(np.shape(weights[name])) != shape:
            raise WeightError(f"parameter {name!r} has shape {np.shape(weights[name])}, spec needs {shape}")
