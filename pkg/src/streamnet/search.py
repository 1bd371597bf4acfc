"""Search space as data, compound scaling, and a seeded random sampler.

The base space targets 50 x 224^2 input at 5 fps. Scaling by ``phi`` multiplies
depth by ``1.36^phi``, widths by ``1.18^phi``, resolution by ``1.16^phi`` and
frame rate by ``1.24^phi``. The sampler draws every architectural decision
uniformly and independently; it stands in for a learned controller.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .arch import (
    KERNEL_MENU,
    BlockSpec,
    HeadSpec,
    KernelSpec,
    LayerSpec,
    NetworkSpec,
    StemSpec,
    VideoSpec,
)
from .units import round_half_up, round_to_multiple

WIDTH_MULTIPLIERS = (0.75, 1.0, 1.25)
EXPAND_MULTIPLIERS = (1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
# Blocks that do not downsample spatially (0-based over searched blocks).
UNSTRIDED_BLOCKS = (3,)


@dataclass(frozen=True)
class ScalingCoefficients:
    phi: float = 0.0
    alpha: float = 1.36
    beta: float = 1.18
    gamma: float = 1.16
    delta: float = 1.24

    @property
    def depth(self) -> float:
        return self.alpha**self.phi

    @property
    def width(self) -> float:
        return self.beta**self.phi

    @property
    def resolution(self) -> float:
        return self.gamma**self.phi

    @property
    def frame_rate(self) -> float:
        return self.delta**self.phi


def coefficient_product(coeffs: ScalingCoefficients = ScalingCoefficients()) -> float:
    """``alpha * beta^2 * gamma^2 * delta``: expected cost growth per unit of phi."""
    return coeffs.alpha * coeffs.beta**2 * coeffs.gamma**2 * coeffs.delta


def coefficient_grid(low: float = 1.05, high: float = 1.40, step: float = 0.05) -> list[float]:
    n = round_half_up((high - low) / step)
    return [round(low + k * step, 10) for k in range(n + 1)]


def coefficient_candidates(target: float = 4.0, tolerance: float = 0.25) -> list[ScalingCoefficients]:
    """Grid combinations whose product lies within ``tolerance`` of ``target``.

    Choosing among them requires training sampled models per candidate, which
    this package does not do; the list is the search's input, not its answer.
    """
    grid = coefficient_grid()
    out = []
    for a, b, g, d in itertools.product(grid, repeat=4):
        c = ScalingCoefficients(1.0, a, b, g, d)
        if abs(coefficient_product(c) - target) <= tolerance:
            out.append(c)
    return out


@dataclass(frozen=True)
class SearchSpaceSpec:
    """Menus for every architectural decision.

    ``widths[0]`` is the stem width; ``widths[1:]`` are the per-block base
    widths before the 0.75/1/1.25 multipliers.
    """

    video: VideoSpec
    widths: tuple[int, ...]
    depth_range: tuple[int, int]
    head_conv: int
    head_hidden: int
    classes: int = 600
    kernels: tuple[tuple[int, int], ...] = KERNEL_MENU
    width_multipliers: tuple[float, ...] = WIDTH_MULTIPLIERS
    expand_multipliers: tuple[float, ...] = EXPAND_MULTIPLIERS
    se_searchable: bool = True
    clamped: tuple[str, ...] = ()

    @property
    def n_blocks(self) -> int:
        return len(self.widths) - 1

    def width_menu(self, block: int) -> tuple[int, ...]:
        """Distinct rounded widths for block ``block`` (0 = stem)."""
        base = self.widths[block]
        return tuple(sorted({max(8, round_to_multiple(base * m)) for m in self.width_multipliers}))

    def to_dict(self) -> dict:
        v = self.video
        return {
            "video": {"frames": v.frames, "resolution": v.resolution, "stride": v.stride, "channels": v.channels},
            "stem": {"kernel": "1x3x3", "width": list(self.width_menu(0))},
            "blocks": [
                {
                    "depth": list(range(self.depth_range[0], self.depth_range[1] + 1)),
                    "base": list(self.width_menu(i)),
                    "stride": 1 if (i - 1) in UNSTRIDED_BLOCKS else 2,
                }
                for i in range(1, len(self.widths))
            ],
            "layer": {
                "kernel": [f"{t}x{s}x{s}" for t, s in self.kernels],
                "expand_multiplier": list(self.expand_multipliers),
                "se": ["none", "global"] if self.se_searchable else ["global"],
            },
            "head": {"conv": self.head_conv, "hidden": self.head_hidden, "classes": self.classes},
            "clamped": list(self.clamped),
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def base_search_space() -> SearchSpaceSpec:
    return SearchSpaceSpec(
        video=VideoSpec(frames=50, resolution=224, stride=5),
        widths=(16, 24, 48, 96, 96, 192),
        depth_range=(1, 10),
        head_conv=512,
        head_hidden=2048,
    )


def scale_search_space(space: SearchSpaceSpec, phi: float, coeffs: ScalingCoefficients | None = None) -> SearchSpaceSpec:
    """Scale depth, widths, resolution and frame rate by the phi-th power of the coefficients.

    Widths and resolution round to the nearest multiple of 8, depth bounds and
    fps to the nearest integer. The clip keeps its duration, so the frame
    count follows the frame rate. Values that would round below their minimum
    are clamped and named in ``clamped``.
    """
    c = replace(coeffs or ScalingCoefficients(), phi=phi)
    clamped = []

    def mult8(x, what):
        r = round_to_multiple(x)
        if r < 8:
            clamped.append(what)
            return 8
        return r

    def count(x, what):
        r = round_half_up(x)
        if r < 1:
            clamped.append(what)
            return 1
        return r

    lo, hi = space.depth_range
    depth = (count(lo * c.depth, "depth_min"), count(hi * c.depth, "depth_max"))
    depth = (depth[0], max(depth))
    stride = count(space.video.stride * c.frame_rate, "stride")
    frames = count(space.video.frames * stride / space.video.stride, "frames")
    video = VideoSpec(frames, mult8(space.video.resolution * c.resolution, "resolution"), stride, space.video.channels)
    widths = tuple(mult8(w * c.width, f"widths[{k}]") for k, w in enumerate(space.widths))
    return replace(space, video=video, widths=widths, depth_range=depth, clamped=tuple(clamped))


def sample_architecture(
    space: SearchSpaceSpec, seed: int, causal: bool = False, name: str | None = None
) -> NetworkSpec:
    """Draw one network uniformly from ``space``.

    The first layer of every block downsamples except the fourth block's, so
    five strided stages (stem included) take 224^2 down to 7^2.
    """
    rng = np.random.default_rng(seed)

    def pick(options):
        return options[int(rng.integers(len(options)))]

    se_menu = ("none", "global") if space.se_searchable else ("global",)
    stem_width = pick(space.width_menu(0))
    blocks = []
    for b in range(1, len(space.widths)):
        base = pick(space.width_menu(b))
        depth = int(rng.integers(space.depth_range[0], space.depth_range[1] + 1))
        layers = []
        for j in range(depth):
            kt, ks = pick(space.kernels)
            expand = max(8, round_to_multiple(base * pick(space.expand_multipliers)))
            se = pick(se_menu)
            stride = 2 if j == 0 and (b - 1) not in UNSTRIDED_BLOCKS else 1
            if causal and se == "global":
                se = "causal"
            layers.append(LayerSpec(KernelSpec(kt, ks), base, expand, stride, se, causal))
        blocks.append(BlockSpec(tuple(layers)))
    return NetworkSpec(
        name or f"sample-{seed}",
        space.video,
        StemSpec(KernelSpec(1, 3), stem_width),
        tuple(blocks),
        HeadSpec(space.head_conv, space.head_hidden, space.classes),
    )
