"""Small seeded networks and inputs for tests, sweeps and demos."""

import numpy as np

from .arch import (
    BlockSpec,
    HeadSpec,
    KernelSpec,
    LayerSpec,
    NetworkSpec,
    StemSpec,
    VideoSpec,
    emulate_trained,
    init_random_weights,
)

KERNELS = [(1, 3), (1, 5), (5, 1), (3, 3), (5, 3), (3, 1), (7, 1)]


def random_causal_spec(seed, max_blocks=3, resolution=None, classes=10, causal=True):
    """A small streamable network: <= 3 blocks, widths <= 32, S <= 32."""
    rng = np.random.default_rng(seed)
    widths = [8, 16, 24, 32]
    n_blocks = int(rng.integers(1, max_blocks + 1))
    blocks = []
    for _ in range(n_blocks):
        base = int(rng.choice(widths))
        layers = []
        for j in range(int(rng.integers(1, 3))):
            kt, ks = KERNELS[int(rng.integers(len(KERNELS)))]
            se = "causal" if causal else "global"
            se = str(rng.choice(["none", se]))
            layers.append(
                LayerSpec(
                    KernelSpec(kt, ks),
                    base,
                    int(rng.choice(widths)),
                    stride=2 if j == 0 and rng.random() < 0.7 else 1,
                    se=se,
                    causal=causal,
                )
            )
        blocks.append(BlockSpec(tuple(layers)))
    s = resolution or int(rng.choice([16, 24, 32]))
    return NetworkSpec(
        f"rand-{seed}",
        VideoSpec(16, s, 5),
        StemSpec(KernelSpec(1, 3), int(rng.choice(widths))),
        tuple(blocks),
        HeadSpec(int(rng.choice(widths)), int(rng.choice(widths)), classes),
    )


def trained_weights(spec, seed):
    return emulate_trained(init_random_weights(spec, seed), seed + 1)


def random_video(spec, frames, seed):
    v = spec.video
    rng = np.random.default_rng(seed)
    return rng.standard_normal((frames, v.resolution, v.resolution, v.channels)).astype(np.float32)
