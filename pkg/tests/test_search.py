import numpy as np
import pytest

from oracles import nearest_multiple_of_8
from streamnet.arch import KERNEL_MENU, dump_architecture, init_random_weights, parse_architecture
from streamnet.cost import network_flops
from streamnet.model import forward_offline
from streamnet.search import (
    ScalingCoefficients,
    base_search_space,
    coefficient_candidates,
    coefficient_product,
    sample_architecture,
    scale_search_space,
)
from streamnet.units import round_to_multiple


def test_base_space_values():
    space = base_search_space()
    assert space.widths == (16, 24, 48, 96, 96, 192)
    assert (space.video.frames, space.video.resolution, space.video.stride) == (50, 224, 5)
    assert (space.head_conv, space.head_hidden) == (512, 2048)
    assert len(space.kernels) == 7 and set(space.kernels) == set(KERNEL_MENU)
    assert space.n_blocks == 5


def test_phi_zero_is_identity():
    space = base_search_space()
    assert scale_search_space(space, 0) == space
    assert scale_search_space(space, 0.0).clamped == ()


def test_phi_one_matches_arithmetic_oracle():
    space = base_search_space()
    scaled = scale_search_space(space, 1)
    assert scaled.video.resolution == nearest_multiple_of_8(224 * 1.16) == 256
    assert scaled.widths == tuple(nearest_multiple_of_8(w * 1.18) for w in space.widths)
    assert scaled.widths[0] == 16
    assert scaled.depth_range == (round(1 * 1.36), round(10 * 1.36)) == (1, 14)
    assert scaled.video.stride == round(5 * 1.24) == 6
    assert scaled.video.frames == 60  # same 10 s clip at 6 fps


@pytest.mark.parametrize("x", [0.0, 3.99, 4.0, 4.01, 12.0, 18.88, 259.84, 100.0, 7.9])
def test_round_to_multiple_matches_oracle(x):
    assert round_to_multiple(x) == nearest_multiple_of_8(x)


def test_coefficient_product():
    assert coefficient_product() == pytest.approx(3.16, abs=0.01)
    assert coefficient_product(ScalingCoefficients(0, 1, 1, 1, 1)) == 1.0
    doubled = ScalingCoefficients(alpha=2 * 1.36)
    assert coefficient_product(doubled) == pytest.approx(2 * coefficient_product())


def test_coefficient_candidates_hit_target():
    cands = coefficient_candidates()
    assert cands
    assert all(abs(coefficient_product(c) - 4.0) <= 0.25 for c in cands)


def _dims(space):
    v = space.video
    return (v.frames, v.resolution, v.stride, *space.widths, *space.depth_range)


def test_scaling_is_monotone():
    phis = [-2, -1, -0.5, 0, 0.5, 1, 2, 3]
    dims = [_dims(scale_search_space(base_search_space(), p)) for p in phis]
    for lo, hi in zip(dims, dims[1:]):
        assert all(b >= a for a, b in zip(lo, hi)), (lo, hi)


def test_negative_phi_clamps():
    scaled = scale_search_space(base_search_space(), -8)
    assert min(scaled.widths) >= 8 and scaled.depth_range[0] >= 1
    assert scaled.clamped


def test_sampler_is_deterministic_and_in_menus():
    space = base_search_space()
    assert sample_architecture(space, 5) == sample_architecture(space, 5)
    assert sample_architecture(space, 5) != sample_architecture(space, 6)
    for seed in range(50):
        spec = sample_architecture(space, seed)
        assert spec.depths() and all(1 <= d <= 10 for d in spec.depths())
        for b, block in enumerate(spec.blocks, start=1):
            assert block.layers[0].stride == (1 if b == 4 else 2)
            for layer in block.layers:
                assert (layer.kernel.time, layer.kernel.space) in KERNEL_MENU
                assert layer.base in space.width_menu(b)
                ratio_lo = (layer.expand - 8) / layer.base
                ratio_hi = (layer.expand + 8) / layer.base
                assert ratio_lo <= 4.0 and ratio_hi >= 1.5


def test_causal_samples_stream():
    spec = sample_architecture(base_search_space(), 3, causal=True)
    assert spec.streamable


def test_expected_cost_grows_with_phi():
    def mean_cost(phi):
        space = scale_search_space(base_search_space(), phi)
        return np.mean([network_flops(sample_architecture(space, s)) for s in range(100)])

    ratio = mean_cost(1) / mean_cost(0)
    assert 2.0 <= ratio <= 5.0


@pytest.mark.slow
def test_thousand_samples_parse_build_and_run():
    space = base_search_space()
    frame = np.zeros((1, 32, 32, 3), np.float32)
    for seed in range(1000):
        spec = parse_architecture(dump_architecture(sample_architecture(space, seed, causal=seed % 2 == 1)))
        frames, clip = forward_offline(spec, init_random_weights(spec, seed), frame)
        assert frames.shape == (1, 600) and np.all(np.isfinite(clip))
