"""Independent reference implementations for the tests.

Nothing here calls into the optimized kernels; the oracles work in float64
with explicit loops.
"""

import math

import numpy as np

from streamnet.fixtures import random_causal_spec, random_video, trained_weights  # noqa: F401


def naive_conv3d(x, kernel, stride_hw=(1, 1), pad=((0, 0), (0, 0), (0, 0)), bias=None, groups=1, counter=None):
    """Six nested loops over output voxels and kernel taps, float64.

    With ``counter`` (a one-element list), adds the number of multiplies
    performed at every (voxel, tap).
    """
    x = np.pad(np.asarray(x, np.float64), tuple(pad) + ((0, 0),))
    k = np.asarray(kernel, np.float64)
    kt, kh, kw, cin_g, cout = k.shape
    cout_g = cout // groups
    T, H, W, _ = x.shape
    sh, sw = stride_hw
    to = T - kt + 1
    ho = (H - kh) // sh + 1
    wo = (W - kw) // sw + 1
    out = np.zeros((to, ho, wo, cout))
    for t in range(to):
        for h in range(ho):
            for w in range(wo):
                for dt in range(kt):
                    for dh in range(kh):
                        for dw in range(kw):
                            v = x[t + dt, h * sh + dh, w * sw + dw]
                            tap = k[dt, dh, dw]
                            for g in range(groups):
                                xs = v[g * cin_g : (g + 1) * cin_g]
                                ws = tap[:, g * cout_g : (g + 1) * cout_g]
                                out[t, h, w, g * cout_g : (g + 1) * cout_g] += xs @ ws
                                if counter is not None:
                                    counter[0] += ws.size
    if bias is not None:
        out += bias
    return out


def prefix_means(frames):
    """Mean over the first t frames for every t, recomputed from scratch in float64."""
    frames = np.asarray(frames, np.float64)
    return np.stack([frames[: t + 1].sum(axis=0) / (t + 1) for t in range(len(frames))])


def direct_shift(video, n_channels):
    """Whole-clip temporal shift: first ``n_channels`` come from the previous frame (zeros at t=0)."""
    out = np.array(video, copy=True)
    out[:, ..., :n_channels] = 0
    out[1:, ..., :n_channels] = video[:-1, ..., :n_channels]
    return out


def nearest_multiple_of_8(x):
    """Compare distances to the two neighbouring multiples; ties go up."""
    lo = math.floor(x / 8) * 8
    hi = lo + 8
    return hi if (hi - x) <= (x - lo) else lo
