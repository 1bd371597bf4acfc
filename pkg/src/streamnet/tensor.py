"""Dense video tensors and the numeric primitives the engine is built from.

Video activations are plain ``float32`` numpy arrays laid out ``(T, H, W, C)``
with frames contiguous, so appending and slicing whole frames is cheap.
Convolution kernels are ``(k_t, k_h, k_w, C_in_per_group, C_out)``.
There is no batch dimension anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when tensor dimensions are incompatible with an operation."""


@dataclass(frozen=True)
class PaddingSpec:
    """Per-axis ``(left, right)`` zero padding for the t, h and w axes."""

    t: tuple[int, int] = (0, 0)
    h: tuple[int, int] = (0, 0)
    w: tuple[int, int] = (0, 0)

    def __post_init__(self):
        for axis in (self.t, self.h, self.w):
            if len(axis) != 2 or min(axis) < 0:
                raise ValueError(f"padding must be non-negative (left, right) pairs, got {self}")


def as_video(x, *, allow_empty: bool = False) -> np.ndarray:
    """Validate ``x`` as a (T, H, W, C) float32 video tensor and return it."""
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim != 4:
        raise ShapeError(f"video tensor must be rank 4 (T, H, W, C), got shape {x.shape}")
    min_t = 0 if allow_empty else 1
    if x.shape[0] < min_t or min(x.shape[1:]) < 1:
        raise ShapeError(f"video tensor dims must be >= 1, got {x.shape}")
    return x


def empty_like_frames(x: np.ndarray) -> np.ndarray:
    return np.zeros((0,) + x.shape[1:], dtype=DTYPE)


def conv_output_size(size: int, kernel: int, stride: int, pad: tuple[int, int]) -> int:
    return (size + pad[0] + pad[1] - kernel) // stride + 1


def conv3d(
    x: np.ndarray,
    kernel: np.ndarray,
    stride_hw: tuple[int, int] = (1, 1),
    padding: PaddingSpec = PaddingSpec(),
    bias: np.ndarray | None = None,
    groups: int = 1,
) -> np.ndarray:
    """Zero-padded 3D convolution with temporal stride fixed at 1.

    Per-tap products are float32; they are summed into a float64 accumulator
    in a fixed tap order (t, then h, then w), so each output element is
    computed identically no matter how many frames are in ``x``, and rounding
    does not grow with the number of taps.
    """
    x = as_video(x)
    kernel = np.asarray(kernel, dtype=DTYPE)
    if kernel.ndim != 5:
        raise ShapeError(f"kernel must be rank 5 (kt, kh, kw, cin/groups, cout), got {kernel.shape}")
    kt, kh, kw, cin_g, cout = kernel.shape
    T, H, W, C = x.shape
    if groups < 1 or cout % groups:
        raise ShapeError(f"C_out={cout} not divisible by groups={groups}")
    if C != cin_g * groups:
        raise ShapeError(f"input has {C} channels, kernel expects {cin_g} x {groups} groups")
    sh, sw = stride_hw
    if sh not in (1, 2) or sw not in (1, 2):
        raise ValueError(f"spatial stride must be 1 or 2, got {stride_hw}")

    t_out = conv_output_size(T, kt, 1, padding.t)
    h_out = conv_output_size(H, kh, sh, padding.h)
    w_out = conv_output_size(W, kw, sw, padding.w)
    if min(t_out, h_out, w_out) < 1:
        raise ShapeError(f"kernel {kernel.shape[:3]} larger than padded input {x.shape}")

    if any(p != (0, 0) for p in (padding.t, padding.h, padding.w)):
        x = np.pad(x, (padding.t, padding.h, padding.w, (0, 0)))

    cout_g = cout // groups
    depthwise = cin_g == 1 and cout_g == 1
    out = np.zeros((t_out, h_out, w_out, cout), dtype=np.float64)
    for dt in range(kt):
        for dh in range(kh):
            for dw in range(kw):
                patch = x[
                    dt : dt + t_out,
                    dh : dh + sh * (h_out - 1) + 1 : sh,
                    dw : dw + sw * (w_out - 1) + 1 : sw,
                ]
                tap = kernel[dt, dh, dw]
                if depthwise:
                    out += patch * tap[0]
                elif groups == 1:
                    out += patch @ tap
                else:
                    p = patch.reshape(-1, groups, cin_g)
                    g = tap.reshape(cin_g, groups, cout_g)
                    out += np.einsum("ngc,cgo->ngo", p, g).reshape(out.shape)
    if bias is not None:
        out += np.asarray(bias, dtype=DTYPE)
    return out.astype(DTYPE)


def pointwise(x: np.ndarray, matrix: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """1x1x1 convolution (or dense layer) over the trailing channel axis."""
    out = np.asarray(x, dtype=DTYPE) @ np.asarray(matrix, dtype=DTYPE)
    if bias is not None:
        out += bias
    return out


def avg_pool_spatial(x: np.ndarray, size: int = 3, stride: int = 2) -> np.ndarray:
    """Per-frame ``size x size`` average pooling with balanced zero padding.

    Padded positions count toward the divisor, which keeps the pooled value a
    fixed linear function of the input.
    """
    x = as_video(x)
    pad = ((size - 1) // 2, size // 2) if size % 2 == 0 else ((size - 1) // 2,) * 2
    kernel = np.zeros((1, size, size, 1, x.shape[-1]), dtype=DTYPE)
    kernel[...] = 1.0 / (size * size)
    return conv3d(x, kernel, (stride, stride), PaddingSpec(h=pad, w=pad), groups=x.shape[-1])


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Mean over all T*H*W voxels, one value per channel."""
    x = as_video(x)
    return x.mean(axis=(0, 1, 2), dtype=np.float64).astype(DTYPE)


def spatial_mean(x: np.ndarray) -> np.ndarray:
    """Per-frame spatial mean: (T, H, W, C) -> (T, C)."""
    x = as_video(x, allow_empty=True)
    return x.mean(axis=(1, 2), dtype=np.float64).astype(DTYPE)


def hard_sigmoid(x):
    return np.clip(np.asarray(x, dtype=DTYPE) + 3.0, 0.0, 6.0) / 6.0


def hard_swish(x):
    x = np.asarray(x, dtype=DTYPE)
    return x * (np.clip(x + 3.0, 0.0, 6.0) / 6.0)


def relu(x):
    return np.maximum(x, 0)


def concat_time(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Concatenate along time; ``a``'s frames come first."""
    a = as_video(a, allow_empty=True)
    b = as_video(b, allow_empty=True)
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"cannot concatenate frames of shape {a.shape[1:]} and {b.shape[1:]}")
    return np.concatenate([a, b], axis=0)


def slice_last_frames(x: np.ndarray, b: int) -> np.ndarray:
    x = as_video(x, allow_empty=True)
    if not 0 <= b <= x.shape[0]:
        raise ShapeError(f"cannot take last {b} frames of a {x.shape[0]}-frame tensor")
    return x[x.shape[0] - b :].copy()


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
