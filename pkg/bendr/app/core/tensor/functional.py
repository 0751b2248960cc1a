"""
Numerical kernels built on `Tensor`.

The kernels follow PyTorch conventions for argument order and weight layout, but operate
on unbatched inputs: signals are `channels x length` and token sequences are
`length x features`. Kernels with a closed-form derivative (convolution, GELU) record an
explicit vector-Jacobian product; the others are compositions of `Tensor` primitives.
"""

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from bendr.app.core.exceptions import DegenerateRepresentationError, ShapeError
from bendr.app.core.tensor.tensor import Tensor, as_tensor


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def conv_output_length(length: int, kernel: int, stride: int, padding: int = 0) -> int:
    """
    Output length of a valid (optionally zero-padded) 1D convolution.

    Args:
        length (int): Input length.
        kernel (int): Receptive field.
        stride (int): Stride.
        padding (int): Zero padding applied to both ends.

    Returns:
        int: floor((length + 2 * padding - kernel) / stride) + 1, or 0 when the kernel does not fit.
    """
    padded = length + 2 * padding
    if padded < kernel:
        return 0
    return (padded - kernel) // stride + 1


def conv1d(x: Tensor, w: Tensor, b: Optional[Tensor] = None, stride: int = 1, groups: int = 1,
           padding: int = 0) -> Tensor:
    """
    Grouped 1D cross-correlation of a `C_in x L` signal.

    Args:
        x (Tensor): Input of shape `C_in x L`.
        w (Tensor): Weights of shape `C_out x (C_in / groups) x K`.
        b (Optional[Tensor]): Bias of shape `C_out`.
        stride (int): Stride.
        groups (int): Number of channel groups.
        padding (int): Zero padding applied to both ends of the input.

    Returns:
        Tensor: Output of shape `C_out x L_out`, `L_out = floor((L + 2 * padding - K) / stride) + 1`.

    Raises:
        ShapeError: On incompatible shapes, or when the kernel does not fit the input.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 2 or w.ndim != 3:
        raise ShapeError(f"conv1d expects x of shape C_in x L and w of shape C_out x C_in/groups x K, "
                         f"got {x.shape} and {w.shape}")
    c_in, length = x.shape
    c_out, per_group, kernel = w.shape
    if stride < 1 or groups < 1:
        raise ShapeError(f"conv1d requires stride >= 1 and groups >= 1, got stride={stride}, groups={groups}")
    if c_in % groups or c_out % groups:
        raise ShapeError(f"conv1d channels ({c_in} in, {c_out} out) are not divisible by groups={groups}")
    if per_group != c_in // groups:
        raise ShapeError(f"conv1d weight expects {per_group} input channels per group, input provides {c_in // groups}")
    if b is not None and as_tensor(b).shape != (c_out,):
        raise ShapeError(f"conv1d bias must have shape ({c_out},), got {as_tensor(b).shape}")

    l_out = conv_output_length(length, kernel, stride, padding)
    if l_out == 0:
        raise ShapeError(f"conv1d input length {length} (padding {padding}) is shorter than kernel {kernel}: empty output")

    xp = np.pad(x.data, ((0, 0), (padding, padding))) if padding else x.data
    windows = sliding_window_view(xp, kernel, axis=1)[:, ::stride][:, :l_out]   # C_in x L_out x K
    out_per_group = c_out // groups

    out = np.empty((c_out, l_out))
    for g in range(groups):
        wg = w.data[g * out_per_group:(g + 1) * out_per_group]
        xg = windows[g * per_group:(g + 1) * per_group]
        out[g * out_per_group:(g + 1) * out_per_group] = np.tensordot(wg, xg, axes=([1, 2], [0, 2]))

    parents = [x, w]
    if b is not None:
        b = as_tensor(b)
        out += b.data[:, None]
        parents.append(b)

    def backward(grad):
        grad_w = np.empty_like(w.data)
        grad_windows = np.empty((c_in, kernel, l_out))
        for g in range(groups):
            go = grad[g * out_per_group:(g + 1) * out_per_group]
            xg = windows[g * per_group:(g + 1) * per_group]
            wg = w.data[g * out_per_group:(g + 1) * out_per_group]
            grad_w[g * out_per_group:(g + 1) * out_per_group] = np.tensordot(go, xg, axes=([1], [1]))
            grad_windows[g * per_group:(g + 1) * per_group] = np.tensordot(wg, go, axes=([0], [0]))
        grad_xp = np.zeros_like(xp)
        span = stride * (l_out - 1) + 1
        for k in range(kernel):
            grad_xp[:, k:k + span:stride] += grad_windows[:, k, :]
        grad_x = grad_xp[:, padding:padding + length] if padding else grad_xp
        grads = (grad_x, grad_w)
        if b is not None:
            grads += (grad.sum(axis=1),)
        return grads

    return Tensor.make(out, parents, backward, "conv1d")


def group_norm(x: Tensor, num_groups: int, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Group normalization of a `C x L` input followed by a per-channel affine map.

    Args:
        x (Tensor): Input of shape `C x L`.
        num_groups (int): Number of channel groups normalized jointly.
        gamma (Tensor): Per-channel scale, shape `C`.
        beta (Tensor): Per-channel shift, shape `C`.
        eps (float): Variance floor.

    Returns:
        Tensor: Normalized output of shape `C x L`.

    Raises:
        ShapeError: If `C` is not divisible by `num_groups`.
    """
    x = as_tensor(x)
    channels, length = x.shape
    if num_groups < 1 or channels % num_groups:
        raise ShapeError(f"group_norm: {channels} channels are not divisible by {num_groups} groups")
    if eps <= 0:
        raise ValueError("group_norm eps must be positive")

    grouped = x.reshape(num_groups, (channels // num_groups) * length)
    centered = grouped - grouped.mean(axis=1, keepdims=True)
    variance = (centered * centered).mean(axis=1, keepdims=True)
    normalized = (centered / (variance + eps).sqrt()).reshape(channels, length)
    return normalized * as_tensor(gamma).reshape(channels, 1) + as_tensor(beta).reshape(channels, 1)


def gelu(x: Tensor) -> Tensor:
    """ Exact GELU, x * Phi(x) with the Gaussian CDF computed through erf. """
    x = as_tensor(x)
    a = x.data
    cdf = 0.5 * (1.0 + erf(a * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * a * a)
    return Tensor.make(a * cdf, (x,), lambda g: (g * (cdf + a * pdf),), "gelu")


def cosine_similarity(a: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """
    Cosine similarity x.y / (|x| |y|) along `axis`, broadcasting over the other axes.

    Args:
        a (Tensor): First operand.
        b (Tensor): Second operand, broadcast-compatible with `a`.
        axis (int): Feature axis.

    Returns:
        Tensor: Similarities in [-1, 1]; a scalar tensor for two vectors.

    Raises:
        DegenerateRepresentationError: If any compared vector has zero norm.
    """
    a, b = as_tensor(a), as_tensor(b)
    norm_a = (a * a).sum(axis=axis)
    norm_b = (b * b).sum(axis=axis)
    if (norm_a.data == 0).any() or (norm_b.data == 0).any():
        raise DegenerateRepresentationError("cosine_similarity received a zero-norm vector")
    return (a * b).sum(axis=axis) / (norm_a * norm_b).sqrt()


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """ Affine map `x @ w.T + b` with `w` of shape `out x in`. """
    out = as_tensor(x) @ as_tensor(w).T
    return out + b if b is not None else out


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """ Numerically stable log(sum(exp(x))) along `axis`. """
    x = as_tensor(x)
    shift = np.max(x.data, axis=axis, keepdims=True)
    out = (x - shift).exp().sum(axis=axis, keepdims=True).log() + shift
    return out if keepdims else out.reshape(np.squeeze(out.data, axis=axis).shape)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return as_tensor(x) - logsumexp(x, axis=axis, keepdims=True)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return log_softmax(x, axis=axis).exp()


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """
    Inverted dropout: zero each element with probability `p` and rescale survivors by 1/(1-p).

    Args:
        x (Tensor): Input.
        p (float): Drop probability in [0, 1).
        rng (np.random.Generator): Random stream.
        training (bool): Identity when False.

    Returns:
        Tensor: The regularized input.
    """
    if not training or p == 0.0:
        return as_tensor(x)
    keep = (rng.random(as_tensor(x).shape) >= p) / (1.0 - p)
    return as_tensor(x) * keep


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """
    Mean negative log-likelihood of integer `targets` under row-wise softmax of `logits`.

    Args:
        logits (Tensor): Scores of shape `N x classes`.
        targets (np.ndarray): Class indices of shape `N`.

    Returns:
        Tensor: Scalar loss.
    """
    targets = np.asarray(targets, dtype=np.int64)
    log_probs = log_softmax(logits, axis=-1)
    return -log_probs[np.arange(len(targets)), targets].mean()


def pad(x: Tensor, left: int, right: int, value: float = 0.0) -> Tensor:
    """ Pad the last axis of `x` with `left` and `right` constant entries. """
    x = as_tensor(x)
    if left < 0 or right < 0:
        raise ShapeError(f"pad widths must be non-negative, got ({left}, {right})")
    widths = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    out = np.pad(x.data, widths, constant_values=value)
    length = x.shape[-1]
    return Tensor.make(out, (x,), lambda g: (g[..., left:left + length],), "pad")
