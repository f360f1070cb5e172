"""Forward and backward kernels for the 1-D autoencoder layers.

Tensors are float64 arrays shaped (batch, length, channels).
"""
from __future__ import annotations

import numpy as np

MU = 255.0
AF_SLOPE_AT_ZERO = MU / np.log1p(MU)


def af_activation(x, mu: float = MU) -> np.ndarray:
    """Log-compression activation ``sgn(x) ln(1 + mu|x|) / ln(1 + mu)``.

    Inputs beyond |x| = 1 saturate at +-1.
    """
    x = np.asarray(x, dtype=np.float64)
    a = np.minimum(np.abs(x), 1.0)
    return np.sign(x) * np.log1p(mu * a) / np.log1p(mu)


def af_grad(x, mu: float = MU) -> np.ndarray:
    """Derivative of :func:`af_activation`; zero inside the clamp region."""
    x = np.asarray(x, dtype=np.float64)
    a = np.abs(x)
    g = mu / ((1.0 + mu * a) * np.log1p(mu))
    return np.where(a < 1.0, g, 0.0)


def af_clamp_count(x) -> int:
    return int(np.count_nonzero(np.abs(np.asarray(x)) > 1.0))


def _pad_amounts(length: int, kernel_len: int, stride: int) -> tuple[int, int, int]:
    out_len = -(-length // stride)
    total = max((out_len - 1) * stride + kernel_len - length, 0)
    left = total // 2
    return left, total - left, out_len


def _windows(x: np.ndarray, k: int, left: int, right: int, step: int = 1) -> np.ndarray:
    """im2col rows (batch * n_windows, k * channels) of a zero-padded (batch, len, ch) array."""
    batch, length, ch = x.shape
    xp = np.zeros((batch, length + left + right, ch))
    xp[:, left:left + length] = x
    # window axis lands last: (batch, n_windows, ch, k) -> reorder to (.., k, ch)
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)[:, ::step]
    n_win = win.shape[1]
    return np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(batch * n_win, k * ch), n_win


def kernel_matrix(kernel: np.ndarray) -> np.ndarray:
    """(out, in, k) kernel as a (k * in, out) matrix matching :func:`_windows` rows."""
    c_out, c_in, k = kernel.shape
    return kernel.transpose(2, 1, 0).reshape(k * c_in, c_out)


def conv1d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int = 1):
    """Same-padded strided convolution (cross-correlation).

    Returns the output and the im2col buffer needed by :func:`conv1d_backward`.
    """
    batch, length, _ = x.shape
    c_out, _, k = kernel.shape
    left, right, out_len = _pad_amounts(length, k, stride)
    cols, _ = _windows(x, k, left, right, stride)
    y = cols @ kernel_matrix(kernel)
    y += bias
    return y.reshape(batch, out_len, c_out), cols


def conv1d_backward(dy: np.ndarray, cols: np.ndarray, kernel: np.ndarray, stride: int, in_len: int,
                    need_dx: bool = True):
    """Gradients of :func:`conv1d_forward` with respect to input, kernel and bias.

    The input gradient is a full correlation of the (zero-dilated) output
    gradient with the flipped kernel, cropped back to the unpadded input.
    """
    batch, out_len, c_out = dy.shape
    _, c_in, k = kernel.shape
    left, _, _ = _pad_amounts(in_len, k, stride)
    dy2 = dy.reshape(batch * out_len, c_out)
    dkernel = (cols.T @ dy2).reshape(k, c_in, c_out).transpose(2, 1, 0)
    dbias = dy2.sum(axis=0)
    if not need_dx:
        return None, dkernel, dbias
    if stride > 1:
        dil = np.zeros((batch, (out_len - 1) * stride + 1, c_out))
        dil[:, ::stride] = dy
    else:
        dil = dy
    dcols, full_len = _windows(dil, k, k - 1, k - 1)
    flipped = kernel[:, :, ::-1].transpose(2, 0, 1).reshape(k * c_out, c_in)
    dxp = (dcols @ flipped).reshape(batch, full_len, c_in)
    dx = np.zeros((batch, in_len, c_in))
    hi = min(full_len, left + in_len)
    dx[:, : hi - left] = dxp[:, left:hi]
    return dx, dkernel, dbias


def upsample_forward(x: np.ndarray, factor: int = 2) -> np.ndarray:
    return np.repeat(x, factor, axis=1)


def upsample_backward(dy: np.ndarray, factor: int = 2) -> np.ndarray:
    b, n, c = dy.shape
    return dy.reshape(b, n // factor, factor, c).sum(axis=2)
