"""Forward and backward passes for the five layer kinds of the network.

Activations are float64 arrays shaped ``(batch, channels, time)``; a single
``(channels, time)`` map is accepted as well and returned without the batch
axis. Dense layers work on ``(batch, features)`` or ``(features,)``.

Each ``*_forward`` pushes what its backward needs onto a :class:`Tape`; each
``*_backward`` pops exactly that entry. Layers are applied in sequence, so
the tape is a stack.
"""

import numpy as np

from .exceptions import ShapeError, TapeError

KERNEL_SIZE = 3


class Tape:
    """LIFO record of per-layer caches from one forward pass."""

    def __init__(self):
        self._entries = []

    def push(self, kind, cache):
        self._entries.append((kind, cache))

    def pop(self, kind):
        if not self._entries:
            raise TapeError(f"{kind} backward called with an empty tape "
                            "(no matching forward, or tape already consumed)")
        got, cache = self._entries.pop()
        if got != kind:
            raise TapeError(f"{kind} backward found a {got} entry on the tape")
        return cache

    def __len__(self):
        return len(self._entries)

    def caches(self, kind):
        """Caches of every pending entry of ``kind``, oldest first."""
        return [cache for got, cache in self._entries if got == kind]


def _batched(x, ndim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[np.newaxis], True
    if x.ndim != ndim:
        raise ShapeError(f"expected a {ndim - 1}-D or {ndim}-D array, got shape {x.shape}")
    return x, False


def _unbatch(out, squeeze):
    return out[0] if squeeze else out


def _im2col(x):
    # (B, C, T) -> (B, C*3, T) with zero "same" padding; row c*3+k is x[c, t+k-1].
    B, C, T = x.shape
    xp = np.zeros((B, C, T + 2))
    xp[:, :, 1:-1] = x
    cols = np.empty((B, C, KERNEL_SIZE, T))
    for k in range(KERNEL_SIZE):
        cols[:, :, k, :] = xp[:, :, k:k + T]
    return cols.reshape(B, C * KERNEL_SIZE, T)


def conv1d_forward(x, params, tape=None):
    """Kernel-3, stride-1, zero-padded cross-correlation; length is preserved.

    ``out[c, t] = bias[c] + sum_{i,k} w[c, i, k] * x_pad[i, t + k]``.
    """
    x, squeeze = _batched(x, 3)
    w = params["weight"]
    b = params["bias"]
    c_out, c_in, ksize = w.shape
    if ksize != KERNEL_SIZE:
        raise ShapeError(f"kernel size must be {KERNEL_SIZE}, got {ksize}")
    if x.shape[1] != c_in:
        raise ShapeError(f"conv expects {c_in} input channels, got {x.shape[1]}")
    cols = _im2col(x)
    out = np.matmul(w.reshape(c_out, -1), cols)
    out += b[:, np.newaxis]
    if tape is not None:
        tape.push("conv1d", (cols, x.shape, squeeze))
    return _unbatch(out, squeeze)


def conv1d_backward(grad_out, tape, params):
    """Returns ``(grad_input, grad_weight, grad_bias)``."""
    cols, in_shape, squeeze = tape.pop("conv1d")
    g, _ = _batched(grad_out, 3)
    w = params["weight"]
    c_out, c_in, _ = w.shape
    B, C, T = in_shape
    if g.shape != (B, c_out, T):
        raise ShapeError(f"conv grad has shape {g.shape}, expected {(B, c_out, T)}")

    grad_b = g.sum(axis=(0, 2))
    g2 = g.transpose(1, 0, 2).reshape(c_out, B * T)
    cols2 = cols.transpose(1, 0, 2).reshape(c_in * KERNEL_SIZE, B * T)
    grad_w = (g2 @ cols2.T).reshape(w.shape)

    gcols = np.matmul(w.reshape(c_out, -1).T, g).reshape(B, C, KERNEL_SIZE, T)
    gpad = np.zeros((B, C, T + 2))
    for k in range(KERNEL_SIZE):
        gpad[:, :, k:k + T] += gcols[:, :, k, :]
    grad_in = gpad[:, :, 1:-1]
    return _unbatch(grad_in, squeeze), grad_w, grad_b


def relu_forward(x, tape=None):
    x = np.asarray(x, dtype=np.float64)
    mask = x > 0
    if tape is not None:
        tape.push("relu", mask)
    return np.where(mask, x, 0.0)


def relu_backward(grad_out, tape):
    mask = tape.pop("relu")
    return np.where(mask, np.asarray(grad_out, dtype=np.float64), 0.0)


def avgpool1d_forward(x, tape=None, pool=2):
    """Non-overlapping mean over windows of ``pool`` samples."""
    x, squeeze = _batched(x, 3)
    B, C, T = x.shape
    if T % pool:
        raise ShapeError(f"average pooling needs a length divisible by {pool}, got {T}")
    out = x.reshape(B, C, T // pool, pool).mean(axis=3)
    if tape is not None:
        tape.push("avgpool", (pool, squeeze))
    return _unbatch(out, squeeze)


def avgpool1d_backward(grad_out, tape):
    pool, squeeze = tape.pop("avgpool")
    g, _ = _batched(grad_out, 3)
    grad_in = np.repeat(g / pool, pool, axis=2)
    return _unbatch(grad_in, squeeze)


def flatten_forward(x, tape=None):
    """(C, T) -> (C*T,) in channel-major order (all of channel 0 first)."""
    x, squeeze = _batched(x, 3)
    if tape is not None:
        tape.push("flatten", (x.shape, squeeze))
    out = x.reshape(x.shape[0], -1)
    return _unbatch(out, squeeze)


def flatten_backward(grad_out, tape):
    shape, squeeze = tape.pop("flatten")
    g = np.asarray(grad_out, dtype=np.float64).reshape(shape)
    return _unbatch(g, squeeze)


def dense_forward(x, params, tape=None):
    """Affine map ``W @ x + b`` with ``W`` shaped (out_dim, in_dim)."""
    x, squeeze = _batched(x, 2)
    w = params["weight"]
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"dense expects {w.shape[1]} inputs, got {x.shape[1]}")
    out = x @ w.T + params["bias"]
    if tape is not None:
        tape.push("dense", (x, squeeze))
    return _unbatch(out, squeeze)


def dense_backward(grad_out, tape, params):
    """Returns ``(grad_input, grad_weight, grad_bias)``."""
    x, squeeze = tape.pop("dense")
    g, _ = _batched(grad_out, 2)
    w = params["weight"]
    grad_w = g.T @ x
    grad_b = g.sum(axis=0)
    grad_in = g @ w
    return _unbatch(grad_in, squeeze), grad_w, grad_b
