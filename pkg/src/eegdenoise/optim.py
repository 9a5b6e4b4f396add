"""MSE loss and the RMSprop update rule."""

import numpy as np

from .exceptions import NumericError, ShapeError


def mse_loss(pred, target):
    """Mean squared error over samples, averaged over a leading batch axis.

    For a single epoch of ``N`` samples the loss is ``mean((pred - target)**2)``
    and the gradient ``2 * (pred - target) / N``. For a batch of ``B`` epochs the
    loss is the mean of per-epoch losses and the gradient is divided by ``B``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


class RMSprop:
    """Plain RMSprop: no momentum, no centring.

    ``a <- rho * a + (1 - rho) * g**2`` and ``w <- w - lr * g / (sqrt(a) + eps)``.
    Accumulators start at zero and are created lazily on the first step.
    """

    def __init__(self, lr=5e-5, rho=0.9, eps=1e-7):
        if lr < 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.accumulators = None

    def step(self, params, grads, names=None):
        """Updates every array in ``params`` in place from matching ``grads``.

        ``params``/``grads`` are lists of ``{"weight", "bias"}`` dicts (or any
        list of dicts of arrays with identical keys). Nothing is modified if
        any gradient is non-finite.
        """
        flat_p, flat_g, labels = [], [], []
        for i, (p, g) in enumerate(zip(params, grads)):
            for key in p:
                if p[key].shape != g[key].shape:
                    raise ShapeError(f"gradient for param {i}.{key} has shape {g[key].shape}, "
                                     f"expected {p[key].shape}")
                flat_p.append(p[key])
                flat_g.append(g[key])
                labels.append(f"{names[i] if names else i}.{key}")
        for label, g in zip(labels, flat_g):
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {label}")

        if self.accumulators is None:
            self.accumulators = [np.zeros_like(p) for p in flat_p]
        for p, g, a in zip(flat_p, flat_g, self.accumulators):
            a *= self.rho
            a += (1.0 - self.rho) * g * g
            p -= self.lr * g / (np.sqrt(a) + self.eps)
