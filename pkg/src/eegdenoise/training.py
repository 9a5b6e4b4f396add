"""Mini-batch training with RMSprop, per-epoch loss curves, and inference."""

import hashlib
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DegenerateSignalError, NumericError, ShapeError
from .layers import Tape
from .models import init_params
from .optim import RMSprop, mse_loss

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Defaults reproduce the full-size setup: 50 epochs, RMSprop(5e-5, 0.9)."""

    epochs: int = 50
    batch_size: int = 40
    lr: float = 5e-5
    rho: float = 0.9
    eps: float = 1e-7
    seed: int = 0
    width_scale: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    def config_hash(self):
        text = ";".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class LossCurve:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)

    def to_csv(self):
        rows = ["epoch,train_loss,val_loss"]
        for i, (tr, va) in enumerate(zip(self.train, self.val), start=1):
            rows.append(f"{i},{tr!r},{va!r}")
        return "\n".join(rows) + "\n"

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(self.to_csv())


def _inputs(model, y_hat):
    return y_hat.reshape((-1,) + model.input_shape)


def mean_loss(model, y_hat, x_hat, batch_size=256):
    """Mean per-example MSE of the model on normalised data."""
    total = 0.0
    for start in range(0, len(y_hat), batch_size):
        pred = model.forward(_inputs(model, y_hat[start:start + batch_size]))
        diff = pred - x_hat[start:start + batch_size]
        total += float(np.sum(np.mean(diff * diff, axis=1)))
    return total / len(y_hat)


def _check_finite_params(model, epoch):
    for name, arr in model.named_params():
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"parameter {name} became non-finite in epoch {epoch}")


def train(model, train_set, val_set, config, callback=None):
    """Trains ``model`` in place and returns ``(model, LossCurve)``.

    ``train_set``/``val_set`` are :class:`~eegdenoise.data.MixedDataset`
    (anything with ``y_hat`` and ``x_hat`` rows works). The model is
    initialised from ``config.seed`` if it has no parameters yet. Training
    examples are reshuffled every epoch from a generator seeded by
    ``config.seed``, so the run is a deterministic function of its inputs.
    """
    if len(train_set.y_hat) == 0:
        raise ValueError("training set is empty")
    if train_set.y_hat.shape[1] != model.input_len:
        raise ShapeError(f"model input length {model.input_len} != epoch length {train_set.y_hat.shape[1]}")
    if model.params is None:
        init_params(model, config.seed)

    opt = RMSprop(config.lr, config.rho, config.eps)
    names = [name for name, _, _ in model.param_shapes()]
    rng = np.random.default_rng(config.seed)
    curve = LossCurve()
    n = len(train_set.y_hat)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            tape = Tape()
            pred = model.forward(_inputs(model, train_set.y_hat[idx]), tape)
            loss, grad = mse_loss(pred, train_set.x_hat[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            _, grads = model.backward(grad, tape)
            opt.step(model.params, grads, names)
            total += loss * len(idx)
        _check_finite_params(model, epoch)
        curve.train.append(total / n)
        curve.val.append(mean_loss(model, val_set.y_hat, val_set.x_hat) if len(val_set.y_hat) else float("nan"))
        logger.info("epoch %d: train %.6f val %.6f", epoch, curve.train[-1], curve.val[-1])
        if callback is not None:
            callback(epoch, curve)
    model.meta["epochs_trained"] = config.epochs
    return model, curve


def denoise(model, noisy, batch_size=256):
    """Cleans one epoch or a matrix of epochs, returned in the input's scale.

    Each row is divided by its own standard deviation, passed through the
    network, and multiplied back.
    """
    noisy = np.asarray(noisy, dtype=np.float64)
    single = noisy.ndim == 1
    rows = noisy[np.newaxis] if single else noisy
    if rows.shape[1] != model.input_len:
        raise ShapeError(f"epoch length {rows.shape[1]} != model input length {model.input_len}")
    sigma = rows.std(axis=1)
    zero = np.flatnonzero(sigma == 0.0)
    if zero.size:
        raise DegenerateSignalError(f"row {zero[0]} is constant (zero standard deviation)")
    out = model.predict_normalized(rows / sigma[:, None], batch_size) * sigma[:, None]
    return out[0] if single else out
