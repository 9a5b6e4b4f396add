"""scikit-learn compatible wrapper around the network and its trainer."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import checkpoint, metrics
from .data import MixedDataset
from .exceptions import DegenerateSignalError, ShapeError
from .models import build_fcnn_baseline, build_novel_cnn, init_params
from .training import LossCurve, TrainConfig, denoise, train


def _normalized_dataset(X, y):
    sigma = X.std(axis=1)
    bad = np.flatnonzero(sigma == 0.0)
    if bad.size:
        raise DegenerateSignalError(f"row {bad[0]} of X is constant (zero standard deviation)")
    n = len(X)
    return MixedDataset(X / sigma[:, None], y / sigma[:, None], sigma, np.full(n, np.nan),
                        np.full(n, np.nan), np.arange(n), np.arange(n))


class EEGDenoiser(TransformerMixin, RegressorMixin, BaseEstimator):
    """Maps noisy EEG epochs (rows of ``X``) to clean estimates.

    ``fit(X, y)`` takes noisy epochs ``X`` and their clean counterparts ``y``;
    each row pair is scaled by the std of the noisy row before training.
    ``predict``/``transform`` return denoised epochs in the input's scale.

    Parameters
    ----------
    architecture : {"novel_cnn", "fcnn"}
        ``"fcnn"`` is a plain dense/ReLU stack for comparisons.
    width_scale : float
        Multiplier on the CNN channel schedule 32..2048 (1 = full size).
    hidden_layers, hidden_width : int
        FCNN shape; ignored for the CNN.
    epochs, batch_size, learning_rate, rho, epsilon :
        RMSprop training settings.
    random_state : int
        Seeds initialisation and per-epoch shuffling.
    """

    def __init__(self, architecture="novel_cnn", width_scale=1.0, hidden_layers=3, hidden_width=1024,
                 epochs=50, batch_size=40, learning_rate=5e-5, rho=0.9, epsilon=1e-7, random_state=0):
        self.architecture = architecture
        self.width_scale = width_scale
        self.hidden_layers = hidden_layers
        self.hidden_width = hidden_width
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.rho = rho
        self.epsilon = epsilon
        self.random_state = random_state

    def _build(self, input_len):
        if self.architecture == "novel_cnn":
            return build_novel_cnn(input_len, self.width_scale)
        if self.architecture == "fcnn":
            return build_fcnn_baseline(input_len, self.hidden_layers, self.hidden_width)
        raise ValueError(f"unknown architecture {self.architecture!r}")

    def _config(self):
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.learning_rate,
                           rho=self.rho, eps=self.epsilon, seed=self.random_state,
                           width_scale=self.width_scale)

    def fit(self, X, y, eval_set=None):
        """Trains from scratch. ``eval_set=(X_val, y_val)`` fills ``loss_curve_.val``."""
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        if X.shape != y.shape:
            raise ShapeError(f"X {X.shape} and y {y.shape} must have the same shape")
        train_set = _normalized_dataset(X, y)
        if eval_set is not None:
            Xv = check_array(eval_set[0], dtype=np.float64)
            yv = check_array(eval_set[1], dtype=np.float64)
            val_set = _normalized_dataset(Xv, yv)
        else:
            val_set = train_set.subset(slice(0, 0))
        model = init_params(self._build(X.shape[1]), self.random_state)
        self.model_, self.loss_curve_ = train(model, train_set, val_set, self._config())
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"X has {X.shape[1]} samples per epoch, model expects {self.n_features_in_}")
        return denoise(self.model_, X)

    def transform(self, X):
        return self.predict(X)

    def score(self, X, y, sample_weight=None):
        """Mean correlation between denoised rows and clean rows (higher is better)."""
        y = check_array(y, dtype=np.float64)
        pred = self.predict(X)
        scores = np.array([metrics.cc(p, t) for p, t in zip(pred, y)])
        return float(np.average(scores, weights=sample_weight))

    def save(self, path):
        check_is_fitted(self, "model_")
        checkpoint.save_checkpoint(self.model_, path, {"params": self.get_params(),
                                                       "config_hash": self._config().config_hash()})

    @classmethod
    def load(cls, path):
        model, training = checkpoint.load_checkpoint(path, with_metadata=True)
        est = cls(**training.get("params", {}))
        est.model_ = model
        est.loss_curve_ = LossCurve()
        est.n_features_in_ = model.input_len
        return est
