"""Signal mathematics: RMS, SNR-controlled mixing, normalization, PSD and
the three denoising quality measures (RRMSE in time and frequency, CC).

Every function works on a single 1-D epoch and is pure.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSignalError, LengthError, ShapeError

DEFAULT_FS = 512.0
DEFAULT_LENGTH = 1024


def _as_epoch(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {x.shape}")
    if x.size == 0:
        raise LengthError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _same_length(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} and {names[1]} differ in length: {a.size} vs {b.size}")


def rms(x):
    """Root mean square of an epoch."""
    x = _as_epoch(x)
    return float(np.sqrt(np.mean(x * x)))


def snr_of(x, scaled_noise):
    """SNR in dB between a clean epoch and an already scaled artifact.

    Uses ``10 * log10(rms(x) / rms(noise))`` on amplitudes, i.e. factor 10
    rather than the usual 20 for an amplitude ratio.
    """
    rx = rms(x)
    rn = rms(scaled_noise)
    if rn == 0.0:
        raise DegenerateSignalError("noise epoch has zero RMS")
    return float(10.0 * np.log10(rx / rn))


def lambda_for_snr(x, n, snr_db):
    """Artifact scale that makes ``x + lam * n`` reach ``snr_db``."""
    rn = rms(n)
    if rn == 0.0:
        raise DegenerateSignalError("noise epoch has zero RMS")
    return float(rms(x) / (rn * 10.0 ** (snr_db / 10.0)))


def mix(x, n, snr_db):
    """Contaminate a clean epoch with an artifact at the requested SNR.

    Returns
    -------
    y : ndarray
        ``x + lam * n``.
    lam : float
        The artifact scale from :func:`lambda_for_snr`.
    """
    x = _as_epoch(x, "x")
    n = _as_epoch(n, "n")
    _same_length(x, n, ("x", "n"))
    lam = lambda_for_snr(x, n, snr_db)
    return x + lam * n, lam


def normalize_pair(y, x):
    """Divide noisy and clean epochs by the population std of the noisy one.

    Returns ``(y_hat, x_hat, sigma_y)``; multiply by ``sigma_y`` to restore.
    """
    y = _as_epoch(y, "y")
    x = _as_epoch(x, "x")
    _same_length(y, x, ("y", "x"))
    sigma = float(np.std(y))
    if sigma == 0.0:
        raise DegenerateSignalError("noisy epoch is constant (zero standard deviation)")
    return y / sigma, x / sigma, sigma


@dataclass(frozen=True)
class Psd:
    """One-sided power spectral density.

    ``power`` has ``floor(L/2) + 1`` non-negative bins spaced ``bin_width`` Hz.
    """

    power: np.ndarray
    bin_width: float

    @property
    def frequencies(self):
        return np.arange(self.power.size) * self.bin_width

    def total_power(self):
        return float(np.sum(self.power) * self.bin_width)


def psd(x, fs=DEFAULT_FS):
    """Rectangular-window periodogram of the whole epoch.

    ``P[k] = |X[k]|^2 / (fs * L)``, doubled for bins that have a mirrored
    negative-frequency twin, so that ``sum(P) * fs / L`` equals the
    mean-square of ``x``.
    """
    x = _as_epoch(x)
    L = x.size
    if L < 2:
        raise LengthError("PSD needs at least 2 samples")
    spec = np.fft.rfft(x)
    power = (spec.real ** 2 + spec.imag ** 2) / (fs * L)
    # DC and (for even L) Nyquist have no mirror image.
    if L % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    return Psd(power=power, bin_width=fs / L)


def rrmse_t(denoised, truth):
    """Relative RMS error in the time domain."""
    d = _as_epoch(denoised, "denoised")
    t = _as_epoch(truth, "truth")
    _same_length(d, t, ("denoised", "truth"))
    rt = rms(t)
    if rt == 0.0:
        raise DegenerateSignalError("truth epoch has zero RMS")
    return rms(d - t) / rt


def rrmse_f(denoised, truth, fs=DEFAULT_FS):
    """Relative RMS error between the PSDs, bins treated as a vector."""
    d = _as_epoch(denoised, "denoised")
    t = _as_epoch(truth, "truth")
    _same_length(d, t, ("denoised", "truth"))
    pd_ = psd(d, fs).power
    pt = psd(t, fs).power
    rt = rms(pt)
    if rt == 0.0:
        raise DegenerateSignalError("truth PSD is all zero")
    return rms(pd_ - pt) / rt


def cc(denoised, truth):
    """Pearson correlation with population moments, two-pass formula."""
    d = _as_epoch(denoised, "denoised")
    t = _as_epoch(truth, "truth")
    _same_length(d, t, ("denoised", "truth"))
    dc = d - d.mean()
    tc = t - t.mean()
    vd = np.mean(dc * dc)
    vt = np.mean(tc * tc)
    if vd == 0.0 or vt == 0.0:
        raise DegenerateSignalError("correlation undefined for a zero-variance epoch")
    r = np.mean(dc * tc) / np.sqrt(vd * vt)
    return float(np.clip(r, -1.0, 1.0))
