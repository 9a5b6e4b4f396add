"""Dataset ingestion, pairing, splitting and SNR-controlled mixing.

Epoch matrices are 2-D float64 arrays, one epoch per row. The on-disk
binary format (``.ednb``) is::

    magic   4 bytes  b"EDNB"
    rows    u32 little-endian
    cols    u32 little-endian
    payload rows*cols float64 little-endian, row-major
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .exceptions import ConfigError, DegenerateSignalError, FormatError, LengthError, ShapeError

logger = logging.getLogger(__name__)

EDNB_MAGIC = b"EDNB"
_HEADER = struct.Struct("<4sII")

SNR_RANGE = (-7.0, 2.0)
EVAL_SNR_LEVELS = tuple(range(-7, 3))
REMIX_COUNT = 10
N_PARTS = 10


# -- file formats ---------------------------------------------------------

def _check_finite(m):
    bad = ~np.isfinite(m)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise FormatError(f"non-finite value in row {row}", "payload")


def save_matrix(m, path):
    m = np.ascontiguousarray(m, dtype="<f8")
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    _check_finite(m)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(EDNB_MAGIC, m.shape[0], m.shape[1]))
        f.write(m.tobytes())


def load_ednb(path):
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise FormatError(f"file is {len(buf)} bytes, shorter than the {_HEADER.size}-byte header", "header")
    magic, rows, cols = _HEADER.unpack_from(buf)
    if magic != EDNB_MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte 0", "magic")
    need = rows * cols * 8
    have = len(buf) - _HEADER.size
    if have != need:
        raise FormatError(f"payload at byte {_HEADER.size} has {have} bytes, "
                          f"expected {need} for {rows}x{cols}", "payload")
    m = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(np.float64)
    _check_finite(m)
    return m


def load_csv(path):
    rows = []
    with open(path) as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise FormatError(f"row {i}: {exc}", "row") from exc
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(f"row {i} has {len(rows[-1])} columns, expected {len(rows[0])}", "row")
    if not rows:
        raise FormatError("CSV file has no rows", "row")
    m = np.array(rows, dtype=np.float64)
    _check_finite(m)
    return m


def load_matrix(path, format=None):
    """Loads an epoch matrix; ``format`` is ``"ednb"`` or ``"csv"`` (default: by suffix)."""
    if format is None:
        format = "csv" if str(path).lower().endswith(".csv") else "ednb"
    if format == "ednb":
        return load_ednb(path)
    if format == "csv":
        return load_csv(path)
    raise ValueError(f"unknown matrix format {format!r}")


def write_manifest(path, entries):
    """``key=value`` lines, keys sorted, so reruns produce identical bytes."""
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    """Parses ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}", f"line {lineno}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# -- pairing and splitting ------------------------------------------------

def equalize_and_pair(eeg, emg, seed):
    """Pairs every EMG epoch with one EEG epoch.

    EEG indices are drawn without replacement until the pool is exhausted,
    then the pool is reshuffled and drawing restarts, until there are as many
    as EMG epochs. EMG indices are a seeded permutation, each used once.
    Returns an ``(n_emg, 2)`` int array of ``(eeg_index, emg_index)``.
    """
    n_eeg, n_emg = len(eeg), len(emg)
    if n_eeg == 0 or n_emg == 0:
        raise LengthError("cannot pair empty EEG or EMG sets")
    if n_emg < n_eeg:
        raise LengthError(f"need at least as many EMG as EEG epochs, got {n_emg} < {n_eeg}")
    rng = np.random.default_rng(seed)
    pools = []
    while sum(len(p) for p in pools) < n_emg:
        pools.append(rng.permutation(n_eeg))
    eeg_idx = np.concatenate(pools)[:n_emg]
    emg_idx = rng.permutation(n_emg)
    return np.stack([eeg_idx, emg_idx], axis=1)


def split_sizes(n):
    """Train/val/test sizes from ten parts: one part each for val and test."""
    if n < N_PARTS:
        raise LengthError(f"need at least {N_PARTS} pairs to split, got {n}")
    part = int(np.floor(n / N_PARTS + 0.5))
    return n - 2 * part, part, part


def split_pairs(pairs, seed):
    """Seeded shuffle, then contiguous train/val/test slices (8/1/1 parts)."""
    pairs = np.asarray(pairs)
    n_train, n_val, _ = split_sizes(len(pairs))
    order = np.random.default_rng(seed).permutation(len(pairs))
    shuffled = pairs[order]
    return (shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:])


# -- mixing ---------------------------------------------------------------

@dataclass
class MixedDataset:
    """Normalised network inputs/targets plus everything needed to undo them.

    ``y_hat = (x + lam * n) / sigma_y`` and ``x_hat = x / sigma_y`` per row.
    """

    y_hat: np.ndarray
    x_hat: np.ndarray
    sigma_y: np.ndarray
    snr_db: np.ndarray
    lam: np.ndarray
    eeg_index: np.ndarray
    emg_index: np.ndarray
    skipped: int = 0

    def __len__(self):
        return len(self.y_hat)

    @property
    def noisy(self):
        return self.y_hat * self.sigma_y[:, None]

    @property
    def clean(self):
        return self.x_hat * self.sigma_y[:, None]

    def subset(self, idx):
        return MixedDataset(self.y_hat[idx], self.x_hat[idx], self.sigma_y[idx], self.snr_db[idx],
                            self.lam[idx], self.eeg_index[idx], self.emg_index[idx])


def _mix_all(eeg, emg, jobs):
    """``jobs`` is a list of ``(eeg_index, emg_index, snr_db)``."""
    ys, xs, sig, snr, lams, ei, mi = [], [], [], [], [], [], []
    skipped = 0
    for e, m, s in jobs:
        x = eeg[e]
        try:
            y, lam = metrics.mix(x, emg[m], s)
            y_hat, x_hat, sigma = metrics.normalize_pair(y, x)
        except DegenerateSignalError:
            skipped += 1
            continue
        ys.append(y_hat)
        xs.append(x_hat)
        sig.append(sigma)
        snr.append(s)
        lams.append(lam)
        ei.append(e)
        mi.append(m)
    if skipped:
        logger.warning("skipped %d degenerate epoch pair(s) while mixing", skipped)
    L = eeg.shape[1]
    return MixedDataset(np.array(ys).reshape(-1, L), np.array(xs).reshape(-1, L),
                        np.array(sig, dtype=np.float64), np.array(snr, dtype=np.float64),
                        np.array(lams, dtype=np.float64), np.array(ei, dtype=np.int64),
                        np.array(mi, dtype=np.int64), skipped)


def _check_sources(eeg, emg):
    eeg = np.asarray(eeg, dtype=np.float64)
    emg = np.asarray(emg, dtype=np.float64)
    if eeg.ndim != 2 or emg.ndim != 2 or eeg.shape[1] != emg.shape[1]:
        raise ShapeError(f"EEG {eeg.shape} and EMG {emg.shape} must be matrices with equal epoch length")
    return eeg, emg


def build_training_set(eeg, emg, pairs, seed, remix_count=REMIX_COUNT, snr_range=SNR_RANGE):
    """Mixes every pair ``remix_count`` times at SNRs drawn from U(snr_range).

    Pairings stay fixed across repetitions; only the SNR is redrawn.
    """
    eeg, emg = _check_sources(eeg, emg)
    pairs = np.asarray(pairs)
    rng = np.random.default_rng(seed)
    lo, hi = snr_range
    jobs = []
    for _ in range(remix_count):
        snrs = rng.uniform(lo, hi, size=len(pairs))
        jobs += [(int(e), int(m), float(s)) for (e, m), s in zip(pairs, snrs)]
    return _mix_all(eeg, emg, jobs)


def build_eval_set(eeg, emg, pairs, levels=EVAL_SNR_LEVELS):
    """Mixes every pair once at each SNR level; rows are grouped by pair."""
    eeg, emg = _check_sources(eeg, emg)
    jobs = [(int(e), int(m), float(s)) for e, m in np.asarray(pairs) for s in levels]
    return _mix_all(eeg, emg, jobs)


# -- synthetic corpus -----------------------------------------------------

def synth_corpus(n_eeg, n_emg, length=metrics.DEFAULT_LENGTH, fs=metrics.DEFAULT_FS, seed=0):
    """Desk-scale EEG and EMG surrogates, each row scaled to unit RMS.

    EEG rows: 3-6 sinusoids between 1 and 30 Hz with 1/f amplitudes and random
    phases, plus white noise at 5% of the sinusoid RMS. EMG rows: white noise
    restricted to 20-250 Hz by zeroing FFT bins outside the band.
    """
    if n_eeg < 1 or n_emg < 1 or length < 2:
        raise ValueError("synth_corpus needs positive counts and length >= 2")
    rng = np.random.default_rng(seed)
    t = np.arange(length) / fs

    eeg = np.empty((n_eeg, length))
    for i in range(n_eeg):
        k = rng.integers(3, 7)
        freqs = rng.uniform(1.0, 30.0, size=k)
        phases = rng.uniform(0.0, 2 * np.pi, size=k)
        row = np.sum(np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]) / freqs[:, None], axis=0)
        row += 0.05 * metrics.rms(row) * rng.standard_normal(length)
        eeg[i] = row / metrics.rms(row)

    freqs = np.fft.rfftfreq(length, d=1.0 / fs)
    band = (freqs >= 20.0) & (freqs <= 250.0)
    emg = np.empty((n_emg, length))
    for i in range(n_emg):
        spec = np.fft.rfft(rng.standard_normal(length))
        spec[~band] = 0.0
        row = np.fft.irfft(spec, n=length)
        emg[i] = row / metrics.rms(row)
    return eeg, emg
