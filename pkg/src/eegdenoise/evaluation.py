"""Per-SNR metric tables for a denoiser and for the untouched noisy input."""

from dataclasses import dataclass, field

import numpy as np

from . import metrics

METRIC_NAMES = ("rrmse_t", "rrmse_f", "cc")


def score_rows(denoised, clean, fs=metrics.DEFAULT_FS):
    """Per-row RRMSE_t, RRMSE_f and CC as a dict of arrays."""
    out = {name: np.empty(len(clean)) for name in METRIC_NAMES}
    for i, (d, x) in enumerate(zip(denoised, clean)):
        out["rrmse_t"][i] = metrics.rrmse_t(d, x)
        out["rrmse_f"][i] = metrics.rrmse_f(d, x, fs)
        out["cc"][i] = metrics.cc(d, x)
    return out


@dataclass
class MetricsReport:
    """Mean and std of each metric per SNR level, for the model and the noisy input.

    ``levels[snr] = {"model": {metric: (mean, std)}, "noisy": {...}}``;
    ``overall`` holds the same structure averaged over every example.
    """

    levels: dict
    overall: dict
    metadata: dict = field(default_factory=dict)

    def mean(self, source, metric, level=None):
        table = self.overall if level is None else self.levels[level]
        return table[source][metric][0]

    def to_csv(self):
        header = ["snr_db"]
        for src in ("model", "noisy"):
            for m in METRIC_NAMES:
                header += [f"{src}_{m}_mean", f"{src}_{m}_std"]
        rows = [",".join(header)]
        items = [(f"{lvl:g}", t) for lvl, t in sorted(self.levels.items())] + [("all", self.overall)]
        for label, table in items:
            cells = [label]
            for src in ("model", "noisy"):
                for m in METRIC_NAMES:
                    mean, std = table[src][m]
                    cells += [repr(mean), repr(std)]
            rows.append(",".join(cells))
        return "\n".join(rows) + "\n"

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(self.to_csv())


def _summarise(scores, mask):
    return {m: (float(np.mean(scores[m][mask])), float(np.std(scores[m][mask]))) for m in METRIC_NAMES}


def evaluate(predict_normalized, dataset, fs=metrics.DEFAULT_FS, metadata=None):
    """Scores a denoiser on a mixed evaluation set.

    ``predict_normalized`` maps a stack of ``y_hat`` rows to estimates of
    ``x_hat``; outputs are rescaled by each row's ``sigma_y`` and compared
    with the clean epoch, as is the noisy input itself for the baseline.
    """
    sigma = dataset.sigma_y[:, None]
    clean = dataset.x_hat * sigma
    noisy = dataset.y_hat * sigma
    denoised = np.asarray(predict_normalized(dataset.y_hat), dtype=np.float64) * sigma

    model_scores = score_rows(denoised, clean, fs)
    noisy_scores = score_rows(noisy, clean, fs)
    everything = np.ones(len(dataset), dtype=bool)
    levels = {}
    for lvl in np.unique(dataset.snr_db):
        mask = dataset.snr_db == lvl
        levels[float(lvl)] = {"model": _summarise(model_scores, mask),
                              "noisy": _summarise(noisy_scores, mask)}
    overall = {"model": _summarise(model_scores, everything),
               "noisy": _summarise(noisy_scores, everything)}
    return MetricsReport(levels, overall, dict(metadata or {}))
