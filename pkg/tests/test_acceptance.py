"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
Lines are printed even when pytest captures output.
"""

import csv
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from eegdenoise import checkpoint, data, layers, metrics
from eegdenoise.cli import main
from eegdenoise.exceptions import FormatError
from eegdenoise.gradcheck import run_suite
from eegdenoise.models import build_novel_cnn, init_params
from eegdenoise.optim import RMSprop
from eegdenoise.training import TrainConfig, mean_loss, train

_capture = None


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    global _capture
    _capture = capsys
    yield
    _capture = None


def report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} ({detail})"
    if _capture is not None:
        with _capture.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


def naive_conv(x, w, b):
    B, C, T = x.shape
    F, _, K = w.shape
    pad = K // 2
    xp = np.zeros((B, C, T + 2 * pad))
    xp[:, :, pad:pad + T] = x
    out = np.zeros((B, F, T))
    for n in range(B):
        for f in range(F):
            for t in range(T):
                acc = b[f]
                for c in range(C):
                    for k in range(K):
                        acc += w[f, c, k] * xp[n, c, t + k]
                out[n, f, t] = acc
    return out


def test_criterion_01_gradient_suite():
    start = time.perf_counter()
    results = run_suite(tolerance=1e-4, seeds=20)
    elapsed = time.perf_counter() - start
    worst = max(r.max_error for _, r in results)
    names = {n for n, _ in results}
    kinds = {"layer:conv1d", "layer:relu", "layer:avgpool2", "layer:flatten", "layer:dense"}
    ok = all(r.passed for _, r in results) and kinds <= names and "novel_cnn" in " ".join(names) and elapsed < 120
    report(1, "gradient suite", ok, f"worst rel err {worst:.2e} < 1e-4 over 20 seeds, {elapsed:.1f}s")


def test_criterion_02_conv_oracle():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        B, C, F, T = (int(v) for v in rng.integers(1, [4, 5, 5, 17]))
        x = rng.standard_normal((B, C, T))
        p = {"weight": rng.standard_normal((F, C, 3)), "bias": rng.standard_normal(F)}
        got = layers.conv1d_forward(x, p)
        worst = max(worst, float(np.max(np.abs(got - naive_conv(x, p["weight"], p["bias"])))))
    elapsed = time.perf_counter() - start
    report(2, "conv1d vs naive loops", worst <= 1e-12 and elapsed < 10, f"max abs diff {worst:.1e}, {elapsed:.1f}s")


def test_criterion_03_shape_trace():
    m = build_novel_cnn(1024)
    lengths, flat = m.block_lengths(), m.flatten_size()
    ok = lengths == [1024, 512, 256, 128, 64, 32, 16] and flat == 32768
    report(3, "shape trace", ok, f"blocks {lengths}, flatten {flat}")


def test_criterion_04_mixing_round_trip():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        L = int(rng.integers(2, 1025))
        x = rng.standard_normal(L) * rng.uniform(0.01, 100)
        n = rng.standard_normal(L) * rng.uniform(0.01, 100)
        s = rng.uniform(-7, 2)
        lam = metrics.lambda_for_snr(x, n, s)
        worst = max(worst, abs(metrics.snr_of(x, lam * n) - s))
    report(4, "mixing round-trip", worst <= 1e-9, f"max |snr error| {worst:.1e} dB over 1000 draws")


def test_criterion_05_metric_identities():
    x = np.random.default_rng(5).standard_normal(1024)
    errs = [
        abs(metrics.rrmse_t(x, x)),
        abs(metrics.rrmse_t(np.zeros_like(x), x) - 1),
        abs(metrics.rrmse_f(-x, x)),
        abs(metrics.cc(x, x) - 1),
        abs(metrics.cc(-x, x) + 1),
    ]
    report(5, "metric identities", max(errs) <= 1e-12, f"max deviation {max(errs):.1e}")


def test_criterion_06_parseval():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(1024) * rng.uniform(0.01, 100)
        ms = np.mean(x * x)
        worst = max(worst, abs(metrics.psd(x).total_power() - ms) / ms)
    report(6, "Parseval", worst <= 1e-9, f"max rel error {worst:.1e} over 100 epochs")


def test_criterion_07_rmsprop_arithmetic():
    opt = RMSprop(lr=0.1, rho=0.9, eps=0.0)
    p = [{"weight": np.zeros(1)}]
    opt.step(p, [{"weight": np.ones(1)}])
    e1 = abs(p[0]["weight"][0] - (-0.1 / np.sqrt(0.1)))
    opt.step(p, [{"weight": np.ones(1)}])
    e2 = abs(p[0]["weight"][0] - (-(0.1 / np.sqrt(0.1) + 0.1 / np.sqrt(0.19))))
    report(7, "RMSprop hand steps", max(e1, e2) <= 1e-10, f"step errors {e1:.1e}, {e2:.1e}")


def test_criterion_08_overfit():
    eeg, emg = data.synth_corpus(8, 8, seed=3)
    ds = data.build_training_set(eeg, emg, data.equalize_and_pair(eeg, emg, 0), 0, remix_count=1)
    model = init_params(build_novel_cnn(1024, Fraction(1, 16)), 0)
    start = time.perf_counter()
    _, curve = train(model, ds, ds.subset(slice(0, 0)), TrainConfig(epochs=500))
    elapsed = time.perf_counter() - start
    ratio = curve.train[-1] / curve.train[0]
    report(8, "overfit 8 examples", ratio < 0.01 and elapsed < 300,
           f"final/epoch-1 loss {ratio:.2%} after 500 epochs, {elapsed:.0f}s")


def _read_report(path):
    with open(path, newline="") as f:
        return {row["snr_db"]: row for row in csv.DictReader(f)}


def _cli_run(root, epochs, extra=()):
    corpus, run, rep = root / "corpus", root / "run", root / "report"
    assert main(["synth-data", "--n-eeg", "64", "--n-emg", "64", "--seed", "0", "--out", str(corpus)]) == 0
    assert main(["train", "--data", str(corpus), "--out", str(run), "--arch", "novel_cnn",
                 "--width-scale", "1/16", "--epochs", str(epochs), "--seed", "0", *extra]) == 0
    assert main(["evaluate", "--checkpoint", str(run / "model.ednc"), "--testset", str(run),
                 "--out", str(rep)]) == 0
    return run, rep


def test_criterion_09_end_to_end():
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        _, rep = _cli_run(Path(tmp), 20)
        rows = _read_report(rep / "report.csv")
    elapsed = time.perf_counter() - start
    low = [k for k in rows if k != "all" and float(k) <= -1]
    t_ok = all(float(rows[k]["model_rrmse_t_mean"]) < float(rows[k]["noisy_rrmse_t_mean"]) for k in low)
    cc_m, cc_n = float(rows["all"]["model_cc_mean"]), float(rows["all"]["noisy_cc_mean"])
    worst = max(float(rows[k]["model_rrmse_t_mean"]) - float(rows[k]["noisy_rrmse_t_mean"]) for k in low)
    detail = (f"RRMSE_t below noisy at all {len(low)} levels <= -1 dB: {t_ok} (worst margin {worst:+.3f}); "
              f"CC model {cc_m:.3f} vs noisy {cc_n:.3f}; {elapsed:.0f}s")
    report(9, "desk-scale denoising", t_ok and cc_m > cc_n and elapsed < 900, detail)


def test_criterion_10_determinism():
    names = ["run/model.ednc", "run/loss.csv", "report/report.csv"]
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        for root in (a, b):
            _cli_run(Path(root), 2)
        same = [(Path(a) / n).read_bytes() == (Path(b) / n).read_bytes() for n in names]
    report(10, "determinism", all(same), ", ".join(f"{n} {'identical' if s else 'DIFFERS'}"
                                                   for n, s in zip(names, same)))


def test_criterion_11_persistence():
    checks = {}
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        model = init_params(build_novel_cnn(128, Fraction(1, 16)), 11)
        checkpoint.save_checkpoint(model, tmp / "m.ednc", {"epoch": 1})
        raw = (tmp / "m.ednc").read_bytes()
        loaded = checkpoint.load_checkpoint(tmp / "m.ednc")
        checks["checkpoint bit-exact"] = (
            checkpoint.dumps(loaded, {"epoch": 1}) == raw
            and all(np.array_equal(a.astype(np.float32), b) for (_, a), (_, b) in
                    zip(model.named_params(), loaded.named_params())))
        m = np.random.default_rng(11).standard_normal((7, 33))
        data.save_matrix(m, tmp / "m.ednb")
        checks["EDNB bit-exact"] = np.array_equal(data.load_matrix(tmp / "m.ednb"), m)

        def rejected(fn, buf):
            try:
                fn(buf)
            except FormatError:
                return True
            return False

        (tmp / "t.ednb").write_bytes((tmp / "m.ednb").read_bytes()[:-1])
        checks["corrupt rejected"] = (
            rejected(checkpoint.loads, raw[: len(raw) // 2])
            and rejected(checkpoint.loads, b"XXXX" + raw[4:])
            and rejected(checkpoint.loads, raw + b"\0")
            and rejected(data.load_matrix, tmp / "t.ednb"))
    report(11, "persistence", all(checks.values()), ", ".join(f"{k}: {v}" for k, v in checks.items()))


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
