"""Finite-difference verification of the backward passes."""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import NumericError
from .layers import Tape
from .optim import mse_loss

DEFAULT_STEP = 1e-5
# Below this magnitude both gradients count as zero; the comparison becomes absolute.
ABS_FLOOR = 1e-6


@dataclass
class GradcheckReport:
    tolerance: float
    errors: dict = field(default_factory=dict)
    checked: int = 0
    # Coordinates whose +/-h probes landed on different sides of a ReLU kink.
    skipped: int = 0

    @property
    def max_error(self):
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self):
        return self.max_error < self.tolerance

    def summary(self):
        lines = [f"{name:<28s} {err:.3e}" for name, err in self.errors.items()]
        status = "PASS" if self.passed else "FAIL"
        lines.append(f"{status} max relative error {self.max_error:.3e} (tolerance {self.tolerance:g}); "
                     f"{self.checked} coordinates, {self.skipped} skipped at ReLU kinks")
        return "\n".join(lines)


def relative_error(analytic, numeric, floor=ABS_FLOOR):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def _probe(model, x, target):
    tape = Tape()
    loss, _ = mse_loss(model.forward(x, tape), target)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss during gradient check")
    return loss, tape.caches("relu")


def _same_masks(a, b):
    return all(np.array_equal(m1, m2) for m1, m2 in zip(a, b))


def randomize_biases(model, seed, scale=0.1):
    """Replaces zero-initialised biases by small random values.

    With zero biases, channels fed by an all-zero window sit exactly on the
    ReLU kink, where no finite difference is meaningful.
    """
    rng = np.random.default_rng(seed)
    for p in model.params:
        p["bias"] = scale * rng.standard_normal(p["bias"].shape)
    return model


def _sample(size, max_checks, rng):
    if max_checks is None or size <= max_checks:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_checks, replace=False))


def gradcheck(model, x, target, tolerance=1e-4, h=DEFAULT_STEP, max_checks=None,
              seed=0, corrupt=False):
    """Compares backprop against central differences for every parameter group and the input.

    ``max_checks`` caps the number of coordinates probed per group (chosen at
    random with ``seed``); ``None`` probes all of them. ``corrupt`` flips the
    sign of the first weight gradient to act as a negative control.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)

    tape = Tape()
    out = model.forward(x, tape)
    loss, g_out = mse_loss(out, target)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss during gradient check")
    base_masks = [m.copy() for m in tape.caches("relu")]
    grad_x, grads = model.backward(g_out, tape)
    if corrupt and grads:
        grads[0]["weight"] = -grads[0]["weight"]

    groups = [("input", x, grad_x)]
    for (name, _, _), p, g in zip(model.param_shapes(), model.params, grads):
        groups.append((f"{name}.weight", p["weight"], g["weight"]))
        groups.append((f"{name}.bias", p["bias"], g["bias"]))

    report = GradcheckReport(tolerance)
    for name, arr, analytic in groups:
        flat = arr.reshape(-1)
        idx = _sample(flat.size, max_checks, rng)
        keep, numeric = [], []
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            lp, mp = _probe(model, x, target)
            flat[i] = orig - h
            lm, mm = _probe(model, x, target)
            flat[i] = orig
            if not (_same_masks(mp, base_masks) and _same_masks(mm, base_masks)):
                report.skipped += 1
                continue
            keep.append(i)
            numeric.append((lp - lm) / (2.0 * h))
        report.checked += len(keep)
        report.errors[name] = relative_error(analytic.reshape(-1)[keep], numeric)
    return report


# -- standard suite -------------------------------------------------------

def _single_layer_models(rng):
    from .models import LayerSpec, ModelGraph
    c_in, c_out, T = int(rng.integers(1, 4)), int(rng.integers(1, 4)), 2 * int(rng.integers(2, 6))
    return {
        "conv1d": ModelGraph([LayerSpec("conv1d", c_out, 3, "conv")], (c_in, T)),
        "relu": ModelGraph([LayerSpec("conv1d", c_out, 3, "conv"), LayerSpec("relu", name="relu")], (c_in, T)),
        "avgpool2": ModelGraph([LayerSpec("conv1d", c_out, 3, "conv"), LayerSpec("avgpool2", name="pool")],
                               (c_in, T)),
        "flatten": ModelGraph([LayerSpec("conv1d", c_out, 3, "conv"), LayerSpec("flatten", name="flat"),
                               LayerSpec("dense", 3, name="dense")], (c_in, T)),
        "dense": ModelGraph([LayerSpec("dense", int(rng.integers(1, 6)), name="dense")], (int(rng.integers(1, 6)),)),
    }


def _instance(model, seed):
    from .models import init_params
    init_params(model, seed)
    randomize_biases(model, seed + 7919)
    rng = np.random.default_rng(seed + 104729)
    x = rng.standard_normal(model.input_shape)
    target = rng.standard_normal(model.output_shape)
    return x, target


def run_suite(tolerance=1e-4, seeds=20, max_checks=8, corrupt=False):
    """Gradient checks for every layer kind, the 1/16-width CNN on length-128
    inputs, and a small FCNN, each over ``seeds`` random instances.

    Returns ``[(case_name, worst_report), ...]``.
    """
    from .models import build_fcnn_baseline, build_novel_cnn

    results = {}

    def record(name, report):
        if name not in results or report.max_error > results[name].max_error:
            results[name] = report

    for s in range(seeds):
        rng = np.random.default_rng(s)
        for kind, model in _single_layer_models(rng).items():
            x, t = _instance(model, s)
            record(f"layer:{kind}", gradcheck(model, x, t, tolerance, seed=s, corrupt=corrupt))
        cnn = build_novel_cnn(128, Fraction(1, 16))
        x, t = _instance(cnn, s)
        record("novel_cnn(128, 1/16)", gradcheck(cnn, x, t, tolerance, max_checks=max_checks, seed=s,
                                                  corrupt=corrupt))
        fcnn = build_fcnn_baseline(16, 2, 16)
        x, t = _instance(fcnn, s)
        record("fcnn(16, 2, 16)", gradcheck(fcnn, x, t, tolerance, seed=s, corrupt=corrupt))
    return list(results.items())
