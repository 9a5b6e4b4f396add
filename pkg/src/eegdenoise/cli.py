"""Command-line interface: synth-data, train, evaluate, denoise, gradcheck.

Exit codes: 0 success, 1 usage/config error, 2 data/format error,
3 numeric failure.
"""

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import checkpoint, data
from .evaluation import evaluate
from .exceptions import (ConfigError, DegenerateSignalError, FormatError, NumericError, ShapeError)
from .gradcheck import run_suite
from .models import build_fcnn_baseline, build_novel_cnn, init_params
from .training import TrainConfig, denoise, train

logger = logging.getLogger("eegdenoise")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

TRAIN_DEFAULTS = {
    "arch": "novel_cnn",
    "width_scale": "1",
    "hidden_layers": 3,
    "hidden_width": 1024,
    "epochs": 50,
    "batch_size": 40,
    "lr": 5e-5,
    "beta": 0.9,
    "eps": 1e-7,
    "seed": 0,
    "remix": data.REMIX_COUNT,
    "snr_min": data.SNR_RANGE[0],
    "snr_max": data.SNR_RANGE[1],
}
_TRAIN_TYPES = {"arch": str, "width_scale": str, "hidden_layers": int, "hidden_width": int, "epochs": int,
                "batch_size": int, "lr": float, "beta": float, "eps": float, "seed": int, "remix": int,
                "snr_min": float, "snr_max": float}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _sub_seeds(seed, n):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _resolve_dataset(path):
    """Returns ``(manifest_dict, directory)`` for a dataset dir or manifest file."""
    path = Path(path)
    manifest_path = path / "manifest.txt" if path.is_dir() else path
    if not manifest_path.exists():
        raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
    return data.read_manifest(manifest_path), manifest_path.parent


def _require(manifest, key):
    if key not in manifest:
        raise FormatError(f"manifest is missing '{key}'", key)
    return manifest[key]


def _merge_config(args):
    """CLI flag > config file > built-in default."""
    file_cfg = data.read_manifest(args.config) if args.config else {}
    effective = {}
    for key, default in TRAIN_DEFAULTS.items():
        flag = getattr(args, key)
        if flag is not None:
            effective[key] = flag
        elif key in file_cfg:
            try:
                effective[key] = _TRAIN_TYPES[key](file_cfg[key])
            except ValueError as exc:
                raise ConfigError(f"config value {key}={file_cfg[key]!r} is invalid", key) from exc
        else:
            effective[key] = default
    unknown = sorted(set(file_cfg) - set(TRAIN_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}", unknown[0])
    return effective


# -- commands -------------------------------------------------------------

def cmd_synth_data(args):
    eeg, emg = data.synth_corpus(args.n_eeg, args.n_emg, args.length, args.fs, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data.save_matrix(eeg, out / "eeg.ednb")
    data.save_matrix(emg, out / "emg.ednb")
    data.write_manifest(out / "manifest.txt", {
        "kind": "synthetic", "eeg": "eeg.ednb", "emg": "emg.ednb", "n_eeg": args.n_eeg,
        "n_emg": args.n_emg, "length": args.length, "fs": args.fs, "seed": args.seed,
    })
    print(f"wrote {args.n_eeg} EEG and {args.n_emg} EMG epochs to {out}")


def _build_model(cfg, length):
    if cfg["arch"] == "novel_cnn":
        try:
            scale = Fraction(cfg["width_scale"])
        except ValueError as exc:
            raise ConfigError(f"width_scale {cfg['width_scale']!r} is not a number", "width_scale") from exc
        try:
            return build_novel_cnn(length, scale)
        except ValueError as exc:
            if isinstance(exc, ShapeError):
                raise
            raise ConfigError(str(exc), "width_scale") from exc
    if cfg["arch"] == "fcnn":
        return build_fcnn_baseline(length, cfg["hidden_layers"], cfg["hidden_width"])
    raise ConfigError(f"unknown architecture {cfg['arch']!r}", "arch")


def cmd_train(args):
    cfg = _merge_config(args)
    manifest, root = _resolve_dataset(args.data)
    eeg = data.load_matrix(root / _require(manifest, "eeg"))
    emg = data.load_matrix(root / _require(manifest, "emg"))
    length = int(_require(manifest, "length"))
    fs = float(manifest.get("fs", 512))
    for name, m in (("eeg", eeg), ("emg", emg)):
        if m.shape[1] != length:
            raise ConfigError(f"{name} epochs have {m.shape[1]} samples but manifest says length={length}",
                              "length")
    try:
        config = TrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"], rho=cfg["beta"],
                             eps=cfg["eps"], seed=cfg["seed"], width_scale=float(Fraction(cfg["width_scale"])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["snr_min"] > cfg["snr_max"]:
        raise ConfigError("snr_min must not exceed snr_max", "snr_min")

    pair_seed, split_seed, remix_seed = _sub_seeds(cfg["seed"], 3)
    pairs = data.equalize_and_pair(eeg, emg, pair_seed)
    tr, va, te = data.split_pairs(pairs, split_seed)
    train_set = data.build_training_set(eeg, emg, tr, remix_seed, cfg["remix"], (cfg["snr_min"], cfg["snr_max"]))
    val_set = data.build_eval_set(eeg, emg, va)

    model = init_params(_build_model(cfg, length), cfg["seed"])
    model, curve = train(model, train_set, val_set, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_meta = {k: str(v) for k, v in cfg.items()}
    run_meta.update(config_hash=config.config_hash(), data=str(args.data), fs=fs, length=length,
                    n_train_pairs=len(tr), n_val_pairs=len(va), n_test_pairs=len(te),
                    n_train_examples=len(train_set), n_val_examples=len(val_set),
                    skipped_examples=train_set.skipped + val_set.skipped)
    # the checkpoint omits the data path so identical runs give identical bytes
    ckpt_meta = {k: v for k, v in run_meta.items() if k != "data"}
    checkpoint.save_checkpoint(model, out / "model.ednc",
                               {"epoch": config.epochs, "seed": cfg["seed"], "config_hash": config.config_hash(),
                                "config": ckpt_meta})
    curve.write_csv(out / "loss.csv")
    data.save_matrix(eeg[te[:, 0]], out / "test_eeg.ednb")
    data.save_matrix(emg[te[:, 1]], out / "test_emg.ednb")
    data.write_manifest(out / "run.manifest", run_meta)
    print(f"trained {config.epochs} epochs; final train {curve.train[-1]:.6f}, val {curve.val[-1]:.6f}")


def cmd_evaluate(args):
    model, training = checkpoint.load_checkpoint(args.checkpoint, with_metadata=True)
    test_dir = Path(args.testset)
    eeg = data.load_matrix(test_dir / "test_eeg.ednb")
    emg = data.load_matrix(test_dir / "test_emg.ednb")
    if eeg.shape != emg.shape:
        raise ShapeError(f"test EEG {eeg.shape} and EMG {emg.shape} must be row-paired")
    if eeg.shape[1] != model.input_len:
        raise ShapeError(f"test epochs have {eeg.shape[1]} samples, model expects {model.input_len}")
    pairs = np.stack([np.arange(len(eeg))] * 2, axis=1)
    test_set = data.build_eval_set(eeg, emg, pairs)
    meta = {"checkpoint": str(args.checkpoint), "config_hash": training.get("config_hash", ""),
            "seed": training.get("seed", ""), "fs": args.fs, "n_examples": len(test_set)}
    report = evaluate(model.predict_normalized, test_set, fs=args.fs, metadata=meta)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv")
    data.write_manifest(out / "report.manifest", meta)
    o = report.overall
    print(f"RRMSE_t {o['model']['rrmse_t'][0]:.4f} (noisy {o['noisy']['rrmse_t'][0]:.4f})  "
          f"RRMSE_f {o['model']['rrmse_f'][0]:.4f} (noisy {o['noisy']['rrmse_f'][0]:.4f})  "
          f"CC {o['model']['cc'][0]:.4f} (noisy {o['noisy']['cc'][0]:.4f})")


def cmd_denoise(args):
    model = checkpoint.load_checkpoint(args.checkpoint)
    noisy = data.load_matrix(args.input)
    if noisy.shape[1] != model.input_len:
        raise ShapeError(f"input has {noisy.shape[1]} columns, model expects {model.input_len}")
    data.save_matrix(denoise(model, noisy), args.output)
    print(f"denoised {len(noisy)} epochs -> {args.output}")


def cmd_gradcheck(args):
    results = run_suite(args.tolerance, args.seeds, args.max_checks, args.corrupt_backward)
    ok = True
    for name, report in results:
        status = "PASS" if report.passed else "FAIL"
        ok &= report.passed
        print(f"{status} {name:<24s} max rel err {report.max_error:.3e}")
    print(f"{'PASS' if ok else 'FAIL'} gradcheck at tolerance {args.tolerance:g}")
    if not ok:
        raise NumericError("gradient check failed")


# -- parser ---------------------------------------------------------------

def build_parser():
    p = _Parser(prog="eegdenoise", description="CNN removal of muscle artifacts from EEG epochs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch losses")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth-data", help="write a synthetic EEG/EMG corpus")
    s.add_argument("--n-eeg", type=_positive_int, required=True)
    s.add_argument("--n-emg", type=_positive_int, required=True)
    s.add_argument("--length", type=_positive_int, default=1024)
    s.add_argument("--fs", type=float, default=512.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth_data)

    t = sub.add_parser("train", help="build datasets from a manifest and train a model")
    t.add_argument("--data", required=True, help="dataset directory or manifest file")
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="key=value file; flags override it")
    t.add_argument("--arch", choices=["novel_cnn", "fcnn"])
    t.add_argument("--width-scale", dest="width_scale")
    t.add_argument("--hidden-layers", dest="hidden_layers", type=int)
    t.add_argument("--hidden-width", dest="hidden_width", type=int)
    t.add_argument("--epochs", type=_positive_int)
    t.add_argument("--batch-size", dest="batch_size", type=_positive_int)
    t.add_argument("--lr", type=float)
    t.add_argument("--beta", type=float)
    t.add_argument("--eps", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--remix", type=_positive_int)
    t.add_argument("--snr-min", dest="snr_min", type=float)
    t.add_argument("--snr-max", dest="snr_max", type=float)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="per-SNR metrics on a held-out test set")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--testset", required=True, help="directory with test_eeg.ednb and test_emg.ednb")
    e.add_argument("--out", required=True)
    e.add_argument("--fs", type=float, default=512.0)
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("denoise", help="denoise every row of an epoch matrix")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.set_defaults(func=cmd_denoise)

    g = sub.add_parser("gradcheck", help="finite-difference check of all backward passes")
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--seeds", type=_positive_int, default=20)
    g.add_argument("--max-checks", dest="max_checks", type=_positive_int, default=8,
                   help="coordinates probed per parameter group of the CNN")
    g.add_argument("--corrupt-backward", dest="corrupt_backward", action="store_true",
                   help="flip one gradient's sign (negative control)")
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"eegdenoise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ShapeError, DegenerateSignalError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
