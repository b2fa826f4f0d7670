"""Experiment orchestration CLI.

Subcommands: datagen, train, gridsearch, score, analyze. All delimited
outputs are CSV or JSON; checkpoints use the flat binary container; the
report paths additionally render matplotlib figures next to the tables
(disable with --no-figures). Exit codes: 0 success, 2 configuration
error, 3 IO/parse error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, audio_io, crnn, datagen, frontend, metrics, plots, training
from .errors import ConfigError, DataFormatError, NumericsError
from .frontend import FrontendMode

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

SUPPORTED_RATES = (8000, 16000, 24000, 44100)

GRID_FILTERS = (96, 256)
GRID_RECURRENT_LAYERS = (1, 2, 3)
GRID_POOLINGS = (
    (4,),
    (2, 2),
    (4, 2),
    (8, 5),
    (2, 2, 2),
    (5, 4, 2),
    (2, 2, 2, 1),
    (5, 2, 2, 2),
)


@dataclass(frozen=True)
class GridSpace:
    filters: tuple = GRID_FILTERS
    recurrent_layers: tuple = GRID_RECURRENT_LAYERS
    poolings: tuple = GRID_POOLINGS

    def combinations(self):
        combos = []
        combo_id = 0
        for f in self.filters:
            for r in self.recurrent_layers:
                for pooling in self.poolings:
                    combos.append(
                        {
                            "combo_id": combo_id,
                            "filters": f,
                            "recurrent_layers": r,
                            "pooling": pooling,
                            "conv_layers": len(pooling),
                        }
                    )
                    combo_id += 1
        return combos


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got '{text}'")


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got '{text}'")


def _check_rate(rate):
    if rate not in SUPPORTED_RATES:
        raise ConfigError(
            f"sample rate {rate} not in supported set {SUPPORTED_RATES}"
        )
    return rate


def _echo_config(path, sections):
    """Write the fully resolved run configuration as key = value INI."""
    parser = configparser.ConfigParser()
    for name, values in sections.items():
        parser[name] = {k: str(v) for k, v in values.items()}
    with open(path, "w") as fh:
        parser.write(fh)


def _percent_line(report):
    return (
        f"F1 {100.0 * report.f1:.1f}, ER {100.0 * report.er:.1f}"
        f" (TP {report.tp} FP {report.fp} FN {report.fn}"
        f" S {report.substitutions} D {report.deletions} I {report.insertions})"
    )


# -- datagen ------------------------------------------------------------------------


PAPER_SCALE_PROTOCOL = """\
The full-scale protocol this toy generator stands in for (not bundled):
100 polyphonic mixtures built from 994 isolated recorded samples of 16
sound event classes at 44.1 kHz, 566 minutes total; segments of 3-15 s
cut from randomly chosen event instances; 60%/20%/20% train/test/val
split with disjoint instance pools per partition; no background noise.
Approximate it here with: --classes 16 --mixtures 100 --duration 340
--rate 44100 --instances 60 (programmatic tone events, not recordings).
"""


def cmd_datagen(args):
    if args.paper_scale:
        print(PAPER_SCALE_PROTOCOL, end="")
        return 0
    if args.out is None:
        raise ConfigError("--out is required (or use --paper-scale)")
    split = args.split
    if len(split) != 3:
        raise ConfigError(f"split needs three fractions, got {split}")
    dataset = datagen.make_dataset(
        args.mixtures,
        duration=args.duration,
        polyphony=args.polyphony,
        split=tuple(split),
        seed=args.seed,
        rate=_check_rate(args.rate),
        n_classes=args.classes,
        n_instances=args.instances,
    )
    out = Path(args.out)
    datagen.save_dataset(dataset, out)
    _echo_config(
        out / "config.ini",
        {
            "run": {"command": "datagen", "seed": args.seed},
            "dataset": dataset.config,
        },
    )
    print(
        f"wrote {len(dataset.train)}/{len(dataset.val)}/{len(dataset.test)} "
        f"train/val/test mixtures to {out}"
    )
    return 0


# -- train --------------------------------------------------------------------------


def _load_dataset_at_rate(dataset_dir, rate):
    dataset = datagen.load_dataset(dataset_dir)
    if rate is not None and rate != dataset.sample_rate:
        dataset = datagen.resample_dataset(dataset, _check_rate(rate))
    return dataset


def _build_run(dataset, args, seed):
    n, _ = audio_io.frame_params(dataset.sample_rate)
    params = frontend.make_frontend(
        args.mode,
        n=n,
        m=args.features,
        sample_rate=dataset.sample_rate,
        learn_re_im=args.learn_re_im,
        learn_mel=args.learn_mel,
    )
    config = crnn.CrnnConfig(
        n_filters=args.filters,
        pool_arrangement=args.pooling,
        n_recurrent_layers=args.recurrent_layers,
        n_classes=len(dataset.class_names),
        kernel_shape=args.kernel,
        dropout_rate=args.dropout,
        input_features=args.features,
    )
    model = crnn.build(config, seed=seed)
    cfg = training.TrainConfig(
        max_epochs=args.epochs,
        patience=args.patience,
        lr=args.lr,
        batch_size=args.batch_size,
        seq_len=args.seq_len,
        seed=seed,
        stop_at_val_f1=args.stop_at_f1,
    )
    return params, model, cfg


def _run_single_training(dataset, args, seed, out_dir, figures=True):
    out_dir.mkdir(parents=True, exist_ok=True)
    params, model, cfg = _build_run(dataset, args, seed)
    ckpt, report = training.train(params, model, dataset, cfg)
    training.write_report_csv(report, out_dir / "report.csv")
    ckpt.save(out_dir / "best.ckpt")
    best_params, best_model = training.restore_model(ckpt)
    test_report, pred, truth = training.evaluate_model(
        best_params, best_model, dataset.test, return_rolls=True
    )
    metrics.write_roll_csv(out_dir / "test_pred.csv", pred)
    metrics.write_roll_csv(out_dir / "test_truth.csv", truth)
    training.write_summary_json(
        report,
        out_dir / "summary.json",
        extra={
            "seed": seed,
            "test_f1": test_report.f1,
            "test_er": test_report.er,
            "test_counts": {
                "tp": test_report.tp,
                "fp": test_report.fp,
                "fn": test_report.fn,
                "s": test_report.substitutions,
                "d": test_report.deletions,
                "i": test_report.insertions,
            },
        },
    )
    if figures:
        plots.plot_training_curves(report, out_dir / "curves.png")
    print(
        f"seed {seed}: best epoch {report.best_epoch} "
        f"(val F1 {100.0 * report.best_val_f1:.1f}), "
        f"stopped by {report.stopping_reason}"
    )
    print(f"seed {seed} test: {_percent_line(test_report)}")
    return report, test_report


def cmd_train(args):
    dataset = _load_dataset_at_rate(args.dataset, args.rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(args.seeds) if args.seeds else [args.seed]
    _echo_config(
        out / "config.ini",
        {
            "run": {"command": "train", "seeds": ",".join(map(str, seeds))},
            "dataset": {
                "path": args.dataset,
                "sample_rate": dataset.sample_rate,
                "classes": ",".join(dataset.class_names),
            },
            "frontend": {
                "mode": args.mode,
                "learn_re_im": args.learn_re_im,
                "learn_mel": args.learn_mel,
                "features": args.features,
                "frame_len": audio_io.frame_params(dataset.sample_rate)[0],
            },
            "crnn": {
                "filters": args.filters,
                "recurrent_layers": args.recurrent_layers,
                "pooling": ",".join(map(str, args.pooling)),
                "kernel": ",".join(map(str, args.kernel)),
                "dropout": args.dropout,
            },
            "train": {
                "epochs": args.epochs,
                "patience": args.patience,
                "lr": args.lr,
                "batch_size": args.batch_size,
                "seq_len": args.seq_len,
                "stop_at_f1": args.stop_at_f1,
            },
        },
    )
    results = []
    for seed in seeds:
        run_dir = out if len(seeds) == 1 else out / f"seed_{seed}"
        results.append(
            _run_single_training(dataset, args, seed, run_dir, figures=not args.no_figures)
        )
    if len(seeds) > 1:
        f1s = np.array([t.f1 for _, t in results])
        ers = np.array([t.er for _, t in results])
        sweep = {
            "seeds": seeds,
            "test_f1_mean": float(f1s.mean()),
            "test_f1_std": float(f1s.std()),
            "test_er_mean": float(ers.mean()),
            "test_er_std": float(ers.std()),
        }
        (out / "sweep_summary.json").write_text(
            json.dumps(sweep, indent=2, sort_keys=True) + "\n"
        )
        print(
            f"sweep over {len(seeds)} seeds: "
            f"F1 {100 * sweep['test_f1_mean']:.1f} +/- {100 * sweep['test_f1_std']:.1f}, "
            f"ER {100 * sweep['test_er_mean']:.1f} +/- {100 * sweep['test_er_std']:.1f}"
        )
    return 0


# -- gridsearch -----------------------------------------------------------------------


def _grid_worker(payload):
    """Train one grid combination; runs in a worker process."""
    combo = payload["combo"]
    try:
        dataset = _load_dataset_at_rate(payload["dataset_dir"], payload["rate"])
        ns = argparse.Namespace(**payload["args"])
        ns.filters = combo["filters"]
        ns.recurrent_layers = combo["recurrent_layers"]
        ns.pooling = combo["pooling"]
        params, model, cfg = _build_run(dataset, ns, payload["seed"])
        ckpt, report = training.train(params, model, dataset, cfg)
        ckpt.save(payload["ckpt_path"])
        return {
            **combo,
            "status": "ok",
            "best_epoch": report.best_epoch,
            "val_f1": report.best_val_f1,
            "val_er": report.epochs[report.best_epoch - 1].val_er,
            "error": "",
        }
    except Exception as err:  # isolate failures to one combination
        return {
            **combo,
            "status": "failed",
            "best_epoch": 0,
            "val_f1": float("nan"),
            "val_er": float("nan"),
            "error": f"{type(err).__name__}: {err}",
        }


def _write_grid_csv(path, rows):
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(
            [
                "combo_id",
                "filters",
                "recurrent_layers",
                "pooling",
                "conv_layers",
                "status",
                "best_epoch",
                "val_f1",
                "val_er",
                "error",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    r["combo_id"],
                    r["filters"],
                    r["recurrent_layers"],
                    "x".join(map(str, r["pooling"])),
                    r["conv_layers"],
                    r["status"],
                    r["best_epoch"],
                    repr(r["val_f1"]),
                    repr(r["val_er"]),
                    r["error"],
                ]
            )


def cmd_gridsearch(args):
    combos = GridSpace().combinations()
    if args.limit is not None:
        combos = combos[: args.limit]
    if args.dry_run:
        for c in combos:
            print(
                f"combo {c['combo_id']:02d}: filters={c['filters']} "
                f"recurrent_layers={c['recurrent_layers']} "
                f"pooling={'x'.join(map(str, c['pooling']))} "
                f"conv_layers={c['conv_layers']}"
            )
        print(f"{len(combos)} combinations")
        return 0

    _load_dataset_at_rate(args.dataset, args.rate)  # fail fast on IO problems
    out = Path(args.out)
    (out / "combos").mkdir(parents=True, exist_ok=True)
    arg_record = {
        "mode": args.mode,
        "learn_re_im": args.learn_re_im,
        "learn_mel": args.learn_mel,
        "features": args.features,
        "kernel": args.kernel,
        "dropout": args.dropout,
        "epochs": args.epochs,
        "patience": args.patience,
        "lr": args.lr,
        "batch_size": args.batch_size,
        "seq_len": args.seq_len,
        "stop_at_f1": args.stop_at_f1,
    }
    payloads = [
        {
            "combo": c,
            "dataset_dir": args.dataset,
            "rate": args.rate,
            "seed": args.seed,
            "args": arg_record,
            "ckpt_path": str(out / "combos" / f"combo_{c['combo_id']:02d}.ckpt"),
        }
        for c in combos
    ]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_grid_worker, payloads))
    else:
        rows = [_grid_worker(p) for p in payloads]
    rows.sort(key=lambda r: r["combo_id"])  # merged deterministically

    _echo_config(
        out / "config.ini",
        {
            "run": {"command": "gridsearch", "seed": args.seed, "limit": args.limit},
            "dataset": {"path": args.dataset, "rate": args.rate},
            "space": {
                "filters": ",".join(map(str, GRID_FILTERS)),
                "recurrent_layers": ",".join(map(str, GRID_RECURRENT_LAYERS)),
                "poolings": " ".join("x".join(map(str, p)) for p in GRID_POOLINGS),
            },
            "train": arg_record | {"kernel": ",".join(map(str, args.kernel))},
        },
    )
    _write_grid_csv(out / "results.csv", rows)
    if not args.no_figures:
        plots.plot_grid_results(rows, out / "gridsearch.png")

    ranked = sorted(
        (r for r in rows if r["status"] == "ok"),
        key=lambda r: (-r["val_f1"], r["val_er"], r["combo_id"]),
    )
    for r in ranked:
        print(
            f"combo {r['combo_id']:02d}: val F1 {100 * r['val_f1']:.1f}, "
            f"val ER {100 * r['val_er']:.1f} "
            f"[filters={r['filters']} rec={r['recurrent_layers']} "
            f"pooling={'x'.join(map(str, r['pooling']))}]"
        )
    for r in rows:
        if r["status"] == "failed":
            print(f"combo {r['combo_id']:02d}: FAILED ({r['error']})")
    if not ranked:
        print("no combination finished successfully")
        return 0
    best = ranked[0]
    ckpt = training.ModelCheckpoint.load(
        out / "combos" / f"combo_{best['combo_id']:02d}.ckpt"
    )
    dataset = _load_dataset_at_rate(args.dataset, args.rate)
    params, model = training.restore_model(ckpt)
    test_report, _, _ = training.evaluate_model(
        params, model, dataset.test, return_rolls=True
    )
    print(f"best combo {best['combo_id']:02d} on test: {_percent_line(test_report)}")
    return 0


# -- score ---------------------------------------------------------------------------


def cmd_score(args):
    pred = metrics.read_roll_csv(args.pred)
    truth = metrics.read_roll_csv(args.truth)
    if pred.data.shape != truth.data.shape:
        raise DataFormatError(
            f"roll shapes differ: pred {pred.data.shape} vs truth {truth.data.shape}"
        )
    report = metrics.score_report(pred, truth)
    print(_percent_line(report))
    return 0


# -- analyze --------------------------------------------------------------------------


def cmd_analyze(args):
    ckpt = training.ModelCheckpoint.load(args.checkpoint)
    params, _ = training.restore_model(ckpt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(
        out / "config.ini",
        {
            "run": {"command": "analyze", "checkpoint": args.checkpoint},
            "frontend": {
                "mode": params.mode.value,
                "n": params.n,
                "m": params.m,
                "sample_rate": params.sample_rate,
            },
        },
    )

    reports = [
        analysis.filter_spectrum_peaks(params, which) for which in analysis.MATRIX_IDS
    ]
    analysis.write_peaks_csv(out / "peaks.csv", reports)
    for rep in reports:
        moved = rep.moved_peaks()
        if moved.size:
            print(
                f"note: {rep.matrix_id} peaks moved off-center for "
                f"{moved.size} filters (e.g. {moved[:5].tolist()})"
            )

    half = params.n // 2
    indices = args.filters if args.filters else tuple(range(1, min(9, half)))
    table = analysis.filter_waveform_dump(params, indices)
    analysis.write_filters_csv(out / "filters.csv", table)
    analysis.write_filter_spectra_csv(out / "filters_spectra.csv", table)

    has_mel = params.mode in (FrontendMode.MEL, FrontendMode.LOGMEL)
    want_mel = args.melresp or (has_mel and not args.no_melresp)
    mel_table = None
    if want_mel:
        mel_table = analysis.mel_response_dump(params)  # raises in DFT mode
        analysis.write_melresp_csv(out / "melresp.csv", mel_table)

    if not args.no_figures:
        plots.plot_filter_peaks(reports, out / "peaks.png")
        plots.plot_filter_waveforms(table, out / "filters.png")
        if mel_table is not None:
            initial = frontend.init_mel_weights(params.m, params.n, params.sample_rate)
            plots.plot_mel_responses(initial, mel_table, out / "melresp.png")

    written = ["peaks.csv", "filters.csv", "filters_spectra.csv"]
    if mel_table is not None:
        written.append("melresp.csv")
    print(f"wrote {', '.join(written)} to {out}")
    return 0


# -- parser ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sedlearn",
        description="Sound event detection with a trainable time-frequency front-end",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate a toy dataset")
    p.add_argument("--out", required=False, default=None)
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                   help="print the full-scale protocol this toy stands in for")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--mixtures", type=int, default=10)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--polyphony", type=int, default=2)
    p.add_argument("--rate", type=int, default=8000)
    p.add_argument("--split", type=_float_list, default=(0.6, 0.2, 0.2))
    p.add_argument("--instances", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_datagen)

    def add_model_flags(p, with_grid_dims=True):
        p.add_argument("--mode", default="logmel", choices=["dft", "mel", "logmel"])
        p.add_argument("--learn-re-im", action="store_true", dest="learn_re_im")
        p.add_argument("--learn-mel", action="store_true", dest="learn_mel")
        p.add_argument("--rate", type=int, default=None,
                       help="resample the dataset to this rate first")
        p.add_argument("--features", type=int, default=40)
        if with_grid_dims:
            p.add_argument("--filters", type=int, default=16)
            p.add_argument("--recurrent-layers", type=int, default=1,
                           dest="recurrent_layers")
            p.add_argument("--pooling", type=_int_list, default=(5, 4, 2))
        p.add_argument("--kernel", type=_int_list, default=(3, 3))
        p.add_argument("--dropout", type=float, default=0.25)
        p.add_argument("--epochs", type=int, default=300)
        p.add_argument("--patience", type=int, default=65)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--batch-size", type=int, default=8, dest="batch_size")
        p.add_argument("--seq-len", type=int, default=256, dest="seq_len")
        p.add_argument("--stop-at-f1", type=float, default=None, dest="stop_at_f1")
        p.add_argument("--no-figures", action="store_true", dest="no_figures")

    p = sub.add_parser("train", help="train one experiment configuration")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    add_model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=_int_list, default=None,
                   help="run a seed sweep and report mean +/- std")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gridsearch", help="search the hyperparameter grid")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default="gridsearch_out")
    add_model_flags(p, with_grid_dims=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dry-run", action="store_true", dest="dry_run")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("score", help="score a prediction roll against a truth roll")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("analyze", help="export learned-filter analyses")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--filters", type=_int_list, default=None)
    p.add_argument("--melresp", action="store_true",
                   help="require the mel response dump (error without a mel head)")
    p.add_argument("--no-melresp", action="store_true", dest="no_melresp")
    p.add_argument("--no-figures", action="store_true", dest="no_figures")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError, OSError) as err:
        print(f"io error: {err}", file=sys.stderr)
        return EXIT_IO
    except NumericsError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
