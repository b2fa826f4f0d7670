"""Joint training of the front-end and CRNN with early stopping.

Mixtures are framed once, cut into non-overlapping fixed-length frame
sequences (trailing partial sequences dropped, GRU state reset per
sequence), and shuffled into mini-batches. After every epoch the
validation partition is scored at the 0.5 threshold; the checkpoint with
the best validation F1 is kept and returned (best, not last). Training
stops when the score has not improved for ``patience`` epochs or at
``max_epochs``.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import audio_io, checkpoint, crnn, frontend, metrics, nn
from .errors import ConfigError, NumericsError


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 300
    patience: int = 65
    lr: float = 1e-3
    batch_size: int = 8
    seq_len: int = 256
    seed: int = 0
    # optional early exit once validation F1 reaches a target; used by the
    # desk-scale overfit checks to avoid burning epochs after success
    stop_at_val_f1: float | None = None

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if not 0 < self.patience < self.max_epochs:
            raise ConfigError(
                f"patience must be in [1, max_epochs), got {self.patience}"
            )
        if self.seq_len < 1:
            raise ConfigError("seq_len must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_f1: float
    val_er: float
    seconds: float


@dataclass
class TrainReport:
    epochs: list
    best_epoch: int
    stopping_reason: str

    @property
    def best_val_f1(self):
        return max(e.val_f1 for e in self.epochs)


@dataclass
class ModelCheckpoint:
    """Named tensors plus the meta record needed to rebuild the model."""

    tensors: dict
    meta: dict

    def save(self, path):
        return checkpoint.save_checkpoint(path, self.tensors, self.meta)

    @classmethod
    def load(cls, path):
        tensors, meta = checkpoint.load_checkpoint(path)
        return cls(tensors=tensors, meta=meta)


def snapshot_model(frontend_params, model, class_names=()):
    tensors = {
        f"frontend.{name}": p.values.copy()
        for name, p in frontend_params.parameters()
    }
    for name, value in model.state_tensors().items():
        tensors[f"crnn.{name}"] = value.copy()
    meta = {
        "kind": "sed_model",
        "classes": list(class_names),
        "frontend": {
            "mode": frontend_params.mode.value,
            "learn_re_im": frontend_params.learn_re_im,
            "learn_mel": frontend_params.learn_mel,
            "n": frontend_params.n,
            "m": frontend_params.m,
            "sample_rate": frontend_params.sample_rate,
            "epsilon": frontend_params.epsilon,
        },
        "crnn": {
            "n_filters": model.config.n_filters,
            "pool_arrangement": list(model.config.pool_arrangement),
            "n_recurrent_layers": model.config.n_recurrent_layers,
            "n_classes": model.config.n_classes,
            "kernel_shape": list(model.config.kernel_shape),
            "dropout_rate": model.config.dropout_rate,
            "input_features": model.config.input_features,
        },
    }
    return ModelCheckpoint(tensors=tensors, meta=meta)


def restore_model(ckpt):
    """Rebuild (FrontendParams, CrnnModel) from a checkpoint."""
    fmeta = ckpt.meta["frontend"]
    params = frontend.make_frontend(
        fmeta["mode"],
        n=fmeta["n"],
        m=fmeta["m"],
        sample_rate=fmeta["sample_rate"],
        learn_re_im=fmeta["learn_re_im"],
        learn_mel=fmeta["learn_mel"],
        epsilon=fmeta["epsilon"],
    )
    for name, p in params.parameters():
        p.values[...] = ckpt.tensors[f"frontend.{name}"]
    cmeta = ckpt.meta["crnn"]
    config = crnn.CrnnConfig(
        n_filters=cmeta["n_filters"],
        pool_arrangement=tuple(cmeta["pool_arrangement"]),
        n_recurrent_layers=cmeta["n_recurrent_layers"],
        n_classes=cmeta["n_classes"],
        kernel_shape=tuple(cmeta["kernel_shape"]),
        dropout_rate=cmeta["dropout_rate"],
        input_features=cmeta["input_features"],
    )
    model = crnn.build(config, seed=0)
    model.load_state(
        {k[len("crnn.") :]: v for k, v in ckpt.tensors.items() if k.startswith("crnn.")}
    )
    return params, model


def cut_sequences(mixtures, seq_len):
    """Frame each mixture and cut non-overlapping seq_len-frame chunks."""
    sequences = []
    for mix in mixtures:
        fm = audio_io.frame_clip(mix.clip)
        n_frames = fm.data.shape[1]
        if mix.roll.n_frames != n_frames:
            raise ValueError(
                f"{mix.name}: roll has {mix.roll.n_frames} frames, audio grid has {n_frames}"
            )
        for k in range(n_frames // seq_len):
            sl = slice(k * seq_len, (k + 1) * seq_len)
            sequences.append((fm.data[:, sl], mix.roll.data[:, sl].astype(np.float64)))
    return sequences


def _forward_mixture(frontend_params, model, mix):
    fm = audio_io.frame_clip(mix.clip)
    feats = frontend.frontend_forward(fm.data, frontend_params).features
    return model.forward(feats, training=False)


def evaluate_model(frontend_params, model, mixtures, return_rolls=False):
    """Score a partition at the 0.5 threshold (micro over all mixtures)."""
    if not mixtures:
        raise ConfigError("cannot evaluate an empty partition")
    preds, truths = [], []
    with nn.no_grad():
        for mix in mixtures:
            probs = _forward_mixture(frontend_params, model, mix)
            preds.append(crnn.predict_binary(probs))
            truths.append(mix.roll.data)
    pred = np.concatenate(preds, axis=1)
    truth = np.concatenate(truths, axis=1)
    report = metrics.score_report(pred, truth)
    if return_rolls:
        labels = mixtures[0].roll.labels
        return report, metrics.EventRoll(pred, labels), metrics.EventRoll(truth, labels)
    return report.f1, report.er


def evaluate(ckpt, mixtures):
    """Restore a checkpoint and score one partition at the 0.5 threshold."""
    params, model = restore_model(ckpt)
    return evaluate_model(params, model, mixtures)


def train(frontend_params, model, data, cfg):
    """Run the full training loop; returns (best checkpoint, report)."""
    if not data.train:
        raise ConfigError("empty training partition")
    if not data.val:
        raise ConfigError("empty validation partition")
    sequences = cut_sequences(data.train, cfg.seq_len)
    if not sequences:
        raise ConfigError(
            f"no training mixture is at least {cfg.seq_len} frames long"
        )
    if sequences[0][0].shape[0] != frontend_params.n:
        raise ConfigError(
            f"frame length {sequences[0][0].shape[0]} != frontend N={frontend_params.n}"
        )

    all_params = [p for _, p in frontend_params.parameters()] + [
        p for _, p in model.parameters()
    ]
    learnable = [p for _, p in frontend_params.learnable()] + [
        p for _, p in model.parameters()
    ]
    opt = nn.Adam(learnable, lr=cfg.lr)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    best_f1 = -1.0
    best_epoch = 0
    best_ckpt = None
    since_improvement = 0
    stats = []
    reason = "max_epochs"

    for epoch in range(1, cfg.max_epochs + 1):
        tic = time.perf_counter()
        order = rng.permutation(len(sequences))
        total_loss = 0.0
        for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
            chosen = order[start : start + cfg.batch_size]
            xs = np.stack([sequences[i][0] for i in chosen])
            ys = np.stack([sequences[i][1] for i in chosen])
            for p in all_params:
                p.zero_grad()
            try:
                feats = frontend.frontend_forward(xs, frontend_params).features
                probs = model.forward(feats, training=True)
                loss = nn.bce_loss(probs, nn.Tensor(ys))
            except NumericsError as err:
                raise NumericsError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}: {err}"
                ) from err
            loss.backward()
            opt.step()
            total_loss += float(loss.values) * len(chosen)
        train_loss = total_loss / len(order)

        val_f1, val_er = evaluate_model(frontend_params, model, data.val)
        stats.append(
            EpochStats(
                epoch=epoch,
                train_loss=train_loss,
                val_f1=val_f1,
                val_er=val_er,
                seconds=time.perf_counter() - tic,
            )
        )
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_ckpt = snapshot_model(frontend_params, model, data.class_names)
            since_improvement = 0
        else:
            since_improvement += 1
        if cfg.stop_at_val_f1 is not None and best_f1 >= cfg.stop_at_val_f1:
            reason = "target_reached"
            break
        if since_improvement >= cfg.patience:
            reason = "early_stopping"
            break

    report = TrainReport(epochs=stats, best_epoch=best_epoch, stopping_reason=reason)
    return best_ckpt, report


def write_report_csv(report, path):
    """Deterministic per-epoch CSV: epoch, loss, val_f1, val_er."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "val_f1", "val_er"])
        for e in report.epochs:
            writer.writerow([e.epoch, repr(e.train_loss), repr(e.val_f1), repr(e.val_er)])


def write_summary_json(report, path, extra=None):
    """Structured summary; wall-clock timing lives here, not in the CSV."""
    payload = {
        "best_epoch": report.best_epoch,
        "best_val_f1": report.best_val_f1,
        "stopping_reason": report.stopping_reason,
        "n_epochs": len(report.epochs),
        "seconds_per_epoch": [round(e.seconds, 6) for e in report.epochs],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
