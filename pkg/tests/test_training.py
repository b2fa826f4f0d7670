import numpy as np
import pytest

from sedlearn import crnn, datagen, frontend, metrics, training
from sedlearn.crnn import CrnnConfig
from sedlearn.errors import ConfigError, NumericsError
from sedlearn.training import TrainConfig


def _toy_dataset(seed=0, n_mixtures=5, duration=3.0):
    return datagen.make_dataset(
        n_mixtures, duration=duration, seed=seed, rate=8000, n_classes=2
    )


def _small_setup(dataset, mode="logmel", learn_re_im=False, learn_mel=False, seed=1):
    params = frontend.make_frontend(
        mode,
        n=320,
        m=40,
        sample_rate=dataset.sample_rate,
        learn_re_im=learn_re_im,
        learn_mel=learn_mel,
    )
    config = CrnnConfig(
        n_filters=4,
        pool_arrangement=(5, 4, 2),
        n_recurrent_layers=1,
        n_classes=len(dataset.class_names),
        dropout_rate=0.0,
        input_features=40,
    )
    return params, crnn.build(config, seed=seed)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(max_epochs=10, patience=10)
    with pytest.raises(ConfigError):
        TrainConfig(seq_len=0)
    TrainConfig()  # defaults are the protocol values


def test_patience_arithmetic_with_frozen_score():
    dataset = _toy_dataset()
    params, model = _small_setup(dataset)
    cfg = TrainConfig(max_epochs=10, patience=1, lr=0.0, batch_size=4, seq_len=32)
    ckpt, report = training.train(params, model, dataset, cfg)
    assert len(report.epochs) == 2
    assert report.stopping_reason == "early_stopping"
    assert report.best_epoch == 1


def test_loss_decreases_on_toy_set():
    dataset = _toy_dataset(seed=3)
    params, model = _small_setup(dataset, seed=2)
    cfg = TrainConfig(max_epochs=5, patience=4, batch_size=4, seq_len=32)
    _, report = training.train(params, model, dataset, cfg)
    assert report.epochs[-1].train_loss < report.epochs[0].train_loss


def test_best_checkpoint_tracks_max_val_f1():
    dataset = _toy_dataset(seed=4)
    params, model = _small_setup(dataset, seed=3)
    cfg = TrainConfig(max_epochs=6, patience=5, batch_size=4, seq_len=32)
    ckpt, report = training.train(params, model, dataset, cfg)
    f1s = [e.val_f1 for e in report.epochs]
    assert report.best_val_f1 == max(f1s)
    assert report.epochs[report.best_epoch - 1].val_f1 == max(f1s)
    # restored best checkpoint reproduces the best recorded validation score
    f1, er = training.evaluate(ckpt, dataset.val)
    assert f1 == max(f1s)


def test_frozen_frontend_bit_exact_after_training():
    dataset = _toy_dataset(seed=5)
    params, model = _small_setup(dataset, seed=4)
    before = {name: p.values.copy() for name, p in params.parameters()}
    cfg = TrainConfig(max_epochs=3, patience=2, batch_size=4, seq_len=32)
    training.train(params, model, dataset, cfg)
    for name, p in params.parameters():
        assert np.array_equal(p.values, before[name]), name


def test_learned_frontend_actually_moves():
    dataset = _toy_dataset(seed=6)
    params, model = _small_setup(dataset, mode="dft", learn_re_im=True, seed=5)
    before = params.w_re.values.copy()
    cfg = TrainConfig(max_epochs=2, patience=1, batch_size=4, seq_len=32)
    training.train(params, model, dataset, cfg)
    assert not np.array_equal(params.w_re.values, before)


def test_determinism_same_seed_same_report():
    reports = []
    for _ in range(2):
        dataset = _toy_dataset(seed=7)
        params, model = _small_setup(dataset, seed=6)
        cfg = TrainConfig(max_epochs=3, patience=2, batch_size=4, seq_len=32, seed=9)
        ckpt, report = training.train(params, model, dataset, cfg)
        reports.append((ckpt, report))
    (ck_a, rep_a), (ck_b, rep_b) = reports
    for ea, eb in zip(rep_a.epochs, rep_b.epochs):
        assert ea.train_loss == eb.train_loss
        assert ea.val_f1 == eb.val_f1 and ea.val_er == eb.val_er
    assert ck_a.meta == ck_b.meta
    for name in ck_a.tensors:
        assert np.array_equal(ck_a.tensors[name], ck_b.tensors[name]), name


def test_untrained_half_probability_predicts_nothing():
    dataset = _toy_dataset(seed=8)
    params, model = _small_setup(dataset, seed=7)
    for _, p in model.parameters():
        p.values[...] = 0.0
    f1, er = training.evaluate_model(params, model, dataset.test)
    assert f1 == 0.0
    assert er == 1.0  # every reference frame is a deletion


def test_evaluate_cross_checks_with_metrics_on_dumped_rolls(tmp_path):
    dataset = _toy_dataset(seed=9)
    params, model = _small_setup(dataset, seed=8)
    report, pred, truth = training.evaluate_model(
        params, model, dataset.test, return_rolls=True
    )
    metrics.write_roll_csv(tmp_path / "pred.csv", pred)
    metrics.write_roll_csv(tmp_path / "truth.csv", truth)
    re_read = metrics.score_report(
        metrics.read_roll_csv(tmp_path / "pred.csv"),
        metrics.read_roll_csv(tmp_path / "truth.csv"),
    )
    assert re_read.f1 == report.f1 and re_read.er == report.er


def test_checkpoint_roundtrip_through_disk(tmp_path):
    dataset = _toy_dataset(seed=10)
    params, model = _small_setup(dataset, seed=9)
    cfg = TrainConfig(max_epochs=2, patience=1, batch_size=4, seq_len=32)
    ckpt, _ = training.train(params, model, dataset, cfg)
    path = tmp_path / "best.ckpt"
    ckpt.save(path)
    loaded = training.ModelCheckpoint.load(path)
    assert loaded.meta == ckpt.meta
    for name in ckpt.tensors:
        assert np.array_equal(loaded.tensors[name], ckpt.tensors[name])
    assert training.evaluate(loaded, dataset.val) == training.evaluate(
        ckpt, dataset.val
    )


def test_empty_partition_rejected():
    dataset = _toy_dataset(seed=11)
    params, model = _small_setup(dataset, seed=10)
    dataset.val.clear()
    with pytest.raises(ConfigError):
        training.train(params, model, dataset, TrainConfig(max_epochs=2, patience=1))


def test_sequences_longer_than_mixture_rejected():
    dataset = _toy_dataset(seed=12)
    params, model = _small_setup(dataset, seed=11)
    cfg = TrainConfig(max_epochs=2, patience=1, seq_len=100_000)
    with pytest.raises(ConfigError):
        training.train(params, model, dataset, cfg)


@pytest.mark.filterwarnings("ignore:overflow")
def test_nan_loss_aborts_naming_batch():
    dataset = _toy_dataset(seed=13)
    params, model = _small_setup(dataset, seed=12)
    model.output.w.values[...] = 1e308
    cfg = TrainConfig(max_epochs=2, patience=1, batch_size=4, seq_len=32)
    with pytest.raises(NumericsError, match=r"epoch 1, batch \d+"):
        training.train(params, model, dataset, cfg)


def test_report_csv_layout(tmp_path):
    dataset = _toy_dataset(seed=14)
    params, model = _small_setup(dataset, seed=13)
    cfg = TrainConfig(max_epochs=2, patience=1, batch_size=4, seq_len=32)
    _, report = training.train(params, model, dataset, cfg)
    path = tmp_path / "report.csv"
    training.write_report_csv(report, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,loss,val_f1,val_er"
    assert len(lines) == 1 + len(report.epochs)
