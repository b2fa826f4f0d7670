import numpy as np
import pytest

from sedlearn import metrics
from sedlearn.errors import DataFormatError
from sedlearn.metrics import make_roll


def _worked_example():
    # frames are columns: truth frame1 [1,0], frame2 [1,1]
    truth = make_roll(np.array([[1, 1], [0, 1]]))
    pred = make_roll(np.array([[0, 1], [1, 1]]))
    return pred, truth


def test_perfect_match_scores():
    roll = make_roll(np.array([[1, 0, 1], [0, 1, 1]]))
    assert metrics.frame_f1(roll, roll) == 1.0
    assert metrics.frame_error_rate(roll, roll) == 0.0


def test_worked_example_f1_two_thirds():
    pred, truth = _worked_example()
    rep = metrics.score_report(pred, truth)
    assert (rep.tp, rep.fp, rep.fn) == (2, 1, 1)
    assert np.isclose(rep.f1, 2.0 / 3.0)


def test_worked_example_er_one_third():
    pred, truth = _worked_example()
    rep = metrics.score_report(pred, truth)
    assert (rep.substitutions, rep.deletions, rep.insertions) == (1, 0, 0)
    assert np.isclose(rep.er, 1.0 / 3.0)


def test_all_zero_prediction():
    truth = make_roll(np.array([[1, 1], [0, 1]]))
    pred = make_roll(np.zeros((2, 2), dtype=int))
    assert metrics.frame_f1(pred, truth) == 0.0
    assert metrics.frame_error_rate(pred, truth) == 1.0  # pure deletions


def test_empty_truth_and_empty_pred():
    empty = make_roll(np.zeros((3, 4), dtype=int))
    rep = metrics.score_report(empty, empty)
    assert rep.f1 == 1.0 and rep.er == 0.0


def test_insertions_against_empty_reference_stay_finite():
    truth = make_roll(np.zeros((2, 3), dtype=int))
    pred = make_roll(np.array([[1, 0, 1], [0, 0, 0]]))
    rep = metrics.score_report(pred, truth)
    assert rep.f1 == 0.0
    assert rep.er == 2.0  # sum I / max(1, sum N)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        metrics.frame_f1(make_roll(np.zeros((2, 3), dtype=int)),
                         make_roll(np.zeros((2, 4), dtype=int)))


def _brute_force(pred, truth):
    c, t = truth.shape
    tp = fp = fn = 0
    sdi = 0
    n_ref = 0
    for j in range(t):
        fn_j = fp_j = 0
        for i in range(c):
            if pred[i, j] == 1 and truth[i, j] == 1:
                tp += 1
            elif pred[i, j] == 1 and truth[i, j] == 0:
                fp += 1
                fp_j += 1
            elif pred[i, j] == 0 and truth[i, j] == 1:
                fn += 1
                fn_j += 1
            n_ref += truth[i, j]
        sdi += max(fn_j, fp_j)
    if tp + fp + fn == 0:
        f1 = 1.0
    elif tp == 0:
        f1 = 0.0
    else:
        p_ = tp / (tp + fp)
        r_ = tp / (tp + fn)
        f1 = 2 * p_ * r_ / (p_ + r_)
    return f1, sdi / max(1, n_ref)


def test_random_rolls_match_brute_force_scorer():
    rng = np.random.default_rng(0)
    for _ in range(200):
        c = rng.integers(1, 9)
        t = rng.integers(1, 65)
        truth = (rng.random((c, t)) < 0.3).astype(int)
        pred = (rng.random((c, t)) < 0.3).astype(int)
        rep = metrics.score_report(make_roll(pred), make_roll(truth))
        f1, er = _brute_force(pred, truth)
        assert rep.f1 == f1
        assert rep.er == er


def test_single_flip_changes_exactly_one_error_count():
    rng = np.random.default_rng(1)
    truth = (rng.random((4, 10)) < 0.4).astype(int)
    base = metrics.score_report(make_roll(truth), make_roll(truth))
    flipped = truth.copy()
    flipped[2, 5] ^= 1
    rep = metrics.score_report(make_roll(flipped), make_roll(truth))
    delta = (rep.fp - base.fp, rep.fn - base.fn)
    assert delta in ((1, 0), (0, 1))


def test_sdi_decomposition_identity():
    rng = np.random.default_rng(2)
    for _ in range(50):
        truth = (rng.random((5, 20)) < 0.35).astype(int)
        pred = (rng.random((5, 20)) < 0.35).astype(int)
        rep = metrics.score_report(make_roll(pred), make_roll(truth))
        fn_t = ((pred == 0) & (truth == 1)).sum(axis=0)
        fp_t = ((pred == 1) & (truth == 0)).sum(axis=0)
        assert rep.substitutions + rep.deletions + rep.insertions == int(
            np.maximum(fn_t, fp_t).sum()
        )


def test_f1_invariant_under_class_permutation():
    rng = np.random.default_rng(3)
    truth = (rng.random((6, 30)) < 0.3).astype(int)
    pred = (rng.random((6, 30)) < 0.3).astype(int)
    perm = rng.permutation(6)
    a = metrics.score_report(make_roll(pred), make_roll(truth))
    b = metrics.score_report(make_roll(pred[perm]), make_roll(truth[perm]))
    assert a.f1 == b.f1 and a.er == b.er


def test_bounds():
    rng = np.random.default_rng(4)
    for _ in range(50):
        truth = (rng.random((3, 12)) < 0.3).astype(int)
        pred = (rng.random((3, 12)) < 0.6).astype(int)
        rep = metrics.score_report(make_roll(pred), make_roll(truth))
        assert 0.0 <= rep.f1 <= 1.0
        assert rep.er >= 0.0


def test_roll_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    roll = make_roll((rng.random((4, 17)) < 0.5).astype(int))
    path = tmp_path / "roll.csv"
    metrics.write_roll_csv(path, roll)
    loaded = metrics.read_roll_csv(path)
    assert np.array_equal(loaded.data, roll.data)
    header = path.read_text().splitlines()[0]
    assert header == "frame_index,class_0,class_1,class_2,class_3"


def test_roll_csv_parse_errors_name_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("frame_index,class_0\n0,1\n1,2\n")
    with pytest.raises(DataFormatError, match="line 3"):
        metrics.read_roll_csv(path)
    path.write_text("nonsense,class_0\n0,1\n")
    with pytest.raises(DataFormatError, match="line 1"):
        metrics.read_roll_csv(path)
