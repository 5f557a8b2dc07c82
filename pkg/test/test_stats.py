import math

import numpy as np
import pandas as pd
import pytest
from scipy.stats import t as student_t

from dkt.exceptions import DataError, DegenerateInputError, TooFewResamplesError
from dkt.stats import (
    affine_alignment,
    align_lambda,
    bootstrap_corr,
    bootstrap_indices,
    compare_models,
    compare_table,
    curve_values,
    evaluate_predictions,
    shift_r2,
    spearman,
    trajectory_mae,
)


def _mid_ranks(x: np.ndarray) -> np.ndarray:
    return np.array([np.sum(x < v) + 0.5 * (np.sum(x == v) + 1) for v in x])


def _rank_pearson(x: np.ndarray, y: np.ndarray) -> float:
    rx, ry = _mid_ranks(x), _mid_ranks(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    return float(np.sum(rx * ry) / math.sqrt(np.sum(rx * rx) * np.sum(ry * ry)))


def test_spearman_small_example():
    assert spearman(np.array([1, 2, 3, 4]), np.array([1, 3, 2, 4])) == pytest.approx(0.8, abs=1e-12)


def test_spearman_matches_brute_force_ranks_with_ties():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(3, 13))
        x = rng.integers(0, 4, size=n).astype(float)
        y = rng.integers(0, 4, size=n).astype(float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        assert spearman(x, y) == pytest.approx(_rank_pearson(x, y), abs=1e-12)
        checked += 1
    assert checked > 900


def test_spearman_is_rank_based_and_symmetric():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert spearman(x, y) == pytest.approx(spearman(y, x), abs=1e-12)
    assert spearman(np.exp(x), y**3) == pytest.approx(spearman(x, y), abs=1e-12)
    assert spearman(x, x) == pytest.approx(1.0)
    assert spearman(x, -x) == pytest.approx(-1.0)


def test_spearman_rejects_degenerate_input():
    with pytest.raises(DegenerateInputError):
        spearman(np.ones(5), np.arange(5.0))
    with pytest.raises(DataError):
        spearman(np.arange(2.0), np.arange(2.0))
    with pytest.raises(DataError):
        spearman(np.arange(4.0), np.arange(5.0))


def test_bootstrap_std_is_stable():
    rng = np.random.default_rng(2)
    x = rng.normal(size=20)
    y = x + rng.normal(scale=0.5, size=20)
    small = bootstrap_corr(x, y, resamples=1000, seed=0)
    large = bootstrap_corr(x, y, resamples=10000, seed=1)
    assert small.std == pytest.approx(large.std, rel=0.25)
    assert small.samples.shape == (1000 - small.n_degenerate,)
    assert -1.0 <= small.mean <= 1.0


def test_bootstrap_is_seeded():
    x = np.arange(10.0)
    y = np.array([0, 2, 1, 3, 5, 4, 6, 8, 7, 9], dtype=float)
    a = bootstrap_corr(x, y, seed=5)
    b = bootstrap_corr(x, y, seed=5)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_bootstrap_skips_degenerate_resamples():
    x = np.arange(6.0)
    y = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    result = bootstrap_corr(x, y, resamples=200, seed=0)
    assert result.n_degenerate > 0
    assert len(result.samples) == 200 - result.n_degenerate


def test_bootstrap_fails_when_most_resamples_are_degenerate():
    pred = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
    meas = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    with pytest.raises(TooFewResamplesError):
        bootstrap_corr(pred, meas, resamples=1000, seed=0)


def test_bootstrap_argument_checks():
    with pytest.raises(DataError):
        bootstrap_corr(np.arange(4.0), np.arange(4.0))
    with pytest.raises(DataError):
        bootstrap_corr(np.arange(10.0), np.arange(10.0), resamples=50)


def test_bootstrap_indices_shape_and_range():
    idx = bootstrap_indices(7, 30, [1, 2])
    assert idx.shape == (30, 7)
    assert idx.min() >= 0
    assert idx.max() < 7


def test_trajectory_mae_is_a_curve_metric():
    a = np.array([[1.0, 5.0, 0.2, 0.0]])
    b = np.array([[1.0, 10.0, 0.5, 0.0]])
    c = np.array([[0.8, 5.0, 0.4, 0.1]])
    assert trajectory_mae(a, a) == 0.0
    assert trajectory_mae(a, b) == pytest.approx(trajectory_mae(b, a))
    assert trajectory_mae(a, c) <= trajectory_mae(a, b) + trajectory_mae(b, c) + 1e-15
    grid = np.linspace(0.0, 1.0, 100)
    expected = np.mean(np.abs(curve_values(a, grid) - curve_values(b, grid)))
    assert trajectory_mae(a, b) == pytest.approx(expected)


def test_trajectory_mae_defaults_to_the_dysfunction_range():
    a = np.array([[1.0, 5.0, 3.0, 0.0]])
    b = np.array([[1.0, 20.0, 3.0, 0.0]])
    unit = np.linspace(0.0, 1.0, 100)
    assert trajectory_mae(a, b) == pytest.approx(trajectory_mae(a, b, unit), abs=0)
    assert trajectory_mae(a, b) < 1e-4
    assert trajectory_mae(a, b, np.linspace(-10.0, 10.0, 100)) > 0.01


def test_trajectory_mae_of_a_constant_offset():
    a = np.array([[1.0, 5.0, 0.5, 0.0], [1.0, 3.0, 0.2, 0.0]])
    b = a.copy()
    b[:, 3] += 0.05
    assert trajectory_mae(a, b) == pytest.approx(0.05)
    with pytest.raises(DataError):
        trajectory_mae(a, b[:1])


def test_shift_r2_absorbs_affine_maps():
    true_beta = np.linspace(-10.0, 8.0, 40)
    assert shift_r2(true_beta, 0.5 * true_beta - 3.0) == pytest.approx(1.0)
    slope, intercept = affine_alignment(true_beta, 0.5 * true_beta - 3.0)
    assert slope == pytest.approx(2.0)
    assert intercept == pytest.approx(6.0)


def test_shift_r2_of_a_permutation_is_near_zero():
    rng = np.random.default_rng(3)
    true_beta = rng.uniform(-13.0, 10.0, size=150)
    assert abs(shift_r2(true_beta, rng.permutation(true_beta))) < 0.1


def test_shift_r2_rejects_constant_shifts():
    with pytest.raises(DegenerateInputError):
        shift_r2(np.arange(5.0), np.zeros(5))


def test_align_lambda_preserves_curve_values():
    lam = np.array([[1.0, 0.3, -4.0, 0.0], [1.0, 0.2, 6.0, 0.0]])
    slope, intercept = 2.0, 1.5
    s = np.linspace(-10.0, 10.0, 21)
    aligned = align_lambda(lam, slope, intercept)
    np.testing.assert_allclose(curve_values(aligned, slope * s + intercept), curve_values(lam, s), atol=1e-12)


def test_welch_matches_closed_form():
    a = np.array([0.61, 0.72, 0.68, 0.70, 0.66, 0.74])
    b = np.array([0.52, 0.60, 0.49, 0.58, 0.55])
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    p = 2.0 * student_t.sf(abs(t), dof)

    result = compare_models(a, b, comparisons=3)
    assert result.p_raw == pytest.approx(p, rel=1e-9)
    assert result.p_bonferroni == pytest.approx(min(1.0, 3.0 * p), rel=1e-9)


def test_nearly_constant_samples_are_significant_after_correction():
    a = np.array([0.0, 0.0, 0.0, 0.0, 0.001])
    b = np.array([1.0, 1.0, 1.0, 1.0, 1.001])
    result = compare_models(a, b, comparisons=4)
    assert result.significant
    assert result.p_bonferroni < 0.05


def test_bonferroni_is_capped_at_one():
    a = np.random.default_rng(4).normal(size=50)
    result = compare_models(a, a[::-1], comparisons=1000)
    assert result.p_bonferroni == 1.0
    assert not result.significant


def test_compare_models_constant_samples():
    assert compare_models(np.zeros(5), np.ones(5)).p_raw == 0.0
    with pytest.raises(DegenerateInputError):
        compare_models(np.ones(5), np.ones(5))
    with pytest.raises(DataError):
        compare_models(np.ones(1), np.zeros(5))


def _tables(n: int = 40, seed: int = 0):
    rng = np.random.default_rng(seed)
    keys = pd.DataFrame({"subject_id": [f"s{i:02d}" for i in range(n)], "months_since_baseline": 0.0})
    measured = rng.normal(size=(n, 2))
    truth = keys.assign(r0=measured[:, 0], r1=measured[:, 1])
    good = keys.assign(r0=measured[:, 0] + rng.normal(scale=0.1, size=n), r1=measured[:, 1])
    bad = keys.assign(r0=rng.normal(size=n), r1=measured[:, 1] + rng.normal(scale=0.5, size=n))
    return truth, good, bad


def test_compare_table_marks_the_worse_model():
    truth, good, bad = _tables()
    report = compare_table({"good": good, "bad": bad}, truth, ["r0", "r1"], reference="good")
    assert report.cells[("good", "r1")].point == pytest.approx(1.0)
    assert report.cells[("bad", "r0")].significant
    assert report.cells[("good", "r0")].p_raw is None
    frame = report.to_frame()
    assert list(frame.columns[-3:]) == ["p_raw", "p_bonferroni", "significant"]
    assert len(frame) == 4


def test_compare_table_shares_bootstrap_draws():
    truth, good, _ = _tables()
    report = compare_table({"a": good, "b": good.copy()}, truth, ["r0"], reference="a")
    np.testing.assert_array_equal(report.samples[("a", "r0")], report.samples[("b", "r0")])


def test_compare_table_uses_rows_every_model_predicted():
    truth, good, bad = _tables()
    good.loc[:4, "r0"] = np.nan
    report = compare_table({"good": good, "bad": bad}, truth, ["r0"])
    assert report.cells[("good", "r0")].n == 35
    assert report.cells[("bad", "r0")].n == 35
    assert report.reference is None


def test_compare_table_rejects_unmatched_visits():
    truth, good, _ = _tables()
    with pytest.raises(DataError, match="s00"):
        compare_table({"good": good}, truth.iloc[1:], ["r0"])
    with pytest.raises(DataError):
        compare_table({"good": good}, truth, ["r7"])
    with pytest.raises(DataError):
        compare_table({"good": good}, truth, ["r0"], reference="other")


def test_evaluate_predictions_without_reference():
    truth, good, _ = _tables()
    report = evaluate_predictions(good, truth, bootstrap=100, seed=1)
    assert report.regions == ["r0", "r1"]
    assert report.models == ["prediction"]
    assert "p_raw" not in report.to_frame().columns
    assert report.cells[("prediction", "r0")].mean > 0.9


def test_report_csv(tmp_path):
    truth, good, bad = _tables()
    report = compare_table({"good": good, "bad": bad}, truth, ["r0", "r1"], reference="good")
    path = tmp_path / "report.csv"
    report.to_csv(path)
    frame = pd.read_csv(path)
    assert frame["model"].tolist() == ["good", "good", "bad", "bad"]
    assert frame["spearman"].iloc[1] == pytest.approx(1.0)
