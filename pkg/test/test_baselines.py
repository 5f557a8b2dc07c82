import numpy as np
import pytest

from dkt.baselines import GPRegressor, UnivariateRegressor, gp_fit, gp_predict, latent_stage_fit, linear_fit, spline_fit
from dkt.baselines.gp import cholesky_with_jitter, rbf_kernel
from dkt.constants import DESCENT_SLACK
from dkt.exceptions import DataError, DegenerateInputError, InsufficientDataError, SingularKernelError
from dkt.fit import fit
from dkt.model import predictions, sigmoid_values
from dkt.synth import SynthSpec, generate

# ---------------------------------------------------------------------------
# univariate regressors
# ---------------------------------------------------------------------------


def test_linear_fit_recovers_a_line():
    x = np.linspace(0.0, 1.0, 7)
    model = linear_fit(x, 2.0 * x + 1.0)
    np.testing.assert_allclose(model.coefficients, [2.0, 1.0], atol=1e-12)
    assert model.predict(np.array([3.0])) == pytest.approx([7.0])


def test_linear_fit_with_tied_inputs_is_least_squares():
    x = np.array([0.0, 0.0, 1.0, 1.0, 2.0])
    y = np.array([0.0, 2.0, 1.0, 3.0, 5.0])
    model = linear_fit(x, y)
    # slope = Σ dx dy / Σ dx² = 5.2 / 2.8
    np.testing.assert_allclose(model.coefficients, [13.0 / 7.0, 5.0 / 7.0], atol=1e-12)
    assert model.predict(np.array([0.0]))[0] == pytest.approx(5.0 / 7.0, abs=1e-12)


def test_linear_fit_rejects_bad_training_sets():
    with pytest.raises(DegenerateInputError):
        linear_fit(np.ones(5), np.arange(5.0))
    with pytest.raises(InsufficientDataError):
        linear_fit(np.ones(1), np.ones(1))
    with pytest.raises(DataError):
        linear_fit(np.array([0.0, 1.0, np.nan]), np.arange(3.0))
    with pytest.raises(DataError):
        linear_fit(np.arange(3.0), np.arange(4.0))


def test_spline_reproduces_a_cubic():
    x = np.linspace(-1.0, 2.0, 50)
    y = x**3 - 2.0 * x + 0.5
    model = spline_fit(x, y)
    assert model.kind == "cubic-spline"
    assert len(model.interior_knots) == 4
    grid = np.linspace(-1.0, 2.0, 17)
    np.testing.assert_allclose(model.predict(grid), grid**3 - 2.0 * grid + 0.5, atol=1e-8)


def test_spline_drops_coinciding_knots():
    x = np.concatenate([np.zeros(30), np.linspace(0.1, 1.0, 20)])
    y = np.sin(3.0 * x)
    model = spline_fit(x, y)
    assert len(model.interior_knots) < 4
    assert np.all(np.diff(model.interior_knots) > 0)
    assert np.all(np.isfinite(model.predict(np.linspace(0.0, 1.0, 11))))


def test_spline_needs_enough_points():
    with pytest.raises(InsufficientDataError):
        spline_fit(np.arange(5.0), np.arange(5.0))


def test_linear_fit_equals_a_degree_one_spline_without_interior_knots():
    rng = np.random.default_rng(4)
    x = np.sort(rng.uniform(0.0, 1.0, size=30))
    y = 1.5 * x - 0.2 + rng.normal(0.0, 0.1, size=30)
    line = linear_fit(x, y)
    spline = spline_fit(x, y, n_knots=0, degree=1)
    assert len(spline.interior_knots) == 0
    grid = np.linspace(-0.5, 1.5, 21)
    np.testing.assert_allclose(spline.predict(grid), line.predict(grid), atol=1e-8)


def test_univariate_regressor_dispatch():
    x = np.linspace(0.0, 1.0, 20)
    assert UnivariateRegressor.fit(x, x, kind="linear").kind == "linear"
    assert UnivariateRegressor.fit(x, x, kind="cubic-spline").kind == "cubic-spline"


# ---------------------------------------------------------------------------
# Gaussian process
# ---------------------------------------------------------------------------


def test_gp_mean_matches_direct_solve():
    x = np.array([0.0, 0.5, 1.1, 1.7, 2.0])
    y = np.array([0.1, 0.4, 0.35, 0.9, 1.2])
    signal, scale, noise = 1.3, 0.7, 0.01
    model = GPRegressor.from_hyperparameters(x, y, signal, scale, noise)

    x_star = np.array([0.25, 1.0, 2.5])
    k = signal * np.exp(-0.5 * (x[:, None] - x[None, :]) ** 2 / scale**2) + noise * np.eye(5)
    k_star = signal * np.exp(-0.5 * (x_star[:, None] - x[None, :]) ** 2 / scale**2)
    expected = y.mean() + k_star @ np.linalg.solve(k, y - y.mean())
    np.testing.assert_allclose(model.predict(x_star), expected, atol=1e-8)


def test_gp_fit_does_not_lose_to_its_initialisation():
    rng = np.random.default_rng(0)
    x = rng.uniform(0.0, 1.0, size=(40, 2))
    y = np.sin(3.0 * x[:, 0]) + 0.5 * x[:, 1] + rng.normal(0.0, 0.05, size=40)
    model = gp_fit(x, y, restarts=1, seed=0)

    start = GPRegressor.from_hyperparameters(x, y, np.var(y), np.std(x, axis=0), 0.1 * np.var(y))
    assert model.log_marginal_likelihood() >= start.log_marginal_likelihood() - 1e-9
    assert model.noise_variance > 0
    assert model.length_scales.shape == (2,)
    mean, variance = gp_predict(model, x[:5])
    assert np.mean(np.abs(mean - y[:5])) < 0.2
    assert np.all(variance >= 0)


def test_gp_fit_on_constant_targets_predicts_the_constant():
    x = np.linspace(0.0, 1.0, 10).reshape(-1, 1)
    model = gp_fit(x, np.full(10, 0.3))
    mean, variance = gp_predict(model, np.array([[0.5], [5.0]]))
    np.testing.assert_allclose(mean, 0.3, atol=1e-8)
    assert np.all(np.isfinite(variance))


def test_gp_interpolates_training_points_with_small_noise():
    x = np.array([0.0, 0.4, 0.9, 1.5, 2.2])
    y = np.array([0.2, -0.1, 0.6, 0.3, 1.0])
    model = GPRegressor.from_hyperparameters(x, y, 1.0, 0.5, 1e-8)
    np.testing.assert_allclose(model.predict(x), y, atol=1e-5)


def test_rbf_kernel_has_signal_variance_on_the_diagonal():
    x = np.random.default_rng(1).normal(size=(4, 3))
    k = rbf_kernel(x, x, 2.5, np.array([1.0, 2.0, 0.5]))
    np.testing.assert_allclose(np.diag(k), 2.5)
    np.testing.assert_allclose(k, k.T)


def test_cholesky_with_jitter():
    factor, lower = cholesky_with_jitter(np.ones((3, 3)))
    assert lower
    assert np.all(np.isfinite(factor))
    with pytest.raises(SingularKernelError):
        cholesky_with_jitter(-np.eye(3))


# ---------------------------------------------------------------------------
# latent-stage model
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def one_unit_cohort():
    spec = SynthSpec.model_validate(
        {
            "diseases": ["AD"],
            "subjects_per_disease": [40],
            "biomarkers": ["k0", "k1", "k2"],
            "units": ["l0"],
            "unit_allocation": [0, 0, 0],
            "noise_std": 0.0,
            "theta": [(1.0, 2.0, 0.3, 0.0), (1.0, 2.0, 0.5, 0.0), (1.0, 2.0, 0.7, 0.0)],
            "lambda": [[(1.0, 0.3, 0.0, 0.0)]],
            "withheld": {},
        },
    )
    dataset, _ = generate(spec)
    return spec, dataset


def test_latent_stage_and_dkt_agree_on_one_unit(one_unit_cohort):
    spec, dataset = one_unit_cohort
    config = spec.to_model_config()

    dkt = fit(dataset, config)
    latent = latent_stage_fit(dataset, config)
    dkt_pred = predictions(dataset, dkt)
    latent_pred = sigmoid_values(latent.beta[dataset.subject] + dataset.years, latent.theta_array[dataset.biomarker])

    assert np.mean(np.abs(dkt_pred - dataset.value)) < 0.02
    assert np.mean(np.abs(latent_pred - dataset.value)) < 0.02
    assert np.mean(np.abs(latent_pred - dkt_pred)) < 1e-2


def test_latent_stage_trace_descends(one_unit_cohort):
    spec, dataset = one_unit_cohort
    config = spec.to_model_config().with_optimizer(max_sweeps=3, restarts=1)
    model = latent_stage_fit(dataset, config)
    assert len(model.trace) >= 2
    assert np.all(np.diff(model.trace) <= DESCENT_SLACK)
    assert model.epsilon.shape == (3,)


def test_latent_stage_staging_and_prediction(one_unit_cohort):
    spec, dataset = one_unit_cohort
    model = latent_stage_fit(dataset, spec.to_model_config().with_optimizer(max_sweeps=3, restarts=1))

    beta = model.stage_subjects(dataset.subset(subjects=[0, 1, 2]), biomarkers=["k1"])
    assert beta.shape == (3,)
    assert model.stage_subject(dataset.subset(subjects=[0])) == pytest.approx(
        model.stage_subjects(dataset.subset(subjects=[0]))[0],
    )
    expected = sigmoid_values(0.5 + 6.0 / 12.0, model.theta_array[2])
    assert model.predict(0.5, 6.0, "k2") == pytest.approx(float(expected))
