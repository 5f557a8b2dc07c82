import math

import numpy as np
import pytest
from pydantic import ValidationError

from dkt.config import (
    FlatPrior,
    GaussianPrior,
    ModelConfig,
    OptimizerSpec,
    PreprocessSpec,
    PriorSpec,
    RunConfig,
    dump_config,
    load_config,
)
from dkt.exceptions import SchemaError

MODEL_YAML = """\
biomarkers: [k0, k1, k2]
units: [l0, l1]
unit_allocation: [0, 1, 0]
diseases: [AD, PCA]
"""


def test_load_bare_model_config(tmp_path):
    path = tmp_path / "model.yaml"
    path.write_text(MODEL_YAML)
    run = load_config(path)
    assert run.model.biomarkers_in_unit(0) == [0, 2]
    assert run.model.optimizer == OptimizerSpec()
    assert run.verbosity == 1


def test_load_run_config(tmp_path):
    path = tmp_path / "run.yaml"
    body = "\n".join("  " + line for line in MODEL_YAML.splitlines())
    path.write_text(
        f"model:\n{body}\n  optimizer:\n    restarts: 2\n    stage_bounds: [-15, 15]\n"
        "preprocess:\n  normalize: true\n  directions: {k1: -1}\nseed: 4\n",
    )
    run = load_config(path)
    assert run.model.optimizer.restarts == 2
    assert run.model.optimizer.stage_bounds == (-15.0, 15.0)
    assert run.preprocess.normalize
    assert run.preprocess.directions == {"k1": -1}
    assert run.seed == 4


def test_unit_allocation_by_name(tmp_path):
    path = tmp_path / "model.yaml"
    path.write_text("unit_allocation: {k0: mri, k1: pet, k2: mri}\ndiseases: [AD]\n")
    model = load_config(path).model
    assert model.biomarkers == ["k0", "k1", "k2"]
    assert model.units == ["mri", "pet"]
    assert model.unit_allocation == [0, 1, 0]


@pytest.mark.parametrize(
    "content",
    [
        MODEL_YAML + "tolerance: 3\n",
        "model: [1, 2\n",
        "- just\n- a list\n",
        MODEL_YAML.replace("[0, 1, 0]", "[0, 1]"),
        MODEL_YAML.replace("[0, 1, 0]", "[0, 2, 0]"),
        MODEL_YAML.replace("[k0, k1, k2]", "[k0, k0, k2]"),
        MODEL_YAML.replace("[AD, PCA]", "[]"),
    ],
)
def test_invalid_configs_are_schema_errors(tmp_path, content):
    path = tmp_path / "config.yaml"
    path.write_text(content)
    with pytest.raises(SchemaError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(SchemaError):
        load_config(tmp_path / "missing.yaml")


def test_dump_and_load_config(tmp_path):
    model = ModelConfig(
        biomarkers=["k0", "k1"],
        units=["l0"],
        unit_allocation=[0, 0],
        diseases=["AD"],
        priors=PriorSpec(beta=FlatPrior(low=-5.0, high=5.0)),
        optimizer=OptimizerSpec(stage_bounds=(-10.0, 10.0)),
    )
    path = tmp_path / "out.yaml"
    dump_config(model, path)
    assert load_config(path) == RunConfig(model=model)


def test_default_priors():
    priors = PriorSpec()
    assert priors.beta == GaussianPrior(mean=0.0, std=10.0)
    assert priors.lambda_.slope == GaussianPrior(mean=0.25, std=0.5, lower=0.0)
    assert priors.theta.center == FlatPrior(low=0.0, high=1.0)


def test_gaussian_prior_density():
    prior = GaussianPrior(mean=1.0, std=2.0)
    expected = 0.5 * 0.25 + math.log(2.0) + 0.5 * math.log(2.0 * math.pi)
    assert prior.neg_log_density(2.0) == pytest.approx(expected)
    np.testing.assert_allclose(
        prior.neg_log_density(np.array([1.0, 3.0])),
        prior.neg_log_density(np.array([1.0, -1.0])),
    )


def test_truncated_priors_exclude_the_bound():
    assert GaussianPrior(mean=0.25, std=0.5, lower=0.0).neg_log_density(0.0) == math.inf
    assert FlatPrior(low=1.0, high=2.0, lower=0.0).neg_log_density(-1.0) == math.inf
    assert FlatPrior(low=1.0, high=2.0, lower=0.0).neg_log_density(50.0) == 0.0


def test_prior_samples_respect_bounds():
    rng = np.random.default_rng(0)
    flat = FlatPrior(low=-1.0, high=1.0, lower=0.0)
    gaussian = GaussianPrior(mean=0.0, std=1.0, lower=0.5)
    assert all(flat.sample(rng) > 0.0 for _ in range(100))
    assert all(gaussian.sample(rng) > 0.5 for _ in range(100))


def test_prior_validation():
    with pytest.raises(ValidationError):
        FlatPrior(low=2.0, high=1.0)
    with pytest.raises(ValidationError):
        GaussianPrior(mean=0.0, std=0.0)


def test_optimizer_validation():
    with pytest.raises(ValidationError):
        OptimizerSpec(stage_bounds=(3.0, -3.0))
    with pytest.raises(ValidationError):
        OptimizerSpec(beta_grid=1)
    with pytest.raises(ValidationError):
        OptimizerSpec(n_threads=0)


def test_with_optimizer_replaces_only_given_settings():
    model = ModelConfig(biomarkers=["k0"], units=["l0"], unit_allocation=[0], diseases=["AD"])
    changed = model.with_optimizer(restarts=1, rng_seed=9)
    assert changed.optimizer.restarts == 1
    assert changed.optimizer.rng_seed == 9
    assert changed.optimizer.max_sweeps == model.optimizer.max_sweeps
    assert model.optimizer.restarts == 5
    with pytest.raises(ValidationError):
        model.with_optimizer(restarts=-1)


def test_preprocess_spec_rejects_unknown_covariates():
    with pytest.raises(ValidationError):
        PreprocessSpec(covariates=["age", "height"])
