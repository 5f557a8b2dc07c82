import json

import numpy as np
import pytest

from dkt.exceptions import CorruptModelFileError, ModelVersionError
from dkt.fit import fit
from dkt.persistence import load_model, save_model
from dkt.preprocess import NormalizationParams
from dkt.synth import generate

from .cohorts import small_spec


@pytest.fixture(scope="module")
def fitted():
    spec = small_spec(subjects_per_disease=[6, 4])
    dataset, _ = generate(spec)
    return fit(dataset, spec.to_model_config().with_optimizer(max_sweeps=2, restarts=1, stage_bounds=(-20.0, 20.0)))


def test_saved_model_loads_bit_for_bit(tmp_path, fitted):
    normalization = NormalizationParams(biomarkers=list(fitted.config.biomarkers), minimum={"k0": 0.1})
    model = fitted.replace(normalization=normalization)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)

    np.testing.assert_array_equal(loaded.theta_array, model.theta_array)
    np.testing.assert_array_equal(loaded.lambda_array, model.lambda_array)
    np.testing.assert_array_equal(loaded.beta, model.beta)
    np.testing.assert_array_equal(loaded.epsilon, model.epsilon)
    assert loaded.config == model.config
    assert loaded.subject_ids == model.subject_ids
    assert loaded.trace == model.trace
    assert loaded.diagnostics == model.diagnostics
    assert loaded.normalization == normalization


def test_document_names_axes(tmp_path, fitted):
    path = tmp_path / "model.json"
    save_model(fitted, path)
    document = json.loads(path.read_text())
    assert document["schema_version"] == "1"
    assert document["biomarkers"] == ["k0", "k1", "k2", "k3", "k4", "k5"]
    assert document["diseases"] == ["AD", "PCA"]
    assert "lambda" in document


def test_other_schema_version_is_rejected(tmp_path, fitted):
    path = tmp_path / "model.json"
    save_model(fitted, path)
    document = json.loads(path.read_text())
    document["schema_version"] = "0"
    path.write_text(json.dumps(document))
    with pytest.raises(ModelVersionError):
        load_model(path)


@pytest.mark.parametrize(
    "content",
    ["{not json", "[]", '{"schema_version": "1"}', '{"schema_version": "1", "theta": 3}'],
)
def test_corrupt_files_are_rejected(tmp_path, content):
    path = tmp_path / "model.json"
    path.write_text(content)
    with pytest.raises(CorruptModelFileError):
        load_model(path)


def test_missing_file_is_corrupt(tmp_path):
    with pytest.raises(CorruptModelFileError):
        load_model(tmp_path / "missing.json")


def test_inconsistent_parameters_are_corrupt(tmp_path, fitted):
    path = tmp_path / "model.json"
    save_model(fitted, path)
    document = json.loads(path.read_text())
    document["theta"] = document["theta"][:2]
    path.write_text(json.dumps(document))
    with pytest.raises(CorruptModelFileError):
        load_model(path)
