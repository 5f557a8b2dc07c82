import numpy as np
import pandas as pd
import pytest

from dkt.config import PreprocessSpec
from dkt.constants import DATASET_COLUMNS
from dkt.exceptions import (
    ConstantBiomarkerError,
    DataError,
    InsufficientDataError,
    ParseError,
    RankDeficientError,
    SchemaError,
    UnknownBiomarkerError,
)
from dkt.preprocess import (
    RawTable,
    apply_normalization,
    denormalize,
    load_csv,
    normalize,
    preprocess,
    residualize,
    write_frame,
)

HEADER = "subject_id,disease,diagnosis,months_since_baseline,age,gender,tiv,source,k0,k1"
COEFFICIENTS = [1.0, 0.02, 0.1, 0.001, 0.3]


def _raw_table(n: int = 30, controls: int = 20, seed: int = 0) -> RawTable:
    rng = np.random.default_rng(seed)
    frame = pd.DataFrame(
        {
            "subject_id": [f"s{i:02d}" for i in range(n)],
            "disease": "AD",
            "diagnosis": ["control"] * controls + ["patient"] * (n - controls),
            "months_since_baseline": 0.0,
            "age": rng.uniform(60.0, 80.0, size=n),
            "gender": rng.integers(0, 2, size=n).astype(float),
            "tiv": rng.normal(1500.0, 100.0, size=n),
            "source": rng.integers(0, 2, size=n).astype(float),
        },
    )
    design = np.column_stack([np.ones(n), frame[["age", "gender", "tiv", "source"]].to_numpy()])
    disease_effect = np.where(frame["diagnosis"] == "patient", 0.5, 0.0)
    frame["k0"] = design @ COEFFICIENTS + disease_effect
    frame["k1"] = rng.normal(size=n)
    return RawTable(frame=frame, biomarkers=("k0", "k1"))


def _write(tmp_path, *rows: str, header: str = HEADER):
    path = tmp_path / "table.csv"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# reading and writing
# ---------------------------------------------------------------------------


def test_load_csv_reads_missing_cells(tmp_path):
    path = _write(tmp_path, "s0,AD,patient,0,70,1,1500,0,0.5,", "s0,AD,patient,12,71,1,1500,0,0.6,0.2")
    table = load_csv(path)
    assert table.biomarkers == ("k0", "k1")
    assert np.isnan(table.frame["k1"].iloc[0])
    dataset = table.to_dataset()
    assert len(dataset) == 3
    np.testing.assert_array_equal(dataset.visit_months[0], [0.0, 12.0])


def test_load_csv_allows_missing_covariates(tmp_path):
    table = load_csv(_write(tmp_path, "s0,AD,patient,0,,,,,0.5,0.1"))
    assert np.isnan(table.frame["age"].iloc[0])


def test_load_csv_names_line_and_column(tmp_path):
    path = _write(tmp_path, "s0,AD,patient,0,70,1,1500,0,0.5,", "s0,AD,patient,12,71,1,1500,0,abc,0.2")
    with pytest.raises(ParseError, match="line 3, column 'k0'"):
        load_csv(path)


def test_load_csv_requires_months(tmp_path):
    with pytest.raises(ParseError, match="months_since_baseline"):
        load_csv(_write(tmp_path, "s0,AD,patient,,70,1,1500,0,0.5,0.1"))


def test_load_csv_rejects_bad_header(tmp_path):
    header = HEADER.replace("subject_id", "subject")
    with pytest.raises(SchemaError):
        load_csv(_write(tmp_path, "s0,AD,patient,0,70,1,1500,0,0.5,0.1", header=header))


def test_load_csv_rejects_missing_file(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_rejects_duplicate_visits(tmp_path):
    path = _write(tmp_path, "s0,AD,patient,0,70,1,1500,0,0.5,0.1", "s0,AD,patient,0,70,1,1500,0,0.6,0.2")
    with pytest.raises(DataError, match="two rows"):
        load_csv(path)


def test_load_csv_reads_true_beta(tmp_path):
    path = _write(
        tmp_path,
        "s0,AD,patient,0,,,,,0.5,0.1,-2.5",
        "s0,AD,patient,12,,,,,0.6,0.2,-2.5",
        "s1,PCA,control,0,,,,,0.1,0.0,4",
        header=HEADER + ",true_beta",
    )
    table = load_csv(path)
    assert table.biomarkers == ("k0", "k1")
    assert table.subject_true_beta() == {"s0": -2.5, "s1": 4.0}


def test_write_frame_adds_covariate_columns(tmp_path):
    frame = pd.DataFrame(
        {
            "subject_id": ["s0"],
            "disease": ["AD"],
            "diagnosis": ["patient"],
            "months_since_baseline": [0.0],
            "k3": [0.4],
        },
    )
    path = tmp_path / "pred.csv"
    write_frame(frame, path)
    assert path.read_text().splitlines()[0] == ",".join([*DATASET_COLUMNS, "k3"])
    assert load_csv(path).frame["k3"].iloc[0] == 0.4


# ---------------------------------------------------------------------------
# residualisation
# ---------------------------------------------------------------------------


def test_residualize_recovers_control_coefficients():
    table = _raw_table()
    residualized, params = residualize(table)
    np.testing.assert_allclose(params.coefficients["k0"], COEFFICIENTS, atol=1e-6)
    values = residualized.frame["k0"].to_numpy()
    mean = params.control_means["k0"]
    np.testing.assert_allclose(values[:20], mean, atol=1e-8)
    np.testing.assert_allclose(values[20:], mean + 0.5, atol=1e-8)


def test_residualize_with_independent_covariates_keeps_values():
    table = _raw_table(n=2000, controls=2000, seed=1)
    residualized, _ = residualize(table)
    before = table.frame["k1"].to_numpy()
    after = residualized.frame["k1"].to_numpy()
    assert np.std(after - before) < 0.1


def test_residualize_is_idempotent_and_orthogonal_on_controls():
    table = _raw_table(n=60, controls=40, seed=2)
    once, params = residualize(table)
    twice, _ = residualize(once)
    for name in ("k0", "k1"):
        values = once.frame[name].to_numpy()
        np.testing.assert_allclose(twice.frame[name].to_numpy(), values, atol=1e-8)
        controls = once.frame[once.frame["diagnosis"] == "control"]
        design = np.column_stack([np.ones(len(controls)), controls[["age", "gender", "tiv", "source"]].to_numpy()])
        residual = controls[name].to_numpy() - params.control_means[name]
        np.testing.assert_allclose(design.T @ residual, 0.0, atol=1e-6)


def test_residualize_needs_ten_controls():
    with pytest.raises(InsufficientDataError, match="k0"):
        residualize(_raw_table(n=30, controls=9))


def test_residualize_rejects_rank_deficient_design():
    table = _raw_table()
    frame = table.frame.assign(gender=1.0)
    with pytest.raises(RankDeficientError):
        residualize(RawTable(frame, table.biomarkers))


def test_residualize_rejects_missing_covariates():
    table = _raw_table()
    frame = table.frame.copy()
    frame.loc[3, "age"] = np.nan
    with pytest.raises(DataError, match="missing covariates"):
        residualize(RawTable(frame, table.biomarkers))


def test_residualize_with_a_covariate_subset():
    table = _raw_table()
    _, params = residualize(table, PreprocessSpec(covariates=["age"]))
    assert params.covariates == ["age"]
    assert len(params.coefficients["k0"]) == 2


# ---------------------------------------------------------------------------
# normalisation
# ---------------------------------------------------------------------------


def test_normalize_scales_to_unit_range():
    table = _raw_table()
    dataset, params = normalize(table, PreprocessSpec(directions={"k1": -1}))
    k0 = dataset.value[dataset.biomarker == 0]
    k1 = dataset.value[dataset.biomarker == 1]
    assert k0.min() == 0.0
    assert k0.max() == 1.0
    raw_k1 = table.frame["k1"].to_numpy()
    assert k1[np.argmin(raw_k1)] == 1.0
    assert k1[np.argmax(raw_k1)] == 0.0
    assert params.direction == {"k0": 1, "k1": -1}


def test_denormalize_inverts_normalize():
    table = _raw_table()
    dataset, params = normalize(table, PreprocessSpec(directions={"k1": -1}))
    k1 = dataset.value[dataset.biomarker == 1]
    np.testing.assert_allclose(denormalize(k1, "k1", params), table.frame["k1"].to_numpy(), atol=1e-12)
    with pytest.raises(UnknownBiomarkerError):
        denormalize(0.5, "k7", params)


def test_normalize_rejects_constant_biomarker():
    table = _raw_table()
    frame = table.frame.assign(k1=3.0)
    with pytest.raises(ConstantBiomarkerError, match="k1"):
        normalize(RawTable(frame, table.biomarkers))


def test_normalize_rejects_unknown_direction():
    with pytest.raises(UnknownBiomarkerError):
        normalize(_raw_table(), PreprocessSpec(directions={"hippocampus": -1}))


def test_frozen_transform_is_not_clipped():
    train = _raw_table(seed=0)
    _, params = preprocess(train, PreprocessSpec(residualize=True, normalize=True))
    test_frame = train.frame.copy()
    test_frame["k1"] = test_frame["k1"] + 100.0
    dataset = apply_normalization(RawTable(test_frame, train.biomarkers), params)
    assert dataset.value[dataset.biomarker == 1].min() > 1.0


def test_apply_normalization_matches_training_transform():
    train = _raw_table(seed=2)
    dataset, params = preprocess(train, PreprocessSpec(residualize=True, normalize=True))
    again = apply_normalization(train, params)
    np.testing.assert_allclose(again.value, dataset.value, atol=1e-12)


def test_apply_normalization_rejects_unknown_biomarker():
    train = _raw_table()
    _, params = preprocess(train, PreprocessSpec(normalize=True))
    frame = train.frame.rename(columns={"k1": "k2"})
    with pytest.raises(UnknownBiomarkerError):
        apply_normalization(RawTable(frame, ("k0", "k2")), params)


def test_preprocess_without_steps_keeps_values():
    table = _raw_table()
    dataset, params = preprocess(table, PreprocessSpec())
    assert params is None
    np.testing.assert_array_equal(dataset.value[dataset.biomarker == 0], table.frame["k0"].to_numpy())
