import pytest

from dkt.fit import fit
from dkt.synth import SynthSpec, generate


@pytest.fixture(scope="session")
def default_cohort():
    """The default synthetic cohort and its ground truth."""
    return generate(SynthSpec())


@pytest.fixture(scope="session")
def default_fit(default_cohort):
    """DKT fitted to the default cohort with the default configuration."""
    dataset, _ = default_cohort
    return fit(dataset, SynthSpec().to_model_config())
