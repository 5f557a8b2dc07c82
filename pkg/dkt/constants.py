"""Constants shared across the package."""

# exp() arguments are clamped to this magnitude so sigmoids saturate instead
# of overflowing
EXP_CLAMP = 700.0

MONTHS_PER_YEAR = 12.0

# version tag written into persisted model files
SCHEMA_VERSION = "1"

# fixed leading columns of the dataset CSV, biomarker columns follow
ID_COLUMNS = ("subject_id", "disease", "diagnosis", "months_since_baseline")
COVARIATE_COLUMNS = ("age", "gender", "tiv", "source")
DATASET_COLUMNS = ID_COLUMNS + COVARIATE_COLUMNS
TRUE_BETA_COLUMN = "true_beta"

CONTROL_LABEL = "control"
PATIENT_LABEL = "patient"

# absolute slack allowed when checking that block updates never increase the
# penalized objective
DESCENT_SLACK = 1e-8

# fewest measurements per biomarker a model can be initialised from
MIN_MEASUREMENTS = 5

# grid values of the time-shift search within this distance count as tied
TIE_TOLERANCE = 1e-12
