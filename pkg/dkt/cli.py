"""Command-line interface.

    dkt generate --out DIR [--spec FILE]
    dkt preprocess --data RAW.csv --config CFG.yaml --out NORM.csv --params PARAMS.json
    dkt fit --data DATA.csv [--config CFG.yaml] --out MODEL.json
    dkt stage --model MODEL.json --data DATA.csv --out STAGES.csv
    dkt predict --model MODEL.json --data DATA.csv --biomarkers k0 k1 --out PRED.csv
    dkt evaluate --pred PRED.csv --truth TRUTH.csv --out REPORT
    dkt compare --data TRAIN.csv --test TEST.csv --models dkt,latent,gp,spline,linear --out TABLE
    dkt export-curves --model MODEL.json --grid 100 --out CURVES.csv

Exit codes: 0 success (also when a fit stops without converging), 2 usage
error, 3 data error, 4 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from .config import ModelConfig, PreprocessSpec, RunConfig, dump_config, load_config
from .dataset import CohortDataset
from .exceptions import DataError, NumericalError
from .fit import FitLogger, curve_table, fit, predict_frame, stage_subjects
from .model import FittedModel
from .persistence import load_model, save_model
from .preprocess import NormalizationParams, RawTable, apply_normalization, load_csv, preprocess, write_csv, write_frame
from .stats import DEFAULT_BOOTSTRAP, EvalReport, evaluate_predictions
from .synth import default_spec, generate, load_spec, write_cohort
from .transfer import MODEL_NAMES, TransferTask, run_transfer_comparison

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}


def _run_config(args: argparse.Namespace) -> RunConfig:
    run = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.verbosity is not None:
        updates["verbosity"] = args.verbosity
    return run.model_copy(update=updates)


def _model_config(run: RunConfig, data: CohortDataset, **optimizer: object) -> ModelConfig:
    """The configured model, or one unit shared by every biomarker."""
    config = run.model or ModelConfig(
        biomarkers=list(data.biomarkers),
        units=["l0"],
        unit_allocation=[0] * data.n_biomarkers,
        diseases=list(data.diseases),
    )
    changes = {key: value for key, value in optimizer.items() if value is not None}
    if run.seed is not None:
        changes["rng_seed"] = run.seed
    if run.threads is not None:
        changes["n_threads"] = run.threads
    return config.with_optimizer(**changes) if changes else config


def _scaled(table: RawTable, params: NormalizationParams | None, diseases: list[str]) -> CohortDataset:
    if params is not None:
        return apply_normalization(table, params, diseases)
    return table.to_dataset(diseases)


def _model_input(table: RawTable, model: FittedModel) -> CohortDataset:
    """Data on the scale a model was fitted on."""
    return _scaled(table, model.normalization, list(model.config.diseases))


def cmd_generate(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec) if args.spec else default_spec()
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    dataset, ground_truth = generate(spec)
    data_path, truth_path = write_cohort(dataset, ground_truth, args.out)
    dump_config(spec.to_model_config(), Path(args.out) / "config.yaml")
    print(f"Wrote {dataset.n_subjects} subjects, {len(dataset)} measurements to {data_path}")
    print(f"Wrote ground truth to {truth_path}")
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    run = _run_config(args)
    table = load_csv(args.data)
    spec = run.preprocess
    if not (spec.residualize or spec.normalize):
        spec = PreprocessSpec(normalize=True)
    dataset, params = preprocess(table, spec, list(run.model.diseases) if run.model else None)
    write_csv(dataset, args.out)
    if args.params and params is not None:
        Path(args.params).write_text(params.model_dump_json(indent=2))
    print(f"Wrote {dataset.n_subjects} subjects to {args.out}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    run = _run_config(args)
    table = load_csv(args.data)
    diseases = list(run.model.diseases) if run.model else None
    data, params = preprocess(table, run.preprocess, diseases)
    config = _model_config(run, data, max_sweeps=args.max_sweeps, restarts=args.restarts)

    fit_logger = FitLogger()
    model = fit(data, config, fit_logger=fit_logger)
    if params is not None:
        model = model.replace(normalization=params)
    save_model(model, args.out)

    diagnostics = model.diagnostics
    print(f"objective: {model.trace[-1]:.10g}")
    print(f"sweeps: {diagnostics.sweeps}")
    print(f"converged: {diagnostics.converged}")
    if not diagnostics.converged:
        logger.warning(f"Fit stopped after {diagnostics.sweeps} sweeps without converging")
    return EXIT_OK


def cmd_stage(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    data = _model_input(load_csv(args.data), model)
    beta = stage_subjects(model, data, args.biomarkers)
    frame = pd.DataFrame(
        {
            "subject_id": list(data.subject_ids),
            "disease": [data.diseases[d] for d in data.disease],
            "beta": beta,
        },
    )
    frame.to_csv(args.out, index=False, float_format="%.17g")
    print(f"Staged {len(frame)} subjects")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    data = _model_input(load_csv(args.data), model)
    frame = predict_frame(model, data, args.biomarkers, args.inputs)
    write_frame(frame, args.out)
    print(f"Wrote {len(frame)} predicted visits to {args.out}")
    return EXIT_OK


def _write_report(report: EvalReport, out: str) -> None:
    out = Path(out)
    report.to_csv(out.with_suffix(".csv"))
    text = report.to_text()
    out.with_suffix(".txt").write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred = load_csv(args.pred)
    truth = load_csv(args.truth)
    regions = args.biomarkers or [b for b in pred.biomarkers if b in truth.biomarkers]
    seed = args.seed if args.seed is not None else 0
    report = evaluate_predictions(pred.frame, truth.frame, regions, bootstrap=args.bootstrap, seed=seed)
    _write_report(report, args.out)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    run = _run_config(args)
    table = load_csv(args.data)
    diseases = list(run.model.diseases) if run.model else None
    train, params = preprocess(table, run.preprocess, diseases)
    test = _scaled(load_csv(args.test), params, list(train.diseases))
    truth = _scaled(load_csv(args.truth), params, list(train.diseases)) if args.truth else None
    config = _model_config(run, train)
    models = [name.strip() for name in args.models.split(",") if name.strip()]
    train = train.align_to(config.biomarkers, config.diseases)
    task = TransferTask.from_dataset(train, config, args.inputs, args.targets)
    report = run_transfer_comparison(
        train,
        test,
        models,
        config,
        bootstrap=args.bootstrap,
        seed=run.seed or 0,
        task=task,
        fit_logger=FitLogger(),
        truth=truth,
    )
    _write_report(report, args.out)
    return EXIT_OK


def cmd_export_curves(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    frame = curve_table(model, args.grid)
    frame.to_csv(args.out, index=False, float_format="%.17g")
    print(f"Wrote {frame['curve'].nunique()} curves per disease to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Random seed (overrides the config file).")
    common.add_argument("--threads", type=int, default=None, help="Worker threads for the fit.")
    common.add_argument("--verbosity", type=int, choices=[0, 1, 2], default=None, help="0 warnings, 1 info, 2 debug.")

    parser = argparse.ArgumentParser(prog="dkt", description="Disease knowledge transfer across cohorts.")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("generate", parents=[common], help="Generate a synthetic cohort.")
    p.add_argument("--spec", help="YAML generation recipe; the default cohort otherwise.")
    p.add_argument("--out", required=True, help="Output directory.")
    p.set_defaults(handler=cmd_generate)

    p = commands.add_parser("preprocess", parents=[common], help="Residualise and normalise a raw table.")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--params", help="Where to write the normalisation parameters (JSON).")
    p.set_defaults(handler=cmd_preprocess)

    p = commands.add_parser("fit", parents=[common], help="Fit a model.")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--max-sweeps", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.set_defaults(handler=cmd_fit)

    p = commands.add_parser("stage", parents=[common], help="Estimate subject time shifts with a fitted model.")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--biomarkers", nargs="+", help="Stage from these biomarkers only.")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_stage)

    p = commands.add_parser("predict", parents=[common], help="Predict biomarker values with a fitted model.")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--biomarkers", nargs="+", help="Biomarkers to predict; all by default.")
    p.add_argument("--inputs", nargs="+", help="Stage subjects from these biomarkers only.")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_predict)

    p = commands.add_parser("evaluate", parents=[common], help="Rank-correlate predictions with measurements.")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--biomarkers", nargs="+")
    p.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP)
    p.add_argument("--out", required=True, help="Report path; .csv and .txt are written.")
    p.set_defaults(handler=cmd_evaluate)

    p = commands.add_parser("compare", parents=[common], help="Compare models on the transfer task.")
    p.add_argument("--data", required=True, help="Training table.")
    p.add_argument("--test", required=True, help="Test table the models stage and predict from.")
    p.add_argument("--truth", help="Table of target values to score against; the test table by default.")
    p.add_argument("--config")
    p.add_argument("--models", default=",".join(MODEL_NAMES))
    p.add_argument("--targets", nargs="+")
    p.add_argument("--inputs", nargs="+")
    p.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP)
    p.add_argument("--out", required=True, help="Table path; .csv and .txt are written.")
    p.set_defaults(handler=cmd_compare)

    p = commands.add_parser("export-curves", parents=[common], help="Sample fitted trajectories for plotting.")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_export_curves)
    return parser


def _verbosity(args: argparse.Namespace) -> int:
    """--verbosity, else the one in --config, else info."""
    if args.verbosity is not None:
        return args.verbosity
    if getattr(args, "config", None):
        try:
            return load_config(args.config).verbosity
        except DataError:
            # reported by the command itself
            return 1
    return 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = VERBOSITY_LEVELS[_verbosity(args)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
