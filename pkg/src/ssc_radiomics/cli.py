"""Command-line driver: ``ssc-radiomics <stage> [--config PATH] [flags]``.

Exit codes: 0 success, 1 validation error, 2 missing upstream artifact,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .cohort import DataIntegrityError
from .splits import SplitError
from .volgrid import ShapeMismatchError, VolumeFormatError

EXIT_OK, EXIT_VALIDATION, EXIT_MISSING, EXIT_RUNTIME = 0, 1, 2, 3

_VALIDATION_ERRORS = (pipeline.ConfigError, DataIntegrityError, VolumeFormatError,
                      ShapeMismatchError, SplitError)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "missing artifact"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML or JSON pipeline config")
    common.add_argument("--seed", type=int, help="root seed (overrides config)")
    common.add_argument("--jobs", type=int, help="worker cap for parallel stages")
    common.add_argument("--censored-as-negative", action="store_true", default=None,
                        help="count censored scans as negatives instead of dropping them")
    common.add_argument("--data-dir", help="cohort directory (scans.csv, patients.csv, volumes/)")
    common.add_argument("--out-dir", help="pipeline output directory")
    common.add_argument("--trials", type=int, help="hyperparameter trials per model and task")

    parser = _Parser(prog="ssc-radiomics", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="stage", required=True)
    helps = {
        "synth": "generate a synthetic phantom cohort into the data dir",
        "preprocess": "resample, mask and normalize every volume",
        "extract": "compute the radiomics feature table",
        "label": "derive 1/3/5-year mortality labels",
        "split": "write grouped k-fold and stratified holdout plans",
        "tune": "hyperparameter search on the holdout validation set",
        "train": "fit one model per fold with the tuned parameters",
        "evaluate": "pooled and per-fold test metrics",
        "report": "assemble the summary table and cohort tables",
        "all": "run every stage in order",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.jobs is not None:
        out["jobs"] = args.jobs
    if args.censored_as_negative:
        out["censored_as_negative"] = True
    paths = {}
    if args.data_dir:
        paths["data_dir"] = args.data_dir
    if args.out_dir:
        paths["out_dir"] = args.out_dir
    if paths:
        out["paths"] = paths
    if args.trials is not None:
        out["tune"] = {"n_trials": args.trials}
    return out


def _run(stage: str, argv=None) -> int:
    return main([stage, *(argv or [])])


def cmd_synth(argv=None) -> int:
    return _run("synth", argv)


def cmd_preprocess(argv=None) -> int:
    return _run("preprocess", argv)


def cmd_extract(argv=None) -> int:
    return _run("extract", argv)


def cmd_label(argv=None) -> int:
    return _run("label", argv)


def cmd_split(argv=None) -> int:
    return _run("split", argv)


def cmd_tune(argv=None) -> int:
    return _run("tune", argv)


def cmd_train(argv=None) -> int:
    return _run("train", argv)


def cmd_evaluate(argv=None) -> int:
    return _run("evaluate", argv)


def cmd_report(argv=None) -> int:
    return _run("report", argv)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = pipeline.resolve_config(args.config, _overrides(args))
        if args.stage == "all":
            out = pipeline.run_all(cfg)
        else:
            out = pipeline.RUNNERS[args.stage](cfg)
    except pipeline.MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # anything else is a runtime failure
        print(f"error: {args.stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{args.stage}: wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
