"""Command-line entry point: `kmanb run | rank | synth | suite`.

Exit codes: 0 success, 1 usage or invalid configuration, 2 unusable data,
model or output path, 3 anything unexpected.
"""

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

import yaml
from loguru import logger
from pydantic import ValidationError

from kmanb_toolkit import __version__
from kmanb_toolkit.dataset import (
    DateMode,
    Scale,
    Target,
    list_devices,
    load_csv,
    load_device,
    synthesize_device,
    write_csv,
)
from kmanb_toolkit.errors import KmanbError
from kmanb_toolkit.feature_rank import DEFAULT_BINS, rank_features
from kmanb_toolkit.main import Settings, configure_logging, get_settings
from kmanb_toolkit.models import KMeansInit
from kmanb_toolkit.pipeline import (
    Algorithm,
    ExperimentConfig,
    ReportFormat,
    SuiteConfig,
    SynthSource,
    emit_report,
    emit_suite,
    run_experiment,
    run_suite,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _values(enum) -> list[str]:
    return [e.value for e in enum]


def cmd_run(args: argparse.Namespace, settings: Settings):
    fields = {
        "device": args.device,
        "algorithm": args.algorithm,
        "seed": settings.seed if args.seed is None else args.seed,
        "drop_top_feature": args.drop_top_feature,
        "boost_rounds": args.rounds,
        "holdout": None if args.no_holdout else args.holdout,
        "k_override": args.k_override,
        "kmeans_init": args.kmeans_init,
        "knn_k": args.knn_k,
        "rf_trees": args.rf_trees,
        "rf_mtry": args.rf_mtry,
        "target": args.target,
        "out": args.out,
        "format": args.format or ReportFormat.from_path(args.out),
    }
    if args.synth:
        fields["train"] = SynthSource(
            scale=args.synth,
            fraction=args.fraction,
            separation=args.separation,
            date_mode=args.date_mode,
        )
    else:
        fields["train"] = args.train
    if args.test:
        fields["test"] = args.test
    else:
        fields["split_fraction"] = args.split or settings.split_fraction
    config = ExperimentConfig(**fields)
    result = run_experiment(config)
    emit_report([result], config.out, config.format)


def cmd_rank(args: argparse.Namespace, settings: Settings):
    data = load_csv(args.input, load_device(args.device))
    ranking = rank_features(data, bins=args.bins)
    if args.out:
        ranking.write(args.out)
        logger.info(f"Ranking of {len(ranking.scores)} features: {args.out}")
    else:
        sys.stdout.write(ranking.as_csv())


def cmd_synth(args: argparse.Namespace, settings: Settings):
    data = synthesize_device(
        args.device,
        scale=args.scale,
        seed=settings.seed if args.seed is None else args.seed,
        separation=args.separation,
        date_mode=args.date_mode,
    )
    write_csv(data, args.out)
    logger.info(f"Wrote {len(data)} synthetic rows to {args.out}")


def cmd_suite(args: argparse.Namespace, settings: Settings):
    suite = SuiteConfig.load(args.config)
    if args.workers is not None:
        suite = SuiteConfig(**(suite.dict() | {"workers": args.workers}))
    report = run_suite(suite, timeout=settings.suite_timeout)
    emit_suite(report, args.out)


def build_parser() -> Parser:
    parser = Parser(
        prog="kmanb",
        description="K-means augmented boosted naive Bayes experiments on"
        " IoT telemetry.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=Parser
    )
    devices = list_devices()

    run = commands.add_parser("run", help="Run one experiment.")
    run.add_argument("--device", required=True, choices=devices)
    run.add_argument(
        "--algorithm",
        default=Algorithm.kmanb.value,
        choices=_values(Algorithm),
    )
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--train", type=Path, help="Training csv.")
    source.add_argument(
        "--synth",
        choices=_values(Scale),
        help="Generate the training data at this scale instead.",
    )
    held_out = run.add_mutually_exclusive_group()
    held_out.add_argument("--test", type=Path, help="Test csv.")
    held_out.add_argument(
        "--split", type=float, help="Training share of a stratified split."
    )
    run.add_argument("--seed", type=int)
    run.add_argument("--drop-top-feature", action="store_true")
    run.add_argument("--rounds", type=int, default=10)
    run.add_argument(
        "--holdout",
        type=float,
        default=0.2,
        help="Share of the training rows held out to pick the KMANB variant.",
    )
    run.add_argument(
        "--no-holdout",
        action="store_true",
        help="Always use the cluster feature and every boosting round.",
    )
    run.add_argument("--k-override", type=int)
    run.add_argument(
        "--kmeans-init",
        default=KMeansInit.random.value,
        choices=_values(KMeansInit),
    )
    run.add_argument("--knn-k", type=int, default=1)
    run.add_argument("--rf-trees", type=int, default=100)
    run.add_argument("--rf-mtry", type=int)
    run.add_argument(
        "--target", default=Target.attack_type.value, choices=_values(Target)
    )
    run.add_argument("--separation", type=float, default=6.0)
    run.add_argument(
        "--fraction",
        type=float,
        default=1.0,
        help="Share of every synthetic class count to generate.",
    )
    run.add_argument(
        "--date-mode",
        default=DateMode.per_class.value,
        choices=_values(DateMode),
    )
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--format", choices=[*_values(ReportFormat), "markdown"])
    run.set_defaults(handler=cmd_run)

    rank = commands.add_parser("rank", help="Rank features of a csv.")
    rank.add_argument("--device", required=True, choices=devices)
    rank.add_argument("--input", type=Path, required=True)
    rank.add_argument("--out", type=Path)
    rank.add_argument("--bins", type=int, default=DEFAULT_BINS)
    rank.set_defaults(handler=cmd_rank)

    synth = commands.add_parser("synth", help="Write a synthetic csv.")
    synth.add_argument("--device", required=True, choices=devices)
    synth.add_argument(
        "--scale", default=Scale.train_test.value, choices=_values(Scale)
    )
    synth.add_argument("--separation", type=float, default=6.0)
    synth.add_argument("--seed", type=int)
    synth.add_argument(
        "--date-mode",
        default=DateMode.per_class.value,
        choices=_values(DateMode),
    )
    synth.add_argument("--out", type=Path, required=True)
    synth.set_defaults(handler=cmd_synth)

    suite = commands.add_parser("suite", help="Run a suite of experiments.")
    suite.add_argument("--config", type=Path, required=True)
    suite.add_argument("--out", type=Path, required=True)
    suite.add_argument("--workers", type=int)
    suite.set_defaults(handler=cmd_suite)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    settings = get_settings()
    configure_logging(settings)
    try:
        args.handler(args, settings)
    except (ValidationError, yaml.YAMLError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except (KmanbError, FileNotFoundError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
    except Exception:
        logger.exception(f"Unexpected failure in {args.command}")
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
