"""
spgcc CLI: one subcommand per pipeline stage plus run-all.

All print() calls in the project live here. Each stage prints a small table and a
machine-readable line "DONE stage=<name> key=value ... seconds=<wall time>".
Any `--key=value` or `--section.key=value` flag not listed below overrides the config.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from tabulate import tabulate

from spgcc import __version__
from spgcc.errors import ConfigError, SpgccError
from spgcc.models import StageResult
from spgcc.pipeline import ArtifactStore, Pipeline
from spgcc.schemas import PipelineConfig, load_config

STAGE_COMMANDS = ("synth", "pretrain", "segment", "features", "cluster", "evaluate")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point registered in pyproject.toml; returns the process exit code."""
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        config = _load(args, extra)
        return _dispatch(args, config)
    except SpgccError as e:
        print(f"ERROR code={e.code}: {e}", file=sys.stderr)
        return e.exit_code


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common_options(default=None) -> argparse.ArgumentParser:
    # subcommands use SUPPRESS so an option given before the subcommand is not reset
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=default, help="TOML config file (default: schema defaults)")
    common.add_argument("--seed", type=int, default=default, help="random seed (unsigned 64-bit)")
    common.add_argument("--output-dir", type=Path, default=default, help="run directory for all artifacts")
    return common


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spgcc",
        description="Superpixel graph contrastive clustering for hyperspectral images",
        parents=[_common_options()],
        allow_abbrev=False,
    )
    common = _common_options(argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"spgcc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in STAGE_COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    render = sub.add_parser("render-map", parents=[common], help="render a label file as a PPM clustering map")
    render.add_argument("--labels", type=Path, default=None, help="HSIL label file (default: the run's prediction)")
    render.add_argument("--num-classes", type=int, default=None, help="palette size K (default: config)")
    render.add_argument("--output", type=Path, default=None, help="PPM path (default: prediction.ppm in the run)")
    mat = sub.add_parser("import-mat", parents=[common], help="convert a .mat scene into the run's cube and labels")
    mat.add_argument("--cube-mat", type=Path, required=True, help=".mat file holding the H×W×C cube")
    mat.add_argument("--labels-mat", type=Path, default=None, help=".mat file holding the H×W ground truth")
    mat.add_argument("--cube-key", default=None, help="variable name of the cube (default: the only 3-D one)")
    mat.add_argument("--labels-key", default=None, help="variable name of the labels (default: the only 2-D one)")
    sub.add_parser("run-all", parents=[common], help="run every stage in order")
    sub.add_parser("status", parents=[common], help="list the artifacts present in the run directory")
    # short override keys such as --h=30 must not resolve to --help
    for child in sub.choices.values():
        child.allow_abbrev = False
    return parser


def _load(args: argparse.Namespace, extra: List[str]) -> PipelineConfig:
    overrides = []
    for item in extra:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"unrecognized argument '{item}'; overrides take the form --key=value")
        overrides.append(item[2:])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.output_dir is not None:
        overrides.append(f"output_dir='{args.output_dir.as_posix()}'")
    return load_config(args.config, overrides)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def _dispatch(args: argparse.Namespace, config: PipelineConfig) -> int:
    pipeline = Pipeline(config)

    if args.command == "status":
        _handle_status(pipeline.store)
        return 0

    if args.command == "run-all":
        for result in pipeline.run_all():
            _report(result)
        return 0

    if args.command == "import-mat":
        _report(pipeline.import_mat(args.cube_mat, args.labels_mat, args.cube_key, args.labels_key))
        return 0

    if args.command == "render-map":
        labels = args.labels or pipeline.store.require("prediction")
        output = args.output or pipeline.store.path("prediction_map")
        _report(pipeline.render_map(labels, output, args.num_classes))
        return 0

    handler = getattr(pipeline, args.command)
    _report(handler())
    return 0


def _report(result: StageResult) -> None:
    rows = [[key, f"{value:.4f}" if isinstance(value, float) else value] for key, value in result.values.items()]
    print(f"\n=== {result.stage} ===")
    if rows:
        print(tabulate(rows, headers=["Value", result.stage], tablefmt="grid"))
    print(result.done_line())


def _handle_status(store: ArtifactStore) -> None:
    stats = store.get_stats()
    print(f"\n=== Run directory {stats['output_dir']} ===")
    print(f"Artifacts present: {stats['total_artifacts']} ({stats['total_size_kb']:.1f} KB)")
    table = [
        [key, info.producer, f"{info.size_kb:.1f}", info.modified]
        for key, info in stats['artifacts'].items()
    ]
    if table:
        print(tabulate(table, headers=["Artifact", "Produced by", "KB", "Modified"], tablefmt="grid"))
    if stats['missing']:
        print(f"Missing: {', '.join(stats['missing'])}")


if __name__ == "__main__":
    sys.exit(main())
