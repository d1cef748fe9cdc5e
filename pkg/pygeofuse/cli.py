# pygeofuse/cli.py

"""
Command-line surface: `geofuse synth-gen | train | eval | gradcheck | ablation`.

Settings are merged in this order, later sources winning: the `--config`
YAML file, the dedicated flags of a subcommand, then `--set section.key=value`
overrides. Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .config import (
    AblationConfig,
    BaseConfig,
    EvalConfig,
    GradCheckConfig,
    SynthGenConfig,
    TrainConfig,
    parse_overrides,
)
from .config.base import read_config_file
from .errors import ConfigurationError, GeoFuseError, exit_code_for


class _ArgumentParser(argparse.ArgumentParser):
    """Argument errors exit with the validation exit code."""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _csv(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _common(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("--config", type=Path, help="YAML file of section.key settings")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override one setting, e.g. train.lr=0.05; repeatable")
    parser.add_argument("--out", type=Path, required=out_required, help="Output directory")
    parser.add_argument("--verbose", action="store_true", help="Mirror the detailed log on the terminal")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="geofuse", description="Desk-scale cross-view geo-localization")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth-gen", help="Render a synthetic dataset")
    _common(synth)
    synth.add_argument("--classes", type=int)
    synth.add_argument("--views-per-class", type=int)
    synth.add_argument("--test-views-per-class", type=int)
    synth.add_argument("--size", type=int)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--force", action="store_true", default=None)

    train = commands.add_parser("train", help="Train a model")
    _common(train)
    train.add_argument("--data", type=Path, required=True)
    train.add_argument("--ablate", choices=["none", "token-only", "token-channel", "no-cc", "no-it"])
    train.add_argument("--modality", choices=["roadmap", "blank", "pseudo"])
    train.add_argument("--epochs", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--static-anchors", action="store_true", default=None)

    evaluate = commands.add_parser("eval", help="Evaluate a checkpoint per weather condition")
    _common(evaluate)
    evaluate.add_argument("--data", type=Path, required=True)
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--directions", choices=["both", "d2s", "s2d"])
    evaluate.add_argument("--split", choices=["train", "test"])
    evaluate.add_argument("--severity", type=float)
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--modality", choices=["roadmap", "blank", "pseudo"])
    evaluate.add_argument("--conditions", type=_csv, help="Comma-separated condition names")

    gradcheck = commands.add_parser("gradcheck", help="Finite-difference gradient checks")
    _common(gradcheck, out_required=False)
    gradcheck.add_argument("--scope", choices=["all", "core", "attention", "fusion", "losses", "encoder"])
    gradcheck.add_argument("--tol", type=float)
    gradcheck.add_argument("--seed", type=int)

    ablation = commands.add_parser("ablation", help="Compare fusion configurations over seeds")
    _common(ablation)
    ablation.add_argument("--data", type=Path, required=True)
    ablation.add_argument("--configs", type=_csv, help="Comma-separated configuration names")
    ablation.add_argument("--seeds", type=_csv, help="Comma-separated seeds")
    ablation.add_argument("--epochs", type=int)
    ablation.add_argument("--blank-control", action="store_true", default=None)

    return parser


# subcommand -> (config class, {argparse dest: dotted key})
_COMMANDS = {
    "synth-gen": (SynthGenConfig, {
        "out": "run.out_dir",
        "classes": "synth.classes",
        "views_per_class": "synth.views_per_class",
        "test_views_per_class": "synth.test_views_per_class",
        "size": "synth.size",
        "seed": "synth.seed",
        "force": "run.force",
    }),
    "train": (TrainConfig, {
        "out": "run.out_dir",
        "data": "data.root",
        "ablate": "train.ablate",
        "modality": "train.modality",
        "epochs": "train.epochs",
        "seed": "train.seed",
        "static_anchors": "train.static_anchors",
    }),
    "eval": (EvalConfig, {
        "out": "run.out_dir",
        "data": "data.root",
        "checkpoint": "eval.checkpoint",
        "directions": "eval.directions",
        "split": "eval.split",
        "severity": "eval.severity",
        "seed": "eval.seed",
        "modality": "eval.modality",
        "conditions": "eval.conditions",
    }),
    "gradcheck": (GradCheckConfig, {
        "out": "run.out_dir",
        "scope": "gradcheck.scope",
        "tol": "gradcheck.tol",
        "seed": "gradcheck.seed",
    }),
    "ablation": (AblationConfig, {
        "out": "run.out_dir",
        "data": "data.root",
        "configs": "ablation.configs",
        "seeds": "ablation.seeds",
        "epochs": "train.epochs",
        "blank_control": "ablation.blank_control",
    }),
}


def _settings(args: argparse.Namespace, flags: Dict[str, str]) -> Dict[str, Any]:
    settings: Dict[str, Any] = {}
    if args.config is not None:
        if not args.config.is_file():
            raise FileNotFoundError(f"Configuration file not found: {args.config}")
        settings.update(read_config_file(args.config))
    for dest, key in flags.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if isinstance(value, Path):
            value = str(value.resolve())
        elif dest == "seeds":
            value = [int(item) for item in value]
        settings[key] = value
    settings.update(parse_overrides(args.overrides))
    return settings


def build_config(args: argparse.Namespace) -> BaseConfig:
    config_class, flags = _COMMANDS[args.command]
    settings = _settings(args, flags)
    if args.command == "gradcheck":
        settings.setdefault("run.out_dir", str(Path.cwd() / "gradcheck"))
    config = config_class.from_mapping(settings)
    # relative paths of the config file and of --set resolve against the working directory
    config._caller_dir = Path.cwd()
    config._set_config_options(has_log=True, write_on_terminal=args.verbose)
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        build_config(args).run()
    except (GeoFuseError, OSError, ValueError, RuntimeError) as exc:
        print(f"geofuse: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
