"""Command-line entry point for the experiment pipeline.

Usage:
    rashomon-mdp <subcommand> [--config FILE] [--out DIR] [--seeds N]
                 [--jobs MIN..MAX] [--property TEXT] [--cap N]

Subcommands run individual stages (build, synthesize, train, verify,
attribute, rashomon, shift) or the whole pipeline (all).  Flags override
config-file keys; errors print a machine-readable JSON record to stderr
and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from rashomon_mdp import pipeline


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rashomon-mdp",
        description=(
            "Builds a stochastic taxi MDP, synthesizes and clones an optimal "
            "policy, proves behavioral equivalence of the clones by model "
            "checking, tells them apart by feature rankings, and stress-tests "
            "ensembles under job-count shift."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "build": "compile the taxi MDP to an explicit model file",
        "synthesize": "solve the property and emit the expert policy + dataset",
        "train": "clone the expert dataset once per seed",
        "verify": "partition trained policies into behavioral classes",
        "attribute": "rank features per policy by mean saliency",
        "rashomon": "assemble the Rashomon set of the largest class",
        "shift": "re-verify members/ensemble/permissive under more jobs",
        "all": "run every stage and write the run manifest",
    }
    for name, help_text in commands.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", metavar="FILE", help="flat key = value config file")
        cmd.add_argument("--out", metavar="DIR", help="output directory (default: out)")
        cmd.add_argument(
            "--seeds",
            metavar="N",
            type=int,
            help="number of cloning seeds (base seed comes from the config)",
        )
        cmd.add_argument(
            "--jobs",
            metavar="MIN..MAX",
            help="inclusive job-count range for the shift stage",
        )
        cmd.add_argument("--property", metavar="TEXT", help="reachability property")
        cmd.add_argument(
            "--cap", metavar="N", type=int, help="state-space construction cap"
        )
    return parser


def _config_from_args(args: argparse.Namespace) -> pipeline.ExperimentConfig:
    overrides = {}
    if args.out is not None:
        overrides["out"] = args.out
    if args.seeds is not None:
        overrides["seed_count"] = str(args.seeds)
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.property is not None:
        overrides["property"] = args.property
    if args.cap is not None:
        overrides["cap"] = str(args.cap)
    return pipeline.load_config(args.config, overrides)


_COMMANDS = {
    "build": pipeline.cmd_build,
    "synthesize": pipeline.cmd_synthesize,
    "train": pipeline.cmd_train,
    "verify": pipeline.cmd_verify,
    "attribute": pipeline.cmd_attribute,
    "rashomon": pipeline.cmd_rashomon,
    "shift": pipeline.cmd_shift,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_arg_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "all":
            manifest = pipeline.cmd_all(cfg)
            for stage, entry in manifest["stages"].items():
                print(f"{stage}: {', '.join(entry['files'])} ({entry['seconds']}s)")
            print(f"manifest: {pipeline.MANIFEST_FILE}")
        else:
            files = _COMMANDS[args.command](cfg)
            for name in files:
                print(name)
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports all failures
        record = {"error": type(e).__name__, "message": str(e)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
