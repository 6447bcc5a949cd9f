"""``mixlab`` command line entry point."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mixlab import __version__
from mixlab.errors import CapacityError, DivergenceError, MixlabError, PreconditionError, UnsupportedOperationError
from mixlab.experiments import Scenario, run
from mixlab.simulation import default_threads

EXIT_OK, EXIT_PRECONDITION, EXIT_CAPACITY = 0, 2, 3

SUBCOMMANDS = {
    "exact": "exact",
    "simulate": "simulate",
    "lamplighter": "lamplighter",
    "bounds": "bounds",
    "check-assumptions": "check-assumptions",
    "scaling-study": "scaling-study",
    "run": None,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="mixlab", description="Mixing times of lamplighter walks.")
    parser.add_argument("--version", action="version", version=f"mixlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {name} scenario" if SUBCOMMANDS[name] else "run any scenario file")
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default from MIXLAB_THREADS)")
        if name == "lamplighter":
            p.add_argument("--mode", choices=("exact", "mc", "identity"), default=None,
                           help="override parameters.mode")
    return parser


def _error(exc):
    field = getattr(exc, "field", None)
    prefix = f"error [{field}]" if field else "error"
    print(f"{prefix}: {exc}", file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise PreconditionError("threads must be >= 1", field="threads")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise PreconditionError("seed must be in [0, 2^64)", field="seed")
        scenario = Scenario.load(args.config, SUBCOMMANDS[args.command])
        if args.seed is not None:
            scenario.seed = args.seed
        if getattr(args, "mode", None):
            scenario.parameters["mode"] = args.mode
        threads = args.threads or default_threads()
        report = run(scenario, args.out, threads, base_dir=Path(args.config).parent)
    except (PreconditionError, UnsupportedOperationError) as exc:
        _error(exc)
        return EXIT_PRECONDITION
    except (CapacityError, DivergenceError) as exc:
        _error(exc)
        return EXIT_CAPACITY
    except MixlabError as exc:
        _error(exc)
        return EXIT_PRECONDITION
    print(json.dumps(report, default=str, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
