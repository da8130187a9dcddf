"""
htype-lab: numerical laboratory for Schrödinger evolution on H-type groups.
Main application entry point using modular architecture.
"""

import argparse
import sys
from typing import Optional

from src.cli.components.dispersive_commands import (
    run_dispersive_fit,
    run_scaling_check,
    run_transport_demo,
)
from src.cli.components.group_commands import run_group_check, run_transform_roundtrip
from src.cli.components.report import run_report
from src.cli.components.solver_commands import run_solve_nls
from src.cli.components.strichartz_commands import (
    run_admissible,
    run_exponents,
    run_pair_search,
    run_strichartz_scan,
)
from src.cli.utils.constants import APP_NAME, COMMAND_HELP, CSV_COLUMNS, DESCRIPTION, VERSION
from src.cli.utils.helpers import (
    canonical_json,
    execute_command,
    load_config_file,
    resolve_outdir,
    setup_logging,
)
from src.cli.utils.validators import SCHEMAS, build_config

COMMANDS = {
    "group-check": run_group_check,
    "transform-roundtrip": run_transform_roundtrip,
    "dispersive-fit": run_dispersive_fit,
    "scaling-check": run_scaling_check,
    "transport-demo": run_transport_demo,
    "admissible": run_admissible,
    "exponents": run_exponents,
    "pair-search": run_pair_search,
    "strichartz-scan": run_strichartz_scan,
    "solve-nls": run_solve_nls,
    "report": run_report,
}


def build_parser() -> argparse.ArgumentParser:
    """Sub-command parser whose flags mirror the config keys of each command."""
    parser = argparse.ArgumentParser(prog=APP_NAME, description=DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, schema in SCHEMAS.items():
        columns = CSV_COLUMNS.get(name)
        epilog = f"CSV columns: {', '.join(columns)}" if columns else None
        sub = subparsers.add_parser(name, help=COMMAND_HELP[name], description=COMMAND_HELP[name], epilog=epilog)
        sub.add_argument("--config", help="JSON file with config keys (flags win)")
        sub.add_argument("--outdir", help="artifact directory (default: $HTYPE_LAB_OUT or ./htype_lab_out)")
        sub.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
        for key, spec in schema.items():
            flag = f"--{key.replace('_', '-')}"
            if spec.kind == "flag":
                sub.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=spec.help)
            elif spec.kind == "list":
                sub.add_argument(flag, dest=key, nargs="+", default=None, help=spec.help)
            else:
                sub.add_argument(flag, dest=key, default=None, help=spec.help)
    return parser


def _run(args: argparse.Namespace) -> dict:
    flags = {key: getattr(args, key) for key in SCHEMAS[args.command]}
    config = build_config(args.command, load_config_file(args.config), flags)
    outdir = resolve_outdir(args.outdir)
    return COMMANDS[args.command](config, outdir)


def main(argv: Optional[list[str]] = None) -> int:
    """Main application function."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    exit_code, result, error = execute_command(_run, args)
    if error:
        print(error, file=sys.stderr)
    else:
        print(canonical_json(result, indent=2))
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
