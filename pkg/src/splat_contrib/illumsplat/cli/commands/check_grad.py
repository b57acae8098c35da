from __future__ import annotations

import argparse
import json
from typing import TYPE_CHECKING

from ...gradcheck import CASES, ensure_passed, run_gradcheck
from ..flags import Flags

if TYPE_CHECKING:
    from ..utils import Subparser


def configure_check_grad_cmd(parent: Subparser) -> None:
    parser = parent.add_parser("check-grad", help="Compare analytic gradients with finite differences")
    Flags.add_subcommand_options(parser)
    parser.add_argument(
        "--cases",
        metavar="CASES",
        type=str,
        choices=list(CASES),
        default="all",
        help=f"Suites to run: {' | '.join(CASES)} (default: all)",
    )


def check_grad_cmd(args: argparse.Namespace) -> None:
    seed = Flags.seed.get(args)
    report = run_gradcheck(0 if seed is None else seed, args.cases)
    print(json.dumps(report.as_dict(), indent=2))
    ensure_passed(report)
