from __future__ import annotations

import argparse
import json
import shutil
from pathlib import Path
from typing import TYPE_CHECKING

from ...errors import ValidationError
from ...synthbench import SynthConfig, make_default_dataset, write_dataset
from ..flags import Flags
from ..utils import parse_size

if TYPE_CHECKING:
    from ..utils import Subparser


def configure_synth_cmd(parent: Subparser) -> None:
    parser = parent.add_parser("synth", help="Generate a multi-style synthetic dataset")
    Flags.add_subcommand_options(parser)
    parser.add_argument("--out", metavar="DIR", type=str, required=True, help="Output directory")
    parser.add_argument("--gaussians", metavar="N", type=int, default=200, help="Ground-truth gaussians (default: 200)")
    parser.add_argument("--views", metavar="N", type=int, default=24, help="Training views (default: 24)")
    parser.add_argument("--test-views", metavar="N", type=int, default=4, help="Held-out views (default: 4)")
    parser.add_argument(
        "--styles",
        metavar="M",
        type=int,
        default=3,
        help="Styles besides the identity, 0 gives a single group (default: 3)",
    )
    parser.add_argument("--size", metavar="WxH", type=parse_size, default=(64, 64), help="Image size (default: 64x64)")
    parser.add_argument("--clean-images", metavar="N", type=int, default=8, help="Clean-scene images (default: 8)")
    parser.add_argument("--jitter", metavar="AMPLITUDE", type=float, default=0.05, help="Cross-view jitter (default: 0.05)")
    parser.add_argument("--force", action="store_true", help="Overwrite a non-empty output directory")


def synth_cmd(args: argparse.Namespace) -> None:
    for name in ("gaussians", "views"):
        if getattr(args, name) < 1:
            raise ValidationError(f"--{name} must be positive, got {getattr(args, name)}")
    for name in ("test_views", "styles", "clean_images"):
        if getattr(args, name) < 0:
            raise ValidationError(f"--{name.replace('_', '-')} must not be negative, got {getattr(args, name)}")
    out = Path(args.out)
    if out.is_file():
        raise ValidationError(f"{out} is a file, expected a directory")
    if out.exists() and any(out.iterdir()):
        if not args.force:
            raise ValidationError(f"{out} is not empty, pass --force to overwrite it")
        shutil.rmtree(out)
    width, height = args.size
    seed = Flags.seed.get(args)
    config = SynthConfig(
        seed=0 if seed is None else seed,
        gaussians=args.gaussians,
        views=args.views,
        test_views=args.test_views,
        styles=args.styles,
        width=width,
        height=height,
        clean_images=args.clean_images,
        jitter=args.jitter,
    )
    dataset = make_default_dataset(config)
    write_dataset(out, dataset)
    summary = {
        "out": str(out),
        "images": len(dataset.images),
        "styles": [style.describe() for style in dataset.styles],
        **config.as_dict(),
    }
    print(json.dumps(summary, indent=2))
