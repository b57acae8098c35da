from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import torch

from ...internal import tensor_digest
from ...rasterizer import SHColors, opacity_expected
from ...scene import GaussianCloud, read_scene
from ...trainer import TrainState, appearance, latent_from_seed, load_checkpoint
from ...trainer.density import inference_opacity
from ..flags import Flags

if TYPE_CHECKING:
    from ..utils import Subparser


def configure_inspect_cmd(parent: Subparser) -> None:
    parser = parent.add_parser("inspect", help="Summarize a checkpoint directory or a scene file")
    Flags.add_subcommand_options(parser)
    parser.add_argument("path", type=str, help="Checkpoint directory or scene file")


def _cloud_summary(cloud: GaussianCloud) -> dict[str, Any]:
    if len(cloud) == 0:
        return {"gaussians": 0, "sh_degree": cloud.sh_degree, "embed_dim": cloud.embed_dim}
    with torch.no_grad():
        sigma = cloud.sigma.detach()
        expected = opacity_expected(cloud.mu.detach(), sigma)
    return {
        "gaussians": len(cloud),
        "sh_degree": cloud.sh_degree,
        "embed_dim": cloud.embed_dim,
        "mean_expected_opacity": float(expected.mean()),  # type: ignore[union-attr]
        "mean_opacity_std": float(sigma.mean()),
    }


def _sample_feature_hash(state: TrainState, seed: int) -> str | None:
    """Feature hash `render --latent sample SEED` reports with conditioning camera 0."""
    if not state.flags.neural_field or not state.cameras:
        return None
    with torch.no_grad():
        colors = appearance(state, latent_from_seed(state, seed), state.cameras[0])
    assert isinstance(colors, SHColors)
    return tensor_digest(colors.coeffs)[:16]


def inspect_cmd(args: argparse.Namespace) -> None:
    path = Path(args.path)
    seed = Flags.seed.get(args)
    if path.is_dir():
        state = load_checkpoint(path)
        summary = _cloud_summary(state.cloud)
        summary.update(
            {
                "iteration": state.iteration,
                "variant": state.config.variant,
                "mean_inference_opacity": float(inference_opacity(state).mean()) if len(state.cloud) else None,
                "queue_fill": state.bank.fill(),
                "clean_pool": len(state.bank.clean_pool),
                "cameras": len(state.cameras),
                "metrics_rows": len(state.metrics),
            }
        )
        if seed is not None:
            summary["sample_feature_hash"] = _sample_feature_hash(state, seed)
    else:
        summary = _cloud_summary(read_scene(path))
    print(json.dumps(summary, indent=2))
