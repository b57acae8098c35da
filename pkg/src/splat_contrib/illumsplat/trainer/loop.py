from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import torch
from tqdm import tqdm

from ..errors import ContractError, ConvergenceError, ValidationError
from ..illumination import (
    FieldEvaluator,
    IlluminationLatent,
    LatentSource,
    contrastive_loss,
    encode,
    evaluate_field,
    generate_latent,
    generator_alignment_loss,
    normalize_latent,
    sample_noise,
)
from ..internal import Timer, derive_seed, make_generator
from ..models import EvalRow
from ..rasterizer import ColorSource, render, render_image
from ..scene import Camera, clamp_log_scales_, normalize_quaternions_
from ..synthbench import SynthDataset, psnr, ssim
from .config import TrainConfig
from .density import densify_and_prune, reset_opacity, should_densify, should_reset_opacity
from .losses import reconstruction_loss, uncertainty_reg_loss
from .state import MetricWindow, TrainState, initialize_state, save_checkpoint

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class Batch:
    view: int
    style: int
    image: torch.Tensor
    camera: Camera
    clean: torch.Tensor | None = None
    """Unstyled image of an unrelated scene, fed to the clean-latent pool."""


@dataclass
class StepResult:
    iteration: int
    """Iteration count after the step."""
    rec: float
    contra: float
    ucn: float
    """Unweighted uncertainty regularizer."""
    total: float
    psnr: float


@dataclass
class TrainResult:
    state: TrainState
    evaluation: list[EvalRow]
    checkpoint: Path | None = None
    elapsed_seconds: float = 0.0
    """Wall time of the iterations, the held-out evaluation and the checkpoint write."""
    """Wall time of the training iterations and the held-out evaluation."""


def sample_batch(state: TrainState, dataset: SynthDataset) -> Batch:
    """Draw a (view, style) pair uniformly from the training split."""
    views = dataset.views("train")
    view = views[int(torch.randint(len(views), (1,), generator=state.generator))]
    style = int(torch.randint(dataset.style_count, (1,), generator=state.generator))
    clean = None
    if dataset.clean_images:
        index = int(torch.randint(len(dataset.clean_images), (1,), generator=state.generator))
        clean = dataset.clean_images[index]
    return Batch(view, style, dataset.image(view, style), dataset.cameras[view], clean)


def train_step(state: TrainState, batch: Batch) -> StepResult:
    """One optimization step: appearance, render, losses, backward, Adam.

    Every random draw comes from the state's generator or from seeds derived
    from (config seed, iteration), so the step is a pure function of
    (state, batch).

    Raises:
        ConvergenceError: when a loss term is not finite.
    """
    config = state.config
    flags = state.flags
    cloud = state.cloud
    state.optimizer.zero_grad(set_to_none=True)
    zero = torch.zeros((), dtype=cloud.X.dtype)

    latent: IlluminationLatent | None = None
    colors: ColorSource | None = None
    if flags.neural_field:
        latent = encode(state.networks, batch.image, batch.style)
        colors = evaluate_field(state.networks, cloud, latent, batch.camera)

    mode = flags.train_mode(derive_seed(config.seed, state.iteration, 0x0E))
    out = render(cloud, batch.camera, colors, mode)
    rec = reconstruction_loss(out.color, batch.image, config.dssim_weight)

    contra = zero
    if latent is not None and state.bank.is_warm(batch.style):
        contra = contrastive_loss(latent.z, batch.style, state.bank, state.generator, config.tau)
        generated = generate_latent(state.networks, sample_noise(state.networks, state.generator))
        contra = contra + generator_alignment_loss(generated.z, state.bank, state.generator, config.tau)

    ucn = uncertainty_reg_loss(cloud, config.ucn_sign) if flags.stochastic_opacity else zero
    total = rec + contra + config.lambda_ucn * ucn
    for term, value in (("rec", rec), ("contra", contra), ("ucn", ucn), ("total", total)):
        if not bool(torch.isfinite(value)):
            raise ConvergenceError(term, state.iteration)

    total.backward()
    state.update_learning_rate()
    state.optimizer.step()
    normalize_quaternions_(cloud.q)
    clamp_log_scales_(cloud.s)

    if latent is not None:
        z = latent.z.detach()
        state.bank.push(batch.style, normalize_latent(z), float(z.norm()))
        if batch.clean is not None:
            with torch.no_grad():
                z_clean = encode(state.networks, batch.clean, None, LatentSource.CLEAN_SCENE).z
            state.bank.add_clean(normalize_latent(z_clean), state.generator)

    if state.iteration < config.densify_until and out.viewspace_points.grad is not None:
        scale = torch.tensor([batch.camera.width / 2.0, batch.camera.height / 2.0], dtype=cloud.X.dtype)
        grad = (out.viewspace_points.grad * scale).norm(dim=-1)
        visible = out.visible
        state.grad_accum[visible] += grad[visible]
        state.denom[visible] += 1.0

    state.iteration += 1
    with torch.no_grad():
        step_psnr = psnr(out.color.detach().clamp(0.0, 1.0), batch.image)
    result = StepResult(state.iteration, rec.item(), contra.item(), ucn.item(), total.item(), step_psnr)
    logger.debug(
        "step %d: rec %.6f contra %.6f ucn %.6f total %.6f",
        result.iteration,
        result.rec,
        result.contra,
        result.ucn,
        result.total,
    )
    return result


def check_dataset(config: TrainConfig, dataset: SynthDataset) -> None:
    if dataset.style_count != config.styles + 1:
        raise ValidationError(f"config expects {config.styles + 1} style groups, dataset has {dataset.style_count}")
    train_views = dataset.views("train")
    if not train_views:
        raise ValidationError("dataset has no training views")
    for view in dataset.views("train") + dataset.views("test"):
        cam = dataset.cameras[view]
        for style in range(dataset.style_count):
            image = dataset.image(view, style)
            if tuple(image.shape) != (cam.height, cam.width, 3):
                raise ValidationError(
                    f"image of view {view} style {style} is {tuple(image.shape)}, camera is {cam.width}x{cam.height}"
                )


def run_training(
    config: TrainConfig,
    dataset: SynthDataset,
    out_dir: PathLike | None = None,
    state: TrainState | None = None,
    progress: bool = True,
) -> TrainResult:
    """Train until `config.iterations`, then evaluate the test split.

    A given `state` (loaded from a checkpoint) is continued from its
    iteration. The checkpoint is written to `out_dir` when set.

    Raises:
        ValidationError: when the dataset does not match the config or its
            cameras.
    """
    config.validate()
    check_dataset(config, dataset)
    torch.use_deterministic_algorithms(True, warn_only=True)
    if state is None:
        state = initialize_state(config, dataset.cameras, dataset.config.extent, len(dataset.views("train")))
    elif state.config.variant != config.variant:
        raise ValidationError(f"checkpoint was trained as {state.config.variant}, config asks for {config.variant}")
    else:
        state.config = config
    if state.flags.neural_field and not dataset.clean_images:
        logger.warning("dataset has no clean images, the contrastive terms stay disabled")
    logger.info(
        "training variant %s for %d iterations from iteration %d with %d gaussians",
        config.variant,
        config.iterations,
        state.iteration,
        len(state.cloud),
    )

    timer = Timer()
    bar = tqdm(total=config.iterations, initial=state.iteration, desc="training", unit="it", disable=not progress)
    with bar:
        while state.iteration < config.iterations:
            result = train_step(state, sample_batch(state, dataset))
            state.window.add(result.rec, result.contra, result.ucn, result.psnr)
            if state.iteration % config.log_interval == 0:
                row = state.window.row(state.iteration)
                state.metrics.append(row)
                state.window = MetricWindow()
                logger.info(
                    "iteration %d: rec %.5f contra %.5f ucn %.5f psnr %.2f",
                    row.iteration,
                    row.rec,
                    row.contra,
                    row.ucn,
                    row.psnr,
                )
                bar.set_postfix(psnr=f"{row.psnr:.2f}", n=len(state.cloud))
            if should_densify(state):
                densify_and_prune(state)
            if should_reset_opacity(state):
                reset_opacity(state)
            bar.update(1)

    evaluation = evaluate(state, dataset, "test") if dataset.views("test") else []
    checkpoint = save_checkpoint(out_dir, state) if out_dir is not None else None
    if evaluation:
        logger.info("held-out psnr %.3f ssim %.4f", evaluation[-1].psnr, evaluation[-1].ssim)
    elapsed = timer.elapsed_seconds()
    logger.info("trained to iteration %d in %.1f s", state.iteration, elapsed)
    return TrainResult(state, evaluation, checkpoint, elapsed)


def latent_from_image(state: TrainState, image: torch.Tensor, style_id: int | None = None) -> IlluminationLatent:
    with torch.no_grad():
        return encode(state.networks, image, style_id).detached()


def latent_from_seed(state: TrainState, seed: int) -> IlluminationLatent:
    """Generator latent for noise drawn from `seed`; the same seed gives the same latent."""
    with torch.no_grad():
        noise = sample_noise(state.networks, make_generator(seed))
        return generate_latent(state.networks, noise).detached()


def latent_from_queue(state: TrainState, style_id: int) -> IlluminationLatent:
    """Mean of the latents queued for one style, at their stored scale."""
    mean = state.bank.mean_latent(style_id)
    z = mean.reshape(state.networks.shape.latent_shape)
    return IlluminationLatent(z, style_id, LatentSource.QUEUE_MEAN)


def appearance(
    state: TrainState,
    latent: IlluminationLatent | None,
    cond_cam: Camera,
    evaluator: FieldEvaluator | None = None,
) -> ColorSource | None:
    """View-shared colors for a latent, or None when the variant has no field."""
    if not state.flags.neural_field:
        return None
    if latent is None:
        raise ContractError(f"variant {state.config.variant} renders from a latent, none was given")
    if evaluator is None:
        evaluator = FieldEvaluator(state.networks)
    return evaluator.colors(state.cloud, latent, cond_cam)


def render_view(state: TrainState, cam: Camera, colors: ColorSource | None) -> torch.Tensor:
    """Inference render clamped to [0, 1]."""
    return render_image(state.cloud.detached(), cam, colors, state.flags.inference_mode())


def evaluate(
    state: TrainState,
    dataset: SynthDataset,
    split: str = "test",
    seed: int | None = None,
) -> list[EvalRow]:
    """PSNR and SSIM of every (view, style) image of a split, plus a mean row.

    The latent follows `config.eval_latent`: encoded from the target image,
    generated from a per-(view, style) seed, or the style's queue mean. The
    conditioning camera is the target's own camera. Generated latents derive
    their seeds from `seed`, or from `config.seed` when it is None.
    """
    views = dataset.views(split)
    kind = state.config.eval_latent
    base_seed = state.config.seed if seed is None else seed
    rows: list[EvalRow] = []
    for view in views:
        cam = dataset.cameras[view]
        for style in range(dataset.style_count):
            target = dataset.image(view, style)
            latent: IlluminationLatent | None = None
            if state.flags.neural_field:
                if kind == "from-image":
                    latent = latent_from_image(state, target, style)
                elif kind == "sample":
                    latent = latent_from_seed(state, derive_seed(base_seed, view, style))
                else:
                    latent = latent_from_queue(state, style)
            with torch.no_grad():
                rendered = render_view(state, cam, appearance(state, latent, cam))
            rows.append(EvalRow(str(view), str(style), psnr(rendered, target), ssim(rendered, target)))
    if rows:
        rows.append(
            EvalRow(
                "mean",
                "all",
                sum(row.psnr for row in rows) / len(rows),
                sum(row.ssim for row in rows) / len(rows),
            )
        )
    return rows
