"""Contrastive objectives over the latent queues.

All similarities are dot products of unit vectors scaled by 1 / tau. Losses
are written as a difference of log-sum-exps, which is the negative log of
the positive mass over the total mass without overflowing at tau = 0.07.
"""

from __future__ import annotations

import torch

from ..errors import ContractError
from .field import normalize_latent
from .queue import LatentQueueBank

DEFAULT_TAU = 0.07


def _clean_logit(query: torch.Tensor, bank: LatentQueueBank, tau: float, generator: torch.Generator) -> torch.Tensor:
    if not bank.clean_pool:
        raise ContractError("contrastive loss needs at least one clean-scene latent")
    z_clean = bank.sample_clean(generator)
    return (z_clean @ query / tau).reshape(1)


def contrastive_loss(
    query: torch.Tensor,
    style_id: int,
    bank: LatentQueueBank,
    generator: torch.Generator,
    tau: float = DEFAULT_TAU,
) -> torch.Tensor:
    """-log(sum of positives / (sum over every queue + clean negative)).

    `query` is a raw latent of any shape; it is flattened and normalized.

    Raises:
        ContractError: when the query's style queue or the clean pool is empty.
    """
    positives = bank.entries(style_id)
    if positives.shape[0] == 0:
        raise ContractError(f"queue of style {style_id} is empty, warm it up before computing the loss")
    q = normalize_latent(query)
    clean = _clean_logit(q, bank, tau, generator)
    pos_logits = positives @ q / tau
    all_logits = torch.cat([bank.all_entries() @ q / tau, clean])
    return torch.logsumexp(all_logits, dim=0) - torch.logsumexp(pos_logits, dim=0)


def generator_alignment_loss(
    z_g: torch.Tensor,
    bank: LatentQueueBank,
    generator: torch.Generator,
    tau: float = DEFAULT_TAU,
) -> torch.Tensor:
    """Contrastive loss of a generated latent against every stored latent.

    The union of all style queues is the positive set and the clean-scene
    latent is the only negative.
    """
    positives = bank.all_entries()
    if positives.shape[0] == 0:
        raise ContractError("every queue is empty, warm up the bank before aligning the generator")
    q = normalize_latent(z_g)
    clean = _clean_logit(q, bank, tau, generator)
    pos_logits = positives @ q / tau
    return torch.logsumexp(torch.cat([pos_logits, clean]), dim=0) - torch.logsumexp(pos_logits, dim=0)
