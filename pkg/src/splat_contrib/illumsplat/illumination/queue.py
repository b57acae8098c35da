from __future__ import annotations

import collections
from typing import Deque

import torch

from ..errors import ContractError
from ..numerics import DTYPE


class LatentQueueBank:
    """Per-style FIFO queues of unit-norm latents plus a clean-scene reservoir.

    New entries go to the front of their queue; a full queue drops its
    oldest entry. Every stored tensor is a detached copy. The norm of each
    latent is kept next to it so a queue mean can be turned back into a
    latent at its original scale.
    """

    def __init__(self, styles: int, capacity: int = 64, dim: int = 0, pool_capacity: int | None = None) -> None:
        if styles < 1:
            raise ContractError(f"a bank needs at least one style, got {styles}")
        if capacity < 1:
            raise ContractError(f"queue capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.dim = dim
        self.queues: list[Deque[torch.Tensor]] = [collections.deque(maxlen=capacity) for _ in range(styles)]
        self.norms: list[Deque[float]] = [collections.deque(maxlen=capacity) for _ in range(styles)]
        self.pool_capacity = capacity if pool_capacity is None else pool_capacity
        self.clean_pool: list[torch.Tensor] = []
        self.clean_seen = 0

    @property
    def styles(self) -> int:
        return len(self.queues)

    def _check_style(self, style_id: int) -> None:
        if not 0 <= style_id < self.styles:
            raise ContractError(f"unknown style {style_id}, bank holds styles 0..{self.styles - 1}")

    def _check_dim(self, z_norm: torch.Tensor) -> torch.Tensor:
        flat = z_norm.detach().reshape(-1).to(DTYPE).clone()
        if self.dim == 0:
            self.dim = flat.numel()
        elif flat.numel() != self.dim:
            raise ContractError(f"latent has {flat.numel()} values, bank stores {self.dim}")
        return flat

    def push(self, style_id: int, z_norm: torch.Tensor, norm: float = 1.0) -> None:
        self._check_style(style_id)
        self.queues[style_id].appendleft(self._check_dim(z_norm))
        self.norms[style_id].appendleft(float(norm))

    def add_clean(self, z_norm: torch.Tensor, generator: torch.Generator) -> None:
        """Reservoir-sample a clean-scene latent into the pool."""
        flat = self._check_dim(z_norm)
        self.clean_seen += 1
        if len(self.clean_pool) < self.pool_capacity:
            self.clean_pool.append(flat)
            return
        slot = int(torch.randint(self.clean_seen, (1,), generator=generator))
        if slot < self.pool_capacity:
            self.clean_pool[slot] = flat

    def sample_clean(self, generator: torch.Generator) -> torch.Tensor:
        if not self.clean_pool:
            raise ContractError("clean-scene pool is empty")
        index = int(torch.randint(len(self.clean_pool), (1,), generator=generator))
        return self.clean_pool[index]

    def entries(self, style_id: int) -> torch.Tensor:
        """(n, D) stack of the entries of one style, newest first."""
        self._check_style(style_id)
        queue = self.queues[style_id]
        if not queue:
            return torch.zeros((0, self.dim), dtype=DTYPE)
        return torch.stack(list(queue))

    def all_entries(self) -> torch.Tensor:
        stacks = [self.entries(style) for style in range(self.styles)]
        return torch.cat(stacks, dim=0)

    def fill(self) -> list[int]:
        return [len(queue) for queue in self.queues]

    def is_warm(self, style_id: int | None = None) -> bool:
        """True when the pool and the style's queue (or any queue) have entries."""
        if not self.clean_pool:
            return False
        if style_id is None:
            return any(self.queues)
        self._check_style(style_id)
        return bool(self.queues[style_id])

    def mean_latent(self, style_id: int) -> torch.Tensor:
        """Mean of the stored latents of one style, at their stored scale, flattened."""
        self._check_style(style_id)
        if not self.queues[style_id]:
            raise ContractError(f"queue of style {style_id} is empty")
        scaled = [entry * norm for entry, norm in zip(self.queues[style_id], self.norms[style_id])]
        return torch.stack(scaled).mean(dim=0)

    def state_tensors(self) -> dict[str, torch.Tensor]:
        """Flat named tensors for checkpointing."""
        result: dict[str, torch.Tensor] = {
            "bank.meta": torch.tensor([self.styles, self.capacity, self.dim, self.pool_capacity, self.clean_seen], dtype=DTYPE),
        }
        for style in range(self.styles):
            result[f"bank.queue.{style}"] = self.entries(style)
            result[f"bank.norms.{style}"] = torch.tensor(list(self.norms[style]), dtype=DTYPE)
        result["bank.clean"] = torch.stack(self.clean_pool) if self.clean_pool else torch.zeros((0, self.dim), dtype=DTYPE)
        return result

    @classmethod
    def from_state_tensors(cls, tensors: dict[str, torch.Tensor]) -> LatentQueueBank:
        styles, capacity, dim, pool_capacity, clean_seen = (int(v) for v in tensors["bank.meta"].tolist())
        bank = cls(styles, capacity, dim, pool_capacity)
        bank.clean_seen = clean_seen
        for style in range(styles):
            entries = tensors[f"bank.queue.{style}"]
            norms = tensors[f"bank.norms.{style}"].tolist()
            bank.queues[style].extend(entries[i].clone() for i in range(entries.shape[0]))
            bank.norms[style].extend(float(n) for n in norms)
        clean = tensors["bank.clean"]
        bank.clean_pool = [clean[i].clone() for i in range(clean.shape[0])]
        return bank


def queue_push(bank: LatentQueueBank, style_id: int, z_norm: torch.Tensor, norm: float = 1.0) -> LatentQueueBank:
    bank.push(style_id, z_norm, norm)
    return bank
