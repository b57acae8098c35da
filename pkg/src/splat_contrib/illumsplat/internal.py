"""Small helpers shared by the other modules.

Nothing here is part of the public API.
"""

from __future__ import annotations

import contextlib
import hashlib
import time
from typing import Iterator

import numpy as np
import torch


def derive_seed(*parts: int) -> int:
    """Derive a 63-bit seed from a tuple of non-negative integers.

    The same parts always give the same seed, and different parts give
    statistically independent streams.
    """
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def make_generator(*parts: int) -> torch.Generator:
    """Create a CPU torch generator seeded from `derive_seed(*parts)`."""
    generator = torch.Generator()
    generator.manual_seed(derive_seed(*parts))
    return generator


@contextlib.contextmanager
def seeded(*parts: int) -> Iterator[None]:
    """Run a block with the global torch RNG seeded, restoring it afterwards.

    Used around `torch.nn` module construction, whose initialisers draw from
    the global generator.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(*parts))
        yield


def tensor_digest(*tensors: torch.Tensor) -> str:
    """Hex sha256 of the raw float64 bytes of the given tensors."""
    digest = hashlib.sha256()
    for tensor in tensors:
        array = tensor.detach().to(torch.float64).contiguous().cpu().numpy()
        digest.update(array.astype("<f8").tobytes())
    return digest.hexdigest()


class Timer:
    __slots__ = "_start"

    def __init__(self) -> None:
        self._start = time.perf_counter_ns()

    def elapsed_seconds(self) -> float:
        return (time.perf_counter_ns() - self._start) / 1e9
