"""Shared helpers for the test suite (imported as `from conftest import ...`)."""

import numpy as np

from refold import reshape as rs
from refold.reshape import ModelConfig


def random_model_config(rng, max_stages=6, max_c0=4, with_heads=True):
    """A random valid config: random stride pattern, divisible F0."""
    n = int(rng.integers(1, max_stages + 1))
    pattern = [tuple(rng.choice([(1, 1), (2, 1), (1, 2)])) for _ in range(n)]
    n_f = sum(1 for sf, _ in pattern if sf == 2)
    f0 = int(2 ** n_f * rng.integers(1, 4))
    c0 = int(rng.integers(1, max_c0 + 1))
    n2d = [int(rng.integers(1, 3)) for _ in range(n)]
    n1d = [int(rng.integers(0, 3)) for _ in range(n)]
    heads = 1
    if with_heads:
        width = c0 * f0
        for h in (4, 2, 1):
            if width % h == 0:
                heads = h
                break
    stages = rs.standard_stages(tuple(pattern), n_blocks_2d=n2d, n_blocks_1d=n1d)
    return ModelConfig(c0=c0, f0=f0, stages=stages, heads=heads,
                       embed_dim=int(rng.integers(4, 33)), kernel_1d=3)
