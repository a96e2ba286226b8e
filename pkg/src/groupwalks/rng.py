"""Counter-based random number streams for reproducible parallel sampling.

Every Monte Carlo sample owns a Philox stream keyed by (master_seed, sample
index).  Philox is counter-based, so the i-th draw of a stream is independent
of scheduling and platform, and distinct sample indices never share state.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def sample_stream(master_seed: int, index: int) -> np.random.Generator:
    """Return the dedicated generator for one sample of one experiment."""
    key = np.array([master_seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def seed_tag(master_seed: int, index: int) -> str:
    """Human-readable provenance tag stored with each trajectory."""
    return f"philox:{master_seed & _MASK64}:{index}"
