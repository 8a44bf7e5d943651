"""Deterministic RNG streams.

Every source of randomness in a run is a counter-based Philox generator keyed
by (global seed, domain, index), so results never depend on scheduling order
and each agent can be replayed in isolation.
"""

from __future__ import annotations

import numpy as np

_INIT_DOMAIN = 0
_AGENT_DOMAIN = 1
_NOISE_DOMAIN = 2
_DATA_DOMAIN = 3


def _stream(seed: int, domain: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(domain, index))
    return np.random.Generator(np.random.Philox(ss))


def init_stream(seed: int) -> np.random.Generator:
    """Stream used to draw the shared initial point of a run."""
    return _stream(seed, _INIT_DOMAIN, 0)


def agent_stream(seed: int, agent_id: int) -> np.random.Generator:
    """Component-sampling stream owned by one agent."""
    return _stream(seed, _AGENT_DOMAIN, agent_id)


def noise_stream(seed: int, agent_id: int) -> np.random.Generator:
    """Additive-noise stream for one agent, independent of its sampling stream."""
    return _stream(seed, _NOISE_DOMAIN, agent_id)


def data_stream(seed: int) -> np.random.Generator:
    """Stream for synthetic dataset generation."""
    return _stream(seed, _DATA_DOMAIN, 0)
