"""Counter-based random streams, one per (master seed, trial, channel).

Each stream is a Philox generator keyed by the master seed whose 256-bit
counter starts at ``trial << 192 | channel << 128``. Draws advance the low
128 bits, so streams never overlap in practice and the order in which one
channel is consumed cannot affect another.
"""
from __future__ import annotations

import enum

import numpy as np

_MASK64 = (1 << 64) - 1


class Channel(enum.IntEnum):
    INITIAL = 0
    PROCESS = 1
    MEASUREMENT = 2
    PERTURBATION = 3


def stream(master_seed: int, trial_index: int, channel: Channel) -> np.random.Generator:
    if master_seed < 0 or trial_index < 0:
        raise ValueError("seed and trial index must be nonnegative")
    counter = ((trial_index & _MASK64) << 192) | (int(channel) << 128)
    return np.random.Generator(np.random.Philox(key=master_seed & ((1 << 128) - 1), counter=counter))


def trial_streams(master_seed: int, trial_index: int) -> dict:
    return {ch: stream(master_seed, trial_index, ch) for ch in Channel}
