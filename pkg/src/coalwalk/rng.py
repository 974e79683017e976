"""Counter-based random streams keyed by (seed, trial, step, slot).

Each draw is a stateless hash of its coordinates, so a trial's randomness
does not depend on how trials are batched or which worker runs them.  The
mixer is the SplitMix64 finaliser applied in a chain over the coordinates.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_MASK32 = np.uint64(0xFFFFFFFF)

# Stream tags keep draws for different purposes independent.
TAG_MOVE = 1
TAG_AVOID = 2


def mix64(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def trial_keys(seed: int, trials: np.ndarray) -> np.ndarray:
    """Per-trial 64-bit keys derived from the master seed and trial index."""
    s = mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    with np.errstate(over="ignore"):
        return mix64(s ^ mix64(np.asarray(trials, dtype=np.uint64)))


def step_keys(keys: np.ndarray, step: int, tag: int) -> np.ndarray:
    code = np.array([(step << 8) | tag], dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys ^ mix64(code))


def draws(step_key: np.ndarray, slots: np.ndarray) -> np.ndarray:
    """``(len(step_key), len(slots))`` array of uniform 64-bit words."""
    with np.errstate(over="ignore"):
        return mix64(step_key[:, None] ^ (np.asarray(slots, dtype=np.uint64)[None, :] * _GOLDEN))


def bounded(words: np.ndarray, bound: np.ndarray) -> np.ndarray:
    """Map words to ``[0, bound)`` with the multiply-shift reduction on 32 high bits."""
    hi = words >> _S32
    with np.errstate(over="ignore"):
        return ((hi * np.asarray(bound, dtype=np.uint64)) >> _S32).astype(np.int64)


def coin(words: np.ndarray) -> np.ndarray:
    """Fair coin from the low bit."""
    return (words & np.uint64(1)).astype(bool)
