"""Keyed SplitMix64 streams for block weights and default code bits.

Everything here is a pure function of its arguments. Scalar helpers work on
Python ints; the ``*_array`` variants are numpy-vectorised equivalents used on
the hot path (uint64 arithmetic wraps modulo 2**64, which is what we want).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

CODE_TAG = 0xC0DEC0DEC0DEC0DE
FP_TAG = 0xF1A6F1A6F1A6F1A6

_INV_2_53 = 1.0 / (1 << 53)


def finalize(z: int) -> int:
    """SplitMix64 output mixer applied to a single 64-bit word."""
    z &= MASK64
    z ^= z >> 30
    z = (z * MIX1) & MASK64
    z ^= z >> 27
    z = (z * MIX2) & MASK64
    z ^= z >> 31
    return z


def sm_next(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; returns ``(new_state, value)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    return state, finalize(state)


def parse_key(key: int | str) -> int:
    """Accept a 64-bit key as int or hex string (``0x`` prefix optional)."""
    if isinstance(key, str):
        text = key.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if not text or len(text) > 16:
            raise ValueError(f"key must be 1-16 hex digits, got {key!r}")
        try:
            key = int(text, 16)
        except ValueError:
            raise ValueError(f"key is not valid hex: {key!r}") from None
    if isinstance(key, bool) or not isinstance(key, (int, np.integer)):
        raise TypeError(f"key must be an int or hex string, not {type(key).__name__}")
    key = int(key)
    if not 0 <= key <= MASK64:
        raise ValueError("key must fit in 64 unsigned bits")
    return key


def derive_block_seed(key: int, channel: int, block_index: int, repetition: int) -> int:
    z = finalize(key)
    z = finalize(z ^ channel)
    z = finalize(z ^ block_index)
    return finalize(z ^ repetition)


def gen_weights(seed: int, n: int) -> np.ndarray:
    """Return ``n`` weights in [0, 1) from the stream starting at ``seed``."""
    if n < 1:
        raise ValueError(f"weight count must be >= 1, got {n}")
    return weights_array(np.array([seed], dtype=np.uint64), n)[0]


def gen_code_bit(key: int, channel: int, block_index: int) -> int:
    z = finalize(key ^ CODE_TAG)
    z = finalize(z ^ channel)
    z = finalize(z ^ block_index)
    return z >> 63


def key_fingerprint(key: int) -> bytes:
    return finalize(key ^ FP_TAG).to_bytes(8, "little")


# -- vectorised forms -------------------------------------------------------

def finalize_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= np.uint64(MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(MIX2)
        z ^= z >> np.uint64(31)
    return z


def block_seeds(key: int, channel: int, blocks: np.ndarray, repetition: int) -> np.ndarray:
    """`derive_block_seed` over an array of block indices."""
    head = finalize(finalize(key) ^ channel)
    z = np.uint64(head) ^ np.asarray(blocks, dtype=np.uint64)
    z = finalize_array(z)
    return finalize_array(z ^ np.uint64(repetition))


def code_bits_array(key: int, channel: int, blocks: np.ndarray) -> np.ndarray:
    head = finalize(finalize(key ^ CODE_TAG) ^ channel)
    z = finalize_array(np.uint64(head) ^ np.asarray(blocks, dtype=np.uint64))
    return (z >> np.uint64(63)).astype(np.uint8)


def stream_values(seeds: np.ndarray, n: int) -> np.ndarray:
    """First ``n`` SplitMix64 outputs for each seed; shape ``(len(seeds), n)``."""
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1, 1)
    steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
    with np.errstate(over="ignore"):
        states = seeds + steps
    return finalize_array(states)


def to_unit(values: np.ndarray) -> np.ndarray:
    # top 53 bits -> exact double in [0, 1); value / 2**64 could round to 1.0
    return (values >> np.uint64(11)).astype(np.float64) * _INV_2_53


def weights_array(seeds: np.ndarray, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"weight count must be >= 1, got {n}")
    return to_unit(stream_values(seeds, n))
