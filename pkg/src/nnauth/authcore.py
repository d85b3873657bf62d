"""Single-neuron block authentication.

A block of ``n`` pixels is normalised to ``p`` in [-1, 1] (mean removed,
divided by the peak deviation). With keyed weights ``w`` in [0, 1) and a code
bit ``s``, the stored bias is chosen so the neuron's pre-activation sits at
exactly ``+T`` (``s == 1``) or ``-T`` (``s == 0``)::

    b = (+T if s else -T) - sum(w * p)

Verification recomputes ``sum(w * p') + b`` on the received block and
thresholds it (``> 0`` gives 1, ``<= 0`` gives 0). Any change whose weighted
sum stays inside the margin leaves the bit intact.

The scalar functions mirror the batched ``*_blocks`` helpers, which the image
pipeline uses; both go through :func:`activations` so they agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import prng

MAX_MARGIN = 0.5
DEFAULT_MARGIN = 0.2


def check_margin(T: float) -> float:
    T = float(T)
    if not 0.0 <= T <= MAX_MARGIN:
        raise ValueError(f"margin T must lie in [0, {MAX_MARGIN}], got {T}")
    return T


def check_reps(R: int) -> int:
    if int(R) != R or R < 1:
        raise ValueError(f"repetitions must be an integer >= 1, got {R}")
    return int(R)


@dataclass(frozen=True)
class BlockSecret:
    biases: tuple[float, ...]
    code_bit: int

    def __post_init__(self):
        if len(self.biases) < 1:
            raise ValueError("a block secret needs at least one bias")
        if self.code_bit not in (0, 1):
            raise ValueError(f"code bit must be 0 or 1, got {self.code_bit}")
        if not all(np.isfinite(self.biases)):
            raise ValueError("biases must be finite")


class ExtractedBit(NamedTuple):
    s_prime: int
    activation: float


# -- batched core -----------------------------------------------------------

def normalize_blocks(blocks: np.ndarray) -> np.ndarray:
    """Normalise each row of an ``(m, n)`` pixel array; constant rows become 0.

    Integer input is handled exactly: ``(n*x - sum(x)) / max|n*x - sum(x)|``
    is the same ratio as mean-removed over peak deviation, with a single
    rounding per element, so a constant offset never changes the result.
    """
    x = np.asarray(blocks)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError(f"expected a non-empty (m, n) block array, got shape {x.shape}")
    if np.issubdtype(x.dtype, np.integer):
        xi = x.astype(np.int64)
        d = xi * x.shape[1] - xi.sum(axis=1, keepdims=True)
    else:
        x = x.astype(np.float64)
        d = x - x.mean(axis=1, keepdims=True)
    amp = np.abs(d).max(axis=1, keepdims=True)
    safe = np.where(amp > 0, amp, 1.0)
    return np.where(amp > 0, d / safe, 0.0)


def activations(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise ``sum(w * p)`` for matching ``(m, n)`` arrays."""
    if p.shape != w.shape:
        raise ValueError(f"block/weight shape mismatch: {p.shape} vs {w.shape}")
    return np.einsum("ij,ij->i", w, p)


def target_levels(bits: np.ndarray, T: float) -> np.ndarray:
    return np.where(np.asarray(bits) != 0, T, -T)


def biases_for(p: np.ndarray, w: np.ndarray, bits: np.ndarray, T: float) -> np.ndarray:
    return target_levels(bits, T) - activations(p, w)


def extract_bits(p: np.ndarray, w: np.ndarray, biases: np.ndarray) -> np.ndarray:
    return (activations(p, w) + biases > 0).astype(np.uint8)


# -- per-block API ----------------------------------------------------------

def normalize_block(pixels) -> np.ndarray:
    pixels = np.asarray(pixels)
    if pixels.size == 0:
        raise ValueError("cannot normalise an empty block")
    if pixels.min() < 0 or pixels.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    return normalize_blocks(pixels.reshape(1, -1))[0]


def _row(v, name) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector")
    return v.reshape(1, -1)


def compute_bias(block, w, s: int, T: float) -> float:
    p, w = _row(block, "block"), _row(w, "weights")
    if p.shape != w.shape:
        raise ValueError(f"length mismatch: {p.shape[1]} pixels vs {w.shape[1]} weights")
    if s not in (0, 1):
        raise ValueError(f"code bit must be 0 or 1, got {s}")
    T = check_margin(T)
    return float(biases_for(p, w, np.array([s]), T)[0])


def extract_bit(block, w, b: float) -> ExtractedBit:
    p, w = _row(block, "block"), _row(w, "weights")
    if p.shape != w.shape:
        raise ValueError(f"length mismatch: {p.shape[1]} pixels vs {w.shape[1]} weights")
    act = float(activations(p, w)[0] + b)
    return ExtractedBit(int(act > 0), act)


def block_weights(key: int, channel: int, block_index: int, R: int, n: int) -> np.ndarray:
    """Weights for every repetition of one block, shape ``(R, n)``."""
    return np.stack([
        prng.gen_weights(prng.derive_block_seed(key, channel, block_index, r), n)
        for r in range(R)
    ])


def sign_block(pixels, key: int, channel: int, block_index: int, s: int,
               T: float = DEFAULT_MARGIN, R: int = 1) -> BlockSecret:
    R = check_reps(R)
    p = normalize_block(pixels)
    w = block_weights(key, channel, block_index, R, p.size)
    biases = biases_for(np.broadcast_to(p, w.shape), w, np.full(R, s), check_margin(T))
    return BlockSecret(tuple(float(b) for b in biases), int(s))


def verify_block(pixels, key: int, channel: int, block_index: int,
                 secret: BlockSecret, R: int | None = None,
                 vote: str = "any") -> tuple[np.ndarray, bool]:
    """Recompute the block's bits; returns ``(bits per repetition, match)``.

    With ``vote="any"`` a single disagreeing repetition flags the block;
    ``vote="majority"`` accepts when more than half the repetitions agree.
    """
    if R is None:
        R = len(secret.biases)
    if check_reps(R) != len(secret.biases):
        raise ValueError(f"secret holds {len(secret.biases)} biases, expected {R}")
    p = normalize_block(pixels)
    w = block_weights(key, channel, block_index, R, p.size)
    bits = extract_bits(np.broadcast_to(p, w.shape), w, np.asarray(secret.biases))
    return bits, bool(aggregate_match(bits == secret.code_bit, vote, axis=0))


def aggregate_match(agree: np.ndarray, vote: str, axis: int = -1):
    if vote == "any":
        return np.all(agree, axis=axis)
    if vote == "majority":
        return np.sum(agree, axis=axis) * 2 > agree.shape[axis]
    raise ValueError(f"unknown vote rule {vote!r}; use 'any' or 'majority'")
