"""Binary descriptor format (``.nnac``).

The descriptor carries everything a verifier needs besides the key: image
geometry, parameters, the code bits and one float64 bias per
(channel, block, repetition). It is secret material and is stored in plain
text; protecting it in transit is the caller's business.

Layout, all integers little-endian::

    offset size  field
    0      4     magic  b"NNAC"
    4      1     version (1)
    5      1     image channels (1 or 3)
    6      1     channel mode (0 = per-channel, 1 = luma)
    7      1     reserved, must be 0
    8      4     width   (u32)
    12     4     height  (u32)
    16     4     block size B (u32, >= 2)
    20     4     repetitions R (u32, >= 1)
    24     8     margin T (float64, 0 <= T <= 0.5)
    32     8     key fingerprint
    40     8     code bit count (u64)
    48     8     bias count (u64)
    56     ...   code bits, packed MSB-first, zero padded to a whole byte
    ...    8*k   biases (float64), channel -> block raster -> repetition

Nothing may follow the biases.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"NNAC"
VERSION = 1
HEADER = struct.Struct("<4sBBBBIIIId8sQQ")
MODES = ("per-channel", "luma")


class DescriptorError(ValueError):
    """Base class for descriptor encode/decode failures."""


class MalformedHeaderError(DescriptorError):
    pass


class TruncatedPayloadError(DescriptorError):
    pass


class InvariantViolationError(DescriptorError):
    pass


@dataclass(eq=False)
class Descriptor:
    width: int
    height: int
    channels: int
    block_size: int
    margin: float
    reps: int
    mode: str
    fingerprint: bytes
    code_bits: np.ndarray = field(repr=False)
    biases: np.ndarray = field(repr=False)
    version: int = VERSION

    @property
    def rows(self) -> int:
        return self.height // self.block_size

    @property
    def cols(self) -> int:
        return self.width // self.block_size

    @property
    def effective_channels(self) -> int:
        return 1 if self.mode == "luma" else self.channels

    @property
    def n_blocks(self) -> int:
        return self.effective_channels * self.rows * self.cols

    def code_grid(self) -> np.ndarray:
        """Code bits as ``(channels_effective, rows, cols)``."""
        return np.asarray(self.code_bits, dtype=np.uint8).reshape(
            self.effective_channels, self.rows, self.cols)

    def bias_grid(self) -> np.ndarray:
        """Biases as ``(channels_effective, rows * cols, R)``."""
        return np.asarray(self.biases, dtype=np.float64).reshape(
            self.effective_channels, self.rows * self.cols, self.reps)

    def validate(self) -> None:
        bad = InvariantViolationError
        if self.version != VERSION:
            raise bad(f"unsupported version {self.version}")
        if self.channels not in (1, 3):
            raise bad(f"channels must be 1 or 3, got {self.channels}")
        if self.mode not in MODES:
            raise bad(f"unknown channel mode {self.mode!r}")
        if self.block_size < 2:
            raise bad(f"block size must be >= 2, got {self.block_size}")
        if self.reps < 1:
            raise bad(f"repetitions must be >= 1, got {self.reps}")
        if not 0.0 <= self.margin <= 0.5:
            raise bad(f"margin must lie in [0, 0.5], got {self.margin}")
        if self.width >= 1 << 32 or self.height >= 1 << 32:
            raise bad("image dimensions exceed 32 bits")
        if self.rows < 1 or self.cols < 1:
            raise bad("image is smaller than one block")
        if not isinstance(self.fingerprint, bytes) or len(self.fingerprint) != 8:
            raise bad("fingerprint must be 8 bytes")
        bits = np.asarray(self.code_bits)
        if bits.size != self.n_blocks:
            raise bad(f"expected {self.n_blocks} code bits, got {bits.size}")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise bad("code bits must be 0 or 1")
        biases = np.asarray(self.biases, dtype=np.float64)
        if biases.size != self.n_blocks * self.reps:
            raise bad(f"expected {self.n_blocks * self.reps} biases, got {biases.size}")
        if not np.isfinite(biases).all():
            raise bad("biases must be finite")

    def __eq__(self, other):
        if not isinstance(other, Descriptor):
            return NotImplemented
        return encode(self) == encode(other)


def encode(desc: Descriptor) -> bytes:
    desc.validate()
    bits = np.asarray(desc.code_bits, dtype=np.uint8).ravel()
    biases = np.asarray(desc.biases, dtype="<f8").ravel()
    header = HEADER.pack(
        MAGIC, desc.version, desc.channels, MODES.index(desc.mode), 0,
        desc.width, desc.height, desc.block_size, desc.reps, float(desc.margin),
        desc.fingerprint, bits.size, biases.size,
    )
    return header + np.packbits(bits).tobytes() + biases.tobytes()


def decode(data: bytes) -> Descriptor:
    data = bytes(data)
    if len(data) < HEADER.size:
        if data[:len(MAGIC)] != MAGIC[:len(data)]:
            raise MalformedHeaderError("bad magic")
        raise TruncatedPayloadError(f"header needs {HEADER.size} bytes, got {len(data)}")
    (magic, version, channels, mode, reserved, width, height, block_size, reps,
     margin, fingerprint, n_bits, n_biases) = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedHeaderError(f"bad magic {magic!r}")
    if version != VERSION:
        raise MalformedHeaderError(f"unknown format version {version}")
    if mode >= len(MODES) or reserved != 0:
        raise MalformedHeaderError("bad mode or reserved byte")

    code_len = (n_bits + 7) // 8
    # guard against absurd counts before any arithmetic-driven allocation
    if n_bits > len(data) * 8 or n_biases > len(data):
        raise TruncatedPayloadError("declared payload exceeds the input")
    end = HEADER.size + code_len + 8 * n_biases
    if len(data) < end:
        raise TruncatedPayloadError(f"payload needs {end} bytes, got {len(data)}")
    if len(data) > end:
        raise InvariantViolationError(f"{len(data) - end} trailing bytes after payload")

    packed = np.frombuffer(data, dtype=np.uint8, count=code_len, offset=HEADER.size)
    bits = np.unpackbits(packed)
    if bits[n_bits:].any():
        raise InvariantViolationError("non-zero padding bits in code section")
    biases = np.frombuffer(data, dtype="<f8", count=n_biases,
                           offset=HEADER.size + code_len).astype(np.float64)
    desc = Descriptor(
        width=width, height=height, channels=channels, block_size=block_size,
        margin=margin, reps=reps, mode=MODES[mode], fingerprint=fingerprint,
        code_bits=bits[:n_bits].copy(), biases=biases, version=version,
    )
    desc.validate()
    return desc


def save(desc: Descriptor, path) -> None:
    with open(path, "wb") as f:
        f.write(encode(desc))


def load(path) -> Descriptor:
    with open(path, "rb") as f:
        return decode(f.read())
