"""Image-level signing, verification, tamper maps and distortion models.

Images are numpy ``uint8`` arrays of shape ``(H, W)`` (gray) or
``(H, W, 3)`` (RGB). Blocks are ``B x B`` tiles of a single channel, indexed
channel-major and then in raster order; the right/bottom strips that do not
fill a whole block are left unauthenticated.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import PIL
from PIL import Image, features

from . import authcore, pnm, prng
from .sidecar import Descriptor

CHANNEL_MODES = ("per-channel", "luma")


class GeometryError(ValueError):
    """Image and descriptor (or code bitmap) do not line up."""


class KeyMismatchError(ValueError):
    """The key fingerprint does not match the descriptor."""


@dataclass(frozen=True)
class BlockGrid:
    block_size: int
    rows: int
    cols: int
    width: int
    height: int

    @property
    def covered_width(self) -> int:
        return self.cols * self.block_size

    @property
    def covered_height(self) -> int:
        return self.rows * self.block_size

    @property
    def n_blocks(self) -> int:
        return self.rows * self.cols

    @property
    def uncovered(self) -> tuple[int, int]:
        """Width of the right strip and height of the bottom strip left out."""
        return self.width - self.covered_width, self.height - self.covered_height


def as_channels(image) -> np.ndarray:
    """View an image as ``(H, W, C)`` uint8 with C in {1, 3}."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        raise ValueError(f"image samples must be uint8, got {img.dtype}")
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"unsupported image shape {np.shape(image)}")
    return img


def make_grid(width: int, height: int, B: int) -> BlockGrid:
    if int(B) != B or B < 2:
        raise ValueError(f"block size must be an integer >= 2, got {B}")
    if width < B or height < B:
        raise ValueError(f"{width}x{height} image is smaller than one {B}x{B} block")
    return BlockGrid(int(B), height // B, width // B, width, height)


def to_luma(image: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded to uint8, as ``(H, W, 1)``."""
    img = as_channels(image)
    if img.shape[2] == 1:
        return img
    y = img.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)[:, :, None]


def _planes(image, mode: str) -> np.ndarray:
    if mode not in CHANNEL_MODES:
        raise ValueError(f"channel mode must be one of {CHANNEL_MODES}, got {mode!r}")
    return to_luma(image) if mode == "luma" else as_channels(image)


def block_matrix(image, B: int) -> tuple[BlockGrid, np.ndarray]:
    """Cut an image into blocks; returns the grid and ``(C, rows*cols, B*B)``."""
    img = as_channels(image)
    h, w, c = img.shape
    grid = make_grid(w, h, B)
    tiles = img[:grid.covered_height, :grid.covered_width]
    tiles = tiles.reshape(grid.rows, B, grid.cols, B, c).transpose(4, 0, 2, 1, 3)
    return grid, tiles.reshape(c, grid.n_blocks, B * B)


def partition(image, B: int) -> tuple[BlockGrid, Iterator[tuple[int, int, np.ndarray]]]:
    """Grid plus an iterator of ``(channel, block_index, pixels)``."""
    grid, blocks = block_matrix(image, B)

    def it():
        for c in range(blocks.shape[0]):
            for i in range(grid.n_blocks):
                yield c, i, blocks[c, i]
    return grid, it()


def _weights(key: int, channel: int, n_blocks: int, rep: int, n: int) -> np.ndarray:
    seeds = prng.block_seeds(key, channel, np.arange(n_blocks), rep)
    return prng.weights_array(seeds, n)


def default_code(key: int, channels: int, grid: BlockGrid) -> np.ndarray:
    idx = np.arange(grid.n_blocks)
    return np.stack([prng.code_bits_array(key, c, idx) for c in range(channels)]
                    ).reshape(channels, grid.rows, grid.cols)


def sign_image(image, key, B: int = 8, T: float = authcore.DEFAULT_MARGIN,
               R: int = 1, code=None, mode: str = "per-channel") -> Descriptor:
    """Compute the descriptor for ``image``; the image is not modified.

    ``code`` optionally overrides the key-derived code bits and must have
    ``channels_effective * rows * cols`` entries (any shape, raster order).
    """
    key = prng.parse_key(key)
    T = authcore.check_margin(T)
    R = authcore.check_reps(R)
    src = as_channels(image)
    planes = _planes(src, mode)
    grid, blocks = block_matrix(planes, B)
    nch = planes.shape[2]

    if code is None:
        bits = default_code(key, nch, grid)
    else:
        bits = np.asarray(code).astype(np.uint8)
        if bits.size != nch * grid.n_blocks:
            raise GeometryError(
                f"code bitmap has {bits.size} bits, image needs "
                f"{nch} x {grid.rows} x {grid.cols} = {nch * grid.n_blocks}")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("code bitmap must hold only 0/1 values")
        bits = bits.reshape(nch, grid.rows, grid.cols)

    n = B * B
    biases = np.empty((nch, grid.n_blocks, R))
    for c in range(nch):
        p = authcore.normalize_blocks(blocks[c])
        s = bits[c].ravel()
        for r in range(R):
            w = _weights(key, c, grid.n_blocks, r, n)
            biases[c, :, r] = authcore.biases_for(p, w, s, T)

    return Descriptor(
        width=src.shape[1], height=src.shape[0], channels=src.shape[2],
        block_size=int(B), margin=T, reps=R, mode=mode,
        fingerprint=prng.key_fingerprint(key),
        code_bits=bits.ravel().copy(), biases=biases.ravel(),
    )


@dataclass
class VerificationReport:
    grid: BlockGrid
    bits: np.ndarray = field(repr=False)    # (C, rows, cols, R) extracted
    code: np.ndarray = field(repr=False)    # (C, rows, cols) expected
    match: np.ndarray = field(repr=False)   # (C, rows, cols) bool
    cdr: float
    params: dict

    @property
    def tamper_mask(self) -> np.ndarray:
        return ~self.match

    @property
    def total_bits(self) -> int:
        return int(self.bits.size)

    @property
    def mismatch_fraction(self) -> float:
        return 1.0 - self.cdr

    @property
    def flagged_blocks(self) -> int:
        return int(self.tamper_mask.sum())


def verify_image(image, descriptor: Descriptor, key, check_fingerprint: bool = True,
                 vote: str = "any") -> VerificationReport:
    key = prng.parse_key(key)
    src = as_channels(image)
    d = descriptor
    if (src.shape[1], src.shape[0], src.shape[2]) != (d.width, d.height, d.channels):
        raise GeometryError(
            f"image is {src.shape[1]}x{src.shape[0]}x{src.shape[2]}, descriptor "
            f"expects {d.width}x{d.height}x{d.channels}")
    if check_fingerprint and prng.key_fingerprint(key) != d.fingerprint:
        raise KeyMismatchError("key fingerprint does not match the descriptor (wrong key?)")

    planes = _planes(src, d.mode)
    grid, blocks = block_matrix(planes, d.block_size)
    nch = planes.shape[2]
    code = d.code_grid()
    biases = d.bias_grid()
    n = d.block_size ** 2

    bits = np.empty((nch, grid.n_blocks, d.reps), dtype=np.uint8)
    for c in range(nch):
        p = authcore.normalize_blocks(blocks[c])
        for r in range(d.reps):
            w = _weights(key, c, grid.n_blocks, r, n)
            bits[c, :, r] = authcore.extract_bits(p, w, biases[c, :, r])
    bits = bits.reshape(nch, grid.rows, grid.cols, d.reps)

    agree = bits == code[..., None]
    match = authcore.aggregate_match(agree, vote, axis=-1)
    return VerificationReport(
        grid=grid, bits=bits, code=code, match=match,
        cdr=float(agree.mean()),
        params={"B": d.block_size, "T": d.margin, "R": d.reps, "mode": d.mode,
                "fingerprint": d.fingerprint.hex(), "vote": vote},
    )


def render_tamper_map(report: VerificationReport) -> np.ndarray:
    """Block-resolution map over the covered area: 0 where any channel failed."""
    g = report.grid
    bad = report.tamper_mask.any(axis=0)
    cells = np.where(bad, 0, 255).astype(np.uint8)
    return np.kron(cells, np.ones((g.block_size, g.block_size), dtype=np.uint8))


# -- distortions ------------------------------------------------------------

def gaussian_deviates(seed: int, count: int) -> np.ndarray:
    """Standard normals from the SplitMix64 stream at ``seed`` (Box-Muller).

    Draw ``2k`` and ``2k+1`` give uniforms ``u1, u2``; deviate ``k`` is
    ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.
    """
    values = prng.stream_values(np.array([seed & prng.MASK64], dtype=np.uint64), 2 * count)[0]
    u = prng.to_unit(values)
    u1, u2 = u[0::2], u[1::2]
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def add_gaussian_noise(image, variance: float, noise_seed: int) -> np.ndarray:
    """Additive Gaussian noise with ``variance`` on the [0, 1] intensity scale."""
    if not variance >= 0:
        raise ValueError(f"noise variance must be >= 0, got {variance}")
    img = np.asarray(image)
    as_channels(img)
    if variance == 0:
        return img.copy()
    g = gaussian_deviates(noise_seed, img.size).reshape(img.shape)
    out = img.astype(np.float64) + 255.0 * np.sqrt(variance) * g
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def jpeg_roundtrip(image, quality: int) -> np.ndarray:
    """Baseline JPEG encode at ``quality`` then decode, via Pillow."""
    if int(quality) != quality or not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must be an integer in [1, 100], got {quality}")
    img = np.asarray(image)
    chan = as_channels(img)
    mode = "L" if chan.shape[2] == 1 else "RGB"
    buf = io.BytesIO()
    try:
        Image.fromarray(chan[:, :, 0] if mode == "L" else chan, mode).save(
            buf, "JPEG", quality=int(quality), optimize=False, progressive=False)
        buf.seek(0)
        out = np.asarray(Image.open(buf).convert(mode))
    except (OSError, ValueError) as exc:
        raise RuntimeError(f"JPEG codec failed: {exc}") from exc
    return out.reshape(img.shape)


def jpeg_codec_name() -> str:
    turbo = features.version("libjpeg_turbo")
    lib = f"libjpeg-turbo {turbo}" if turbo else f"libjpeg {features.version('jpg')}"
    return f"Pillow {PIL.__version__} / {lib}"


# -- file I/O ---------------------------------------------------------------

def read_image(path) -> np.ndarray:
    """Load PGM/PPM natively, anything else through Pillow (gray or RGB)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] in (b"P5", b"P6"):
        return pnm.decode_pnm(data)
    with Image.open(io.BytesIO(data)) as im:
        if im.mode in ("1", "L", "LA", "I", "I;16", "F"):
            return np.asarray(im.convert("L"))
        return np.asarray(im.convert("RGB"))


def write_image(image, path) -> None:
    """Write PGM/PPM for ``.pgm``/``.ppm``/``.pnm``, otherwise via Pillow."""
    ext = os.path.splitext(str(path))[1].lower()
    img = np.asarray(image)
    if ext in (".pgm", ".ppm", ".pnm"):
        pnm.write_pnm(img, path)
    else:
        chan = as_channels(img)
        Image.fromarray(chan[:, :, 0] if chan.shape[2] == 1 else chan).save(path)
