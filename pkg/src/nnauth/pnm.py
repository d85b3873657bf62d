"""Binary PGM (P5) / PPM (P6) reading and writing, 8-bit only."""

from __future__ import annotations

import numpy as np


class PNMError(ValueError):
    pass


def _tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PNMError("truncated PNM header")
        out.append(data[start:pos])
    return out, pos


def decode_pnm(data: bytes) -> np.ndarray:
    """Parse P5/P6 bytes into ``(H, W)`` or ``(H, W, 3)`` uint8."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise PNMError(f"not a binary PGM/PPM file (magic {magic!r})")
    try:
        (w, h, maxval), pos = _tokens(data, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PNMError(f"bad PNM header: {exc}") from None
    if maxval != 255:
        raise PNMError(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise PNMError("image dimensions must be positive")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PNMError("missing whitespace after PNM header")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    size = width * height * channels
    if len(data) - pos < size:
        raise PNMError("truncated PNM raster")
    pixels = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return pixels.reshape(shape).copy()


def encode_pnm(image: np.ndarray) -> bytes:
    img = np.asarray(image)
    if img.dtype != np.uint8:
        raise PNMError(f"expected uint8 samples, got {img.dtype}")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise PNMError(f"cannot write image of shape {img.shape} as PNM")
    height, width = img.shape[:2]
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    return header + np.ascontiguousarray(img).tobytes()


def read_pnm(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pnm(f.read())


def write_pnm(image: np.ndarray, path) -> None:
    data = encode_pnm(image)
    with open(path, "wb") as f:
        f.write(data)
