"""Robustness sweeps: correct detection rate under noise and JPEG.

A sweep signs the clean image once per (B, T) cell, distorts it once per
(level, trial) and verifies every combination. Noise trials use seeds
``base_seed + trial``; JPEG is deterministic, so its trials instead vary the
key (``key + trial``) to average over weight draws. The same distorted image
is reused across cells so trends in B and T compare like with like.

CSV columns, in order::

    row_type,distortion,B,T,R,level,trial,cdr,mean_cdr,std_cdr,blocks,granularity_px

``row_type`` is ``trial`` for per-trial rows (``mean_cdr``/``std_cdr`` empty)
and ``aggregate`` for one row per cell (``trial``/``cdr`` empty). ``std_cdr``
is the sample standard deviation (0 for a single trial). ``blocks`` is the
number of authenticated blocks per image and ``granularity_px`` the side of
the smallest localisable region.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import imagepipe, pnm, prng

DEFAULT_BLOCK_SIZES = (4, 8, 16, 32)
DEFAULT_MARGINS = tuple(round(0.05 * k, 10) for k in range(7))
DEFAULT_VARIANCES = (0.001, 0.0025, 0.005, 0.0075, 0.01, 0.02)
DEFAULT_QUALITIES = tuple(range(100, 30, -10))
WEAK_BITS = 64

COLUMNS = ("row_type", "distortion", "B", "T", "R", "level", "trial", "cdr",
           "mean_cdr", "std_cdr", "blocks", "granularity_px")


def cdr(original, extracted) -> float:
    """Fraction of positions where two bit vectors agree."""
    a = np.asarray(original).ravel()
    b = np.asarray(extracted).ravel()
    if a.size != b.size:
        raise ValueError(f"bit vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("cannot score empty bit vectors")
    return float(np.mean(a == b))


@dataclass
class SweepSpec:
    image: np.ndarray
    kind: str = "gaussian"
    block_sizes: tuple = DEFAULT_BLOCK_SIZES
    margins: tuple = DEFAULT_MARGINS
    levels: tuple | None = None
    trials: int = 10
    base_seed: int = 0
    reps: int = 1
    key: int = 0x0123456789ABCDEF
    mode: str = "per-channel"
    workers: int = 1
    map_dir: str | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "jpeg"):
            raise ValueError(f"distortion kind must be 'gaussian' or 'jpeg', got {self.kind!r}")
        if self.levels is None:
            self.levels = DEFAULT_VARIANCES if self.kind == "gaussian" else DEFAULT_QUALITIES
        for name in ("block_sizes", "margins", "levels"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must not be empty")
            setattr(self, name, values)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        self.key = prng.parse_key(self.key)


@dataclass(frozen=True)
class TrialRow:
    B: int
    T: float
    level: float
    trial: int
    cdr: float


class CellStats(NamedTuple):
    mean: float
    std: float
    n: int


@dataclass
class SweepResult:
    kind: str
    reps: int
    rows: list = field(default_factory=list)
    shape: tuple = ()

    def cells(self) -> dict:
        """``{(B, T, level): CellStats}`` in sweep order."""
        groups: dict = {}
        for row in self.rows:
            groups.setdefault((row.B, row.T, row.level), []).append(row.cdr)
        out = {}
        for cell, values in groups.items():
            v = np.asarray(values)
            std = float(v.std(ddof=1)) if v.size > 1 else 0.0
            out[cell] = CellStats(float(v.mean()), std, v.size)
        return out

    def mean(self, B, T, level) -> float:
        return self.cells()[(B, T, level)].mean

    def to_csv(self) -> str:
        h, w = self.shape
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(COLUMNS)
        cells = self.cells()
        for (B, T, level), stats in cells.items():
            blocks = (h // B) * (w // B)
            for row in self.rows:
                if (row.B, row.T, row.level) == (B, T, level):
                    out.writerow(["trial", self.kind, B, _fmt(T), self.reps, _fmt(level),
                                  row.trial, _fmt(row.cdr), "", "", blocks, B])
            out.writerow(["aggregate", self.kind, B, _fmt(T), self.reps, _fmt(level),
                          "", "", _fmt(stats.mean), _fmt(stats.std), blocks, B])
        return buf.getvalue()


def _fmt(x) -> str:
    return format(float(x), ".10g")


def _distort(spec: SweepSpec, level, trial):
    if spec.kind == "gaussian":
        return imagepipe.add_gaussian_noise(spec.image, level, spec.base_seed + trial)
    return imagepipe.jpeg_roundtrip(spec.image, int(level))


def _trial_key(spec: SweepSpec, trial: int) -> int:
    if spec.kind == "jpeg":
        return (spec.key + trial) & prng.MASK64
    return spec.key


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run every (B, T, level, trial) combination; rows come back in that order."""
    distorted = {(level, t): _distort(spec, level, t)
                 for level in spec.levels for t in range(spec.trials)}
    keys = {t: _trial_key(spec, t) for t in range(spec.trials)}

    def cell(B, T):
        signed = {}
        rows = []
        for level in spec.levels:
            for t in range(spec.trials):
                k = keys[t]
                if k not in signed:
                    signed[k] = imagepipe.sign_image(spec.image, k, B, T, spec.reps,
                                                     mode=spec.mode)
                report = imagepipe.verify_image(distorted[(level, t)], signed[k], k)
                rows.append(TrialRow(B, T, level, t, report.cdr))
                if spec.map_dir and t == 0:
                    name = f"map_{spec.kind}_B{B}_T{_fmt(T)}_L{_fmt(level)}.pgm"
                    pnm.write_pnm(imagepipe.render_tamper_map(report),
                                  os.path.join(spec.map_dir, name))
        return rows

    grid = [(B, T) for B in spec.block_sizes for T in spec.margins]
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(lambda bt: cell(*bt), grid))
    else:
        chunks = [cell(B, T) for B, T in grid]
    image = imagepipe.as_channels(spec.image)
    return SweepResult(spec.kind, spec.reps, [r for chunk in chunks for r in chunk],
                       shape=image.shape[:2])


def run_noise_sweep(spec: SweepSpec) -> SweepResult:
    if spec.kind != "gaussian":
        raise ValueError("run_noise_sweep needs a gaussian SweepSpec")
    return run_sweep(spec)


def run_jpeg_sweep(spec: SweepSpec) -> SweepResult:
    if spec.kind != "jpeg":
        raise ValueError("run_jpeg_sweep needs a jpeg SweepSpec")
    for q in spec.levels:
        if int(q) != q or not 1 <= q <= 100:
            raise ValueError(f"JPEG quality must be an integer in [1, 100], got {q}")
    return run_sweep(spec)


class SecurityReport(NamedTuple):
    n_bits: int
    log2_space: int
    weak: bool


def estimate_security(descriptor) -> SecurityReport:
    """Brute-force space of guessing the code: ``2**N`` for ``N`` code bits.

    Accepts a :class:`~nnauth.sidecar.Descriptor` or a plain bit count.
    Fewer than 64 bits is reported as weak.
    """
    n = int(descriptor) if isinstance(descriptor, (int, np.integer)) else descriptor.n_blocks
    if n < 0:
        raise ValueError("bit count must be non-negative")
    return SecurityReport(n, n, n < WEAK_BITS)
