"""Plain-text verification report.

One ``key: value`` pair per line, then a ``mask:`` line followed by one line
per (channel, block row)::

    <channel> <row>: <run> <run> ...

Runs alternate between intact and flagged blocks, starting with intact, so
``"0 3: 10 2 52"`` means ten intact blocks, two flagged, fifty-two intact.
A row that starts flagged begins with a ``0`` run.
"""

from __future__ import annotations

import numpy as np

FORMAT = "nnauth-report 1"


def _runs(row: np.ndarray) -> list[int]:
    runs, current, count = [], False, 0
    for flagged in row:
        if bool(flagged) == current:
            count += 1
        else:
            runs.append(count)
            current, count = bool(flagged), 1
    runs.append(count)
    return runs


def format_report(report, tau: float | None = None, verdict: str | None = None,
                  extra: dict | None = None) -> str:
    g = report.grid
    mask = report.tamper_mask
    fields = {
        "format": FORMAT,
        "width": g.width,
        "height": g.height,
        "channels": mask.shape[0],
        "mode": report.params["mode"],
        "B": g.block_size,
        "T": repr(float(report.params["T"])),
        "R": report.params["R"],
        "vote": report.params["vote"],
        "fingerprint": report.params["fingerprint"],
        "rows": g.rows,
        "cols": g.cols,
        "total_bits": report.total_bits,
        "matching_bits": int(round(report.cdr * report.total_bits)),
        "cdr": repr(report.cdr),
        "flagged_blocks": report.flagged_blocks,
    }
    if tau is not None:
        fields["tau"] = repr(float(tau))
    if verdict is not None:
        fields["verdict"] = verdict
    fields.update(extra or {})
    lines = [f"{k}: {v}" for k, v in fields.items()]
    lines.append("mask:")
    for c in range(mask.shape[0]):
        for r in range(mask.shape[1]):
            lines.append(f"{c} {r}: " + " ".join(map(str, _runs(mask[c, r]))))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> tuple[dict, np.ndarray]:
    """Inverse of :func:`format_report`: ``(fields, tamper mask)``."""
    fields: dict = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i] != "mask:":
        key, _, value = lines[i].partition(": ")
        fields[key] = value
        i += 1
    if fields.get("format") != FORMAT:
        raise ValueError("not an nnauth report")
    channels, rows, cols = (int(fields[k]) for k in ("channels", "rows", "cols"))
    mask = np.zeros((channels, rows, cols), dtype=bool)
    for line in lines[i + 1:]:
        head, _, body = line.partition(": ")
        c, r = map(int, head.split())
        pos, flagged = 0, False
        for run in map(int, body.split()):
            mask[c, r, pos:pos + run] = flagged
            pos += run
            flagged = not flagged
        if pos != cols:
            raise ValueError(f"mask row {c} {r} covers {pos} blocks, expected {cols}")
    return fields, mask
