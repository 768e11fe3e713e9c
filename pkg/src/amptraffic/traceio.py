"""CSV trace formats.

Event CSV (one row per On period)::

    t_start,duration,rate
    0.0,1.73,1.0

Binned CSV (metadata preamble, then one row per bin)::

    # delta=0.5 origin=0.0 n=4 seed=7
    bin_index,value
    0,0.25
    ...

Floats are written with ``repr`` (shortest round-trip form), so a write/read
cycle is lossless and repeated writes are byte-identical.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .onoff import BinnedTrace, RenewalTimeline

EVENT_HEADER = "t_start,duration,rate"
BINNED_HEADER = "bin_index,value"


class TraceFormatError(ValueError):
    """Malformed trace file; ``line`` is 1-based."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class EventTable:
    t_start: np.ndarray
    duration: np.ndarray
    rate: np.ndarray

    def __len__(self) -> int:
        return len(self.t_start)

    def off_gaps(self) -> np.ndarray:
        """Off durations between consecutive On periods."""
        return self.t_start[1:] - (self.t_start[:-1] + self.duration[:-1])


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_atomic(path, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_events(path, timeline: RenewalTimeline):
    """On periods of ``timeline``; zero-length periods (a source that starts Off) are skipped."""
    keep = timeline.on > 0
    rows = zip(timeline.starts[keep].tolist(), timeline.on[keep].tolist(), timeline.rates[keep].tolist())
    lines = [EVENT_HEADER]
    lines.extend(f"{_fmt(s)},{_fmt(x)},{_fmt(a)}" for s, x, a in rows)
    _write_atomic(path, "\n".join(lines) + "\n")


def write_binned(path, trace: BinnedTrace):
    seed = "none" if trace.seed is None else str(int(trace.seed))
    head = f"# delta={_fmt(trace.bin_width)} origin={_fmt(trace.origin)} n={len(trace)} seed={seed}"
    body = "\n".join(f"{i},{v!r}" for i, v in enumerate(trace.values.tolist()))
    _write_atomic(path, f"{head}\n{BINNED_HEADER}\n{body}\n" if len(trace) else f"{head}\n{BINNED_HEADER}\n")


def _parse_float(path, lineno: int, text: str, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise TraceFormatError(path, lineno, f"{what} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise TraceFormatError(path, lineno, f"{what} must be finite, got {text!r}")
    return v


def _parse_preamble(path, line: str) -> dict:
    meta = {}
    for item in line[1:].split():
        key, sep, val = item.partition("=")
        if not sep:
            raise TraceFormatError(path, 1, f"preamble item {item!r} is not key=value")
        meta[key] = val
    unknown = set(meta) - {"delta", "origin", "n", "seed"}
    if unknown:
        raise TraceFormatError(path, 1, f"unknown preamble keys: {sorted(unknown)}")
    out = {"delta": 1.0, "origin": 0.0, "n": None, "seed": None}
    if "delta" in meta:
        out["delta"] = _parse_float(path, 1, meta["delta"], "delta")
        if out["delta"] <= 0:
            raise TraceFormatError(path, 1, "delta must be positive")
    if "origin" in meta:
        out["origin"] = _parse_float(path, 1, meta["origin"], "origin")
    if "n" in meta:
        try:
            out["n"] = int(meta["n"])
        except ValueError:
            raise TraceFormatError(path, 1, f"n={meta['n']!r} is not an integer") from None
    if meta.get("seed", "none") != "none":
        try:
            out["seed"] = int(meta["seed"])
        except ValueError:
            raise TraceFormatError(path, 1, f"seed={meta['seed']!r} is not an integer") from None
    return out


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def read_binned(path) -> BinnedTrace:
    """Parse a binned CSV.

    The preamble is optional for external traces (``delta`` then defaults to
    1 and ``origin`` to 0); when present, ``n`` must match the row count.
    """
    lines = _read_lines(path)
    if not lines:
        raise TraceFormatError(path, 1, "empty file")
    meta = {"delta": 1.0, "origin": 0.0, "n": None, "seed": None}
    i = 0
    if lines[0].startswith("#"):
        meta = _parse_preamble(path, lines[0])
        i = 1
    if i >= len(lines) or lines[i].strip() != BINNED_HEADER:
        raise TraceFormatError(path, i + 1, f"expected header {BINNED_HEADER!r}")
    values = []
    for lineno, line in enumerate(lines[i + 1:], start=i + 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceFormatError(path, lineno, f"expected 2 fields, got {len(parts)}")
        try:
            idx = int(parts[0])
        except ValueError:
            raise TraceFormatError(path, lineno, f"bin_index {parts[0]!r} is not an integer") from None
        if idx != len(values):
            raise TraceFormatError(path, lineno, f"bin_index {idx} out of sequence (expected {len(values)})")
        v = _parse_float(path, lineno, parts[1], "value")
        if v < 0:
            raise TraceFormatError(path, lineno, f"value must be non-negative, got {v}")
        values.append(v)
    if meta["n"] is not None and meta["n"] != len(values):
        raise TraceFormatError(path, 1, f"preamble says n={meta['n']} but file has {len(values)} rows")
    return BinnedTrace(bin_width=meta["delta"], values=np.asarray(values, dtype=float),
                       origin=meta["origin"], seed=meta["seed"])


def read_events(path) -> EventTable:
    lines = _read_lines(path)
    if not lines or lines[0].strip() != EVENT_HEADER:
        raise TraceFormatError(path, 1, f"expected header {EVENT_HEADER!r}")
    rows = []
    prev_end = -math.inf
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise TraceFormatError(path, lineno, f"expected 3 fields, got {len(parts)}")
        s = _parse_float(path, lineno, parts[0], "t_start")
        x = _parse_float(path, lineno, parts[1], "duration")
        a = _parse_float(path, lineno, parts[2], "rate")
        if x < 0 or a < 0:
            raise TraceFormatError(path, lineno, "duration and rate must be non-negative")
        if s < prev_end:
            raise TraceFormatError(path, lineno, "On periods must be ordered and non-overlapping")
        prev_end = s + x
        rows.append((s, x, a))
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    return EventTable(t_start=arr[:, 0].copy(), duration=arr[:, 1].copy(), rate=arr[:, 2].copy())


def sniff(path) -> str:
    """``"events"`` or ``"binned"`` from the first lines of a CSV."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        second = fh.readline().strip()
    if first == EVENT_HEADER:
        return "events"
    if first == BINNED_HEADER or (first.startswith("#") and second == BINNED_HEADER):
        return "binned"
    raise TraceFormatError(path, 1, "not a recognised trace CSV (no event or binned header)")


def write_columns(path, header: list[str], columns: list[np.ndarray]):
    """Plot-data CSV: named numeric columns of equal length."""
    n = len(columns[0]) if columns else 0
    lists = [np.asarray(c, dtype=float).tolist() for c in columns]
    lines = [",".join(header)]
    lines.extend(",".join(repr(col[i]) for col in lists) for i in range(n))
    _write_atomic(path, "\n".join(lines) + "\n")
