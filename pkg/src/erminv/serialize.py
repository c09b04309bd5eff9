"""Line-oriented text formats for point sets, observations, and estimates.

Point sets (nets, packings) use a header ``# delta=<v> M=<v> count=<v>``
followed by one point per line of space-separated ``index:value`` tokens;
values carry 17 significant digits so round-trips are bit-exact.  Zero
coefficients are omitted (absent means zero).

Observations write CSV: white noise as ``index,z`` rows, samples as one
Y-point per row with a mandatory header.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .errors import ConfigError
from .indexing import CoefficientVector, MultiIndex

__all__ = [
    "format_float",
    "points_to_text",
    "points_from_text",
    "white_noise_to_csv",
    "white_noise_from_csv",
    "samples_to_csv",
    "samples_from_csv",
    "estimate_sidecar",
]


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def points_to_text(points, delta: float, M: int, basis_tag: str | None = None) -> str:
    """Serialize coefficient vectors (net or packing points)."""
    lines = [f"# delta={format_float(delta)} M={M} count={len(points)}"]
    for cv in points:
        toks = [f"{idx.token()}:{format_float(v)}" for idx, v in
                sorted(cv.entries.items(), key=lambda kv: kv[0].sort_key())]
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def points_from_text(text: str, basis_tag: str):
    """Parse the point-set format; returns (points, delta, M, count)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ConfigError("missing point-set header")
    header = {}
    for tok in lines[0][1:].split():
        key, _, val = tok.partition("=")
        header[key] = val
    try:
        delta = float(header["delta"])
        m_level = int(header["M"])
        count = int(header["count"])
    except (KeyError, ValueError) as err:
        raise ConfigError(f"malformed point-set header: {lines[0]!r}") from err
    points = []
    for line in lines[1:]:
        line = line.strip()
        if not line:
            points.append(CoefficientVector({}, basis_tag))
            continue
        entries = {}
        for tok in line.split():
            idx_tok, _, val = tok.rpartition(":")
            entries[MultiIndex.from_token(idx_tok)] = float(val)
        points.append(CoefficientVector(entries, basis_tag))
    if len(points) != count:
        raise ConfigError(f"header count {count} does not match {len(points)} points")
    return points, delta, m_level, count


def white_noise_to_csv(obs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "z"])
    for idx, z in zip(obs.index_set.indices, obs.z):
        w.writerow([idx.token(), format_float(z)])
    return buf.getvalue()


def white_noise_from_csv(text: str):
    """Returns (indices, values) in file order."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["index", "z"]:
        raise ConfigError("white-noise CSV must start with an 'index,z' header")
    indices = [MultiIndex.from_token(r[0]) for r in rows[1:]]
    values = np.array([float(r[1]) for r in rows[1:]])
    return indices, values


def samples_to_csv(obs, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in obs.points:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()


def samples_from_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ConfigError("empty samples CSV")
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return header, data


def estimate_sidecar(result, timing_s: float | None = None) -> str:
    meta = {
        "risk_value": result.risk_value,
        "lagrange_multiplier": result.lagrange_multiplier,
        "argmin_index": result.argmin_index,
        "ties_broken": result.ties_broken,
    }
    if timing_s is not None:
        meta["timing_s"] = timing_s
    return json.dumps(meta, indent=2, sort_keys=True) + "\n"
