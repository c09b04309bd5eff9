"""Multi-indices, basis index families, and coefficient vectors.

Everything downstream (ellipsoids, nets, operators, estimators) works in
coefficient space.  A function is a finitely supported map from multi-indices
to real coefficients; the index family (trig with cos/sin parity bits, the
Zernike disk pair, or a single-axis cosine family) fixes which indices are
legal and how they enumerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "MultiIndex",
    "TrigSpace",
    "AxisCosSpace",
    "DiskSpace",
    "IndexSet",
    "CoefficientVector",
    "space_from_tag",
]


@dataclass(frozen=True)
class MultiIndex:
    """A basis index: non-negative frequencies plus optional cos/sin parity.

    ``parity`` is a tuple of bits (0 = cosine, 1 = sine) for the tensor
    trigonometric family and ``None`` for families without a parity choice
    (the Zernike disk pair).  A sine bit on a zero frequency is rejected:
    sin(0) is not a basis function.
    """

    indices: tuple
    parity: tuple | None = None

    def __post_init__(self):
        if any((not isinstance(j, int)) or j < 0 for j in self.indices):
            raise ConfigError(f"multi-index entries must be non-negative ints: {self.indices}")
        if self.parity is not None:
            if len(self.parity) != len(self.indices):
                raise ConfigError("parity length must match index length")
            for j, k in zip(self.indices, self.parity):
                if k not in (0, 1):
                    raise ConfigError(f"parity bits must be 0 or 1: {self.parity}")
                if j == 0 and k == 1:
                    raise ConfigError(
                        f"invalid parity: sine on zero frequency in {(self.indices, self.parity)}"
                    )

    @property
    def total(self) -> int:
        """|j| = j_1 + ... + j_d."""
        return sum(self.indices)

    def sort_key(self):
        return (self.total, self.indices, self.parity if self.parity is not None else ())

    def token(self) -> str:
        """Serialization token, e.g. ``1,2|0,1`` or ``1,2`` (no parity)."""
        s = ",".join(str(j) for j in self.indices)
        if self.parity is not None:
            s += "|" + ",".join(str(k) for k in self.parity)
        return s

    @staticmethod
    def from_token(token: str) -> "MultiIndex":
        if "|" in token:
            js, ks = token.split("|")
            return MultiIndex(
                tuple(int(v) for v in js.split(",")),
                tuple(int(v) for v in ks.split(",")),
            )
        return MultiIndex(tuple(int(v) for v in token.split(",")), None)


def _parities_for(j: tuple) -> list:
    """All legal parity tuples for frequency tuple j (the set K_j)."""
    choices = [(0,) if ji == 0 else (0, 1) for ji in j]
    out = [()]
    for c in choices:
        out = [p + (k,) for p in out for k in c]
    return out


def _compositions_up_to(d: int, m: int):
    """All tuples in {0..m}^d with coordinate sum <= m, ascending by sum."""
    by_sum = {}

    def rec(prefix, remaining, axes_left):
        if axes_left == 0:
            by_sum.setdefault(sum(prefix), []).append(tuple(prefix))
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, axes_left - 1)

    rec([], m, d)
    for s in sorted(by_sum):
        yield from sorted(by_sum[s])


class TrigSpace:
    """Tensor trigonometric family on [0,1]^d with parity bits."""

    def __init__(self, d: int):
        if d < 1:
            raise ConfigError("dimension must be >= 1")
        self.d = d
        self.tag = f"trig{d}"
        self.entropy_dimension = d

    def indices_up_to(self, m: int) -> list:
        out = []
        for j in _compositions_up_to(self.d, m):
            for k in _parities_for(j):
                out.append(MultiIndex(j, k))
        return out

    def validate(self, idx: MultiIndex):
        if len(idx.indices) != self.d or idx.parity is None:
            raise ConfigError(f"index {idx} does not belong to {self.tag}")


class AxisCosSpace:
    """Cosine-only family on one axis of [0,1]^d, excluding the constant.

    Used for centered additive components: frequencies j >= 1 on the chosen
    axis, zeros elsewhere, all parity bits 0.
    """

    def __init__(self, axis: int, d: int):
        if not 0 <= axis < d:
            raise ConfigError("axis out of range")
        self.axis = axis
        self.d = d
        self.tag = f"trig{d}"  # embeds in the full trig family
        self.entropy_dimension = 1

    def indices_up_to(self, m: int) -> list:
        out = []
        for j in range(1, m + 1):
            freq = tuple(j if i == self.axis else 0 for i in range(self.d))
            out.append(MultiIndex(freq, (0,) * self.d))
        return out

    def validate(self, idx: MultiIndex):
        if len(idx.indices) != self.d or idx.parity is None:
            raise ConfigError(f"index {idx} does not belong to {self.tag}")
        for i, j in enumerate(idx.indices):
            if i != self.axis and j != 0:
                raise ConfigError(f"index {idx} lives off axis {self.axis}")


class DiskSpace:
    """Zernike disk pair indices (j1, j2), excluding (0, 0)."""

    def __init__(self):
        self.d = 2
        self.tag = "disk"
        self.entropy_dimension = 2

    def indices_up_to(self, m: int) -> list:
        out = []
        for s in range(1, m + 1):
            for j1 in range(s, -1, -1):
                out.append(MultiIndex((j1, s - j1), None))
        return out

    def validate(self, idx: MultiIndex):
        if len(idx.indices) != 2 or idx.parity is not None:
            raise ConfigError(f"index {idx} does not belong to disk family")
        if idx.indices == (0, 0):
            raise ConfigError("(0,0) is excluded from the disk family")


def space_from_tag(tag: str):
    if tag == "disk":
        return DiskSpace()
    if tag.startswith("trig"):
        return TrigSpace(int(tag[4:]))
    raise ConfigError(f"unknown basis tag {tag!r}")


class IndexSet:
    """An ordered, deduplicated list of multi-indices with position lookup."""

    def __init__(self, indices):
        self.indices = tuple(indices)
        self.pos = {idx: i for i, idx in enumerate(self.indices)}
        if len(self.pos) != len(self.indices):
            raise ConfigError("duplicate indices in index set")

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, idx):
        return idx in self.pos

    def totals(self) -> np.ndarray:
        return np.array([idx.total for idx in self.indices], dtype=float)


@dataclass
class CoefficientVector:
    """A function represented by finitely many basis coefficients."""

    entries: dict = field(default_factory=dict)
    basis_tag: str = "trig1"

    def __post_init__(self):
        # drop exact zeros so support queries stay meaningful
        self.entries = {k: float(v) for k, v in self.entries.items() if v != 0.0}

    def norm(self) -> float:
        """L2 norm via Parseval."""
        return math.sqrt(sum(v * v for v in self.entries.values()))

    def norm_sq(self) -> float:
        return sum(v * v for v in self.entries.values())

    def dot(self, other: "CoefficientVector") -> float:
        if other.basis_tag != self.basis_tag:
            raise ConfigError("basis mismatch in dot product")
        small, big = self.entries, other.entries
        if len(big) < len(small):
            small, big = big, small
        return sum(v * big.get(k, 0.0) for k, v in small.items())

    def sub(self, other: "CoefficientVector") -> "CoefficientVector":
        if other.basis_tag != self.basis_tag:
            raise ConfigError("basis mismatch in subtraction")
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, 0.0) - v
        return CoefficientVector(out, self.basis_tag)

    def add(self, other: "CoefficientVector") -> "CoefficientVector":
        if other.basis_tag != self.basis_tag:
            raise ConfigError("basis mismatch in addition")
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, 0.0) + v
        return CoefficientVector(out, self.basis_tag)

    def get(self, idx: MultiIndex) -> float:
        return self.entries.get(idx, 0.0)

    def support(self) -> list:
        return sorted(self.entries, key=lambda i: i.sort_key())

    def max_level(self) -> int:
        """Largest |j| in the support (0 for the zero vector)."""
        return max((idx.total for idx in self.entries), default=0)

    def to_array(self, index_set: IndexSet, strict: bool = False) -> np.ndarray:
        out = np.zeros(len(index_set))
        for idx, v in self.entries.items():
            p = index_set.pos.get(idx)
            if p is None:
                if strict:
                    raise ConfigError(f"coefficient at {idx} outside index set")
                continue
            out[p] = v
        return out

    @staticmethod
    def from_array(values, index_set: IndexSet, basis_tag: str) -> "CoefficientVector":
        entries = {idx: float(v) for idx, v in zip(index_set.indices, values) if v != 0.0}
        return CoefficientVector(entries, basis_tag)
