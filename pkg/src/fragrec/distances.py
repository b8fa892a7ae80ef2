"""Chernoff/Bhattacharyya distances and additive distortion measures.

Distances live at three granularities: per symbol pair (table), per fragment
(sum over positions), and per joint type (expectation under a pair pmf).
Disjoint channel rows give an explicit +inf entry, never a sentinel float;
downstream likelihood code treats it as an impossible pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChannelKernel, ValidationError, _as_readonly, load_matrix, SIMPLEX_TOL


@dataclass(frozen=True)
class SymbolDistanceTable:
    """Pairwise distance d[x1, x2] for one Chernoff parameter s in [0, 1]."""

    d: np.ndarray
    s: float

    def __post_init__(self):
        object.__setattr__(self, "d", _as_readonly(self.d))
        if not 0.0 <= self.s <= 1.0:
            raise ValidationError(f"chernoff parameter must be in [0,1], got {self.s}")

    @property
    def size(self) -> int:
        return int(self.d.shape[0])

    @property
    def max_finite(self) -> float:
        finite = self.d[np.isfinite(self.d)]
        return float(finite.max()) if finite.size else 0.0


@dataclass(frozen=True)
class DistortionMeasure:
    """Per-symbol distortion table; extended to fragments by averaging."""

    delta_table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta_table", _as_readonly(self.delta_table))
        t = self.delta_table
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValidationError("distortion table must be square")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValidationError("distortion entries must be finite and non-negative")
        if np.any(np.diagonal(t) != 0):
            raise ValidationError("distortion of a symbol with itself must be 0")

    @property
    def size(self) -> int:
        return int(self.delta_table.shape[0])

    @property
    def max_value(self) -> float:
        return float(self.delta_table.max())

    @staticmethod
    def hamming(size: int) -> "DistortionMeasure":
        return DistortionMeasure(1.0 - np.eye(size))

    @staticmethod
    def from_file(path) -> "DistortionMeasure":
        return DistortionMeasure(load_matrix(path))


def chernoff_table(channel: ChannelKernel, s: float = 0.5) -> SymbolDistanceTable:
    """d_s(x1, x2) = -log sum_y P(y|x1)^s P(y|x2)^(1-s).

    s = 1/2 is the (symmetric) Bhattacharyya distance. Rows with disjoint
    support give +inf. The diagonal is exactly 0.
    """
    if not 0.0 <= s <= 1.0:
        raise ValidationError(f"chernoff parameter must be in [0,1], got {s}")
    rows = channel.rows
    nx = channel.x_size
    d = np.empty((nx, nx))
    for x1 in range(nx):
        p1 = rows[x1]
        for x2 in range(nx):
            p2 = rows[x2]
            # 0^0 is taken as the s->0 / s->1 limit: only jointly relevant
            # outputs contribute.
            if s == 0.0:
                total = p2[p1 > 0].sum()
            elif s == 1.0:
                total = p1[p2 > 0].sum()
            else:
                mask = (p1 > 0) & (p2 > 0)
                total = float(np.exp(s * np.log(p1[mask]) + (1 - s) * np.log(p2[mask])).sum())
            if total <= 0:
                d[x1, x2] = math.inf
            else:
                # Cauchy-Schwarz keeps the true value >= 0; clamp roundoff
                d[x1, x2] = max(0.0, -math.log(total))
    np.fill_diagonal(d, 0.0)
    return SymbolDistanceTable(d, s)


def fragment_distance(table: SymbolDistanceTable, frag_a, frag_b) -> float:
    """Additive distance over positions; +inf if any pairing is impossible."""
    frag_a = np.asarray(frag_a)
    frag_b = np.asarray(frag_b)
    if frag_a.shape != frag_b.shape:
        raise ValidationError("fragments must have equal length")
    return float(table.d[frag_a, frag_b].sum())


def joint_type(frag_a, frag_b, size: int) -> np.ndarray:
    """Empirical joint pmf of aligned symbol pairs."""
    frag_a = np.asarray(frag_a)
    frag_b = np.asarray(frag_b)
    if frag_a.shape != frag_b.shape:
        raise ValidationError("fragments must have equal length")
    counts = np.zeros((size, size))
    np.add.at(counts, (frag_a, frag_b), 1.0)
    return counts / frag_a.size


def type_distance(table: SymbolDistanceTable, q: np.ndarray) -> float:
    """Per-symbol distance of a pair joint pmf: sum q(x1,x2) d(x1,x2)."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != table.d.shape:
        raise ValidationError("joint pmf shape does not match the distance table")
    if np.any(q < 0) or abs(float(q.sum()) - 1.0) > SIMPLEX_TOL:
        raise ValidationError("q must be a pmf over symbol pairs")
    support = q > 0
    if np.any(support & np.isinf(table.d)):
        return math.inf
    return float((q[support] * table.d[support]).sum())


def fragment_distortion(measure: DistortionMeasure, frag_a, frag_b) -> float:
    """Per-symbol average distortion between two equal-length fragments."""
    frag_a = np.asarray(frag_a)
    frag_b = np.asarray(frag_b)
    if frag_a.shape != frag_b.shape:
        raise ValidationError("fragments must have equal length")
    return float(measure.delta_table[frag_a, frag_b].mean())


def type_distortion(measure: DistortionMeasure, q: np.ndarray) -> float:
    """Distortion of a pair joint pmf: sum q(x1,x2) delta(x1,x2)."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != measure.delta_table.shape:
        raise ValidationError("joint pmf shape does not match the distortion table")
    return float((q * measure.delta_table).sum())
