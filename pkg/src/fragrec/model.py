"""Probability objects, fragment geometry, and deterministic RNG streams.

Everything here is immutable after construction and safe to share across
threads. Sampling derives a fresh generator from an :class:`RngStream`
value, so results depend only on (master_seed, stream_index), never on
call order or thread scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIMPLEX_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when a probability object or run configuration is invalid."""


def _as_readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    """Finite alphabet; symbols are the indices 0..size-1."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"alphabet size must be >= 1, got {self.size}")


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_readonly(self.probs))
        p = self.probs
        if p.ndim != 1 or p.size < 1:
            raise ValidationError("pmf must be a non-empty vector")
        if np.any(p < 0):
            raise ValidationError("pmf entries must be non-negative")
        if abs(float(p.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"pmf entries sum to {p.sum()!r}, expected 1")

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @property
    def fully_supported(self) -> bool:
        return bool(np.all(self.probs > 0))

    @staticmethod
    def uniform(size: int) -> "Pmf":
        return Pmf(np.full(size, 1.0 / size))

    @staticmethod
    def bernoulli(p: float) -> "Pmf":
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"bernoulli parameter must be in [0,1], got {p}")
        return Pmf(np.array([1.0 - p, p]))


@dataclass(frozen=True)
class ChannelKernel:
    """Row-stochastic transition matrix: rows[x, y] = P(y | x)."""

    rows: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", _as_readonly(self.rows))
        r = self.rows
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
            raise ValidationError("channel kernel must be a 2-d matrix")
        if np.any(r < 0):
            raise ValidationError("channel entries must be non-negative")
        sums = r.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SIMPLEX_TOL):
            raise ValidationError("every channel row must sum to 1")

    @property
    def x_size(self) -> int:
        return int(self.rows.shape[0])

    @property
    def y_size(self) -> int:
        return int(self.rows.shape[1])

    @staticmethod
    def bsc(alpha: float) -> "ChannelKernel":
        if not 0.0 <= alpha <= 1.0:
            raise ValidationError(f"crossover must be in [0,1], got {alpha}")
        return ChannelKernel(np.array([[1 - alpha, alpha], [alpha, 1 - alpha]]))

    @staticmethod
    def symmetric(alpha: float, size: int, x_size: int | None = None) -> "ChannelKernel":
        """Uniform-error channel: y = x w.p. 1-alpha, else uniform over the rest.

        ``x_size`` restricts the input alphabet to the first rows (the output
        alphabet keeps all ``size`` symbols).
        """
        if size < 2:
            raise ValidationError("symmetric channel needs size >= 2")
        if not 0.0 <= alpha <= (size - 1) / size:
            raise ValidationError(
                f"symmetric channel parameter must be in [0, {(size-1)/size:.4f}], got {alpha}"
            )
        rows = np.full((size, size), alpha / (size - 1))
        np.fill_diagonal(rows, 1 - alpha)
        if x_size is not None:
            if not 1 <= x_size <= size:
                raise ValidationError("x_size must be in 1..size")
            rows = rows[:x_size]
        return ChannelKernel(rows)

    @staticmethod
    def identity(size: int) -> "ChannelKernel":
        return ChannelKernel(np.eye(size))

    @staticmethod
    def from_file(path) -> "ChannelKernel":
        return ChannelKernel(load_matrix(path))


def load_matrix(path) -> np.ndarray:
    """Load a plain-text numeric matrix (whitespace-separated, rows = inputs)."""
    m = np.loadtxt(path, dtype=np.float64, ndmin=2)
    return m


@dataclass(frozen=True)
class SourceSpec:
    """Joint source: symbols drawn iid from p_x, reference symbols via channel."""

    x_alphabet: Alphabet
    y_alphabet: Alphabet
    p_x: Pmf
    channel: ChannelKernel

    def __post_init__(self):
        if self.p_x.size != self.x_alphabet.size:
            raise ValidationError("p_x length does not match the input alphabet")
        if self.channel.x_size != self.x_alphabet.size:
            raise ValidationError("channel row count does not match the input alphabet")
        if self.channel.y_size != self.y_alphabet.size:
            raise ValidationError("channel column count does not match the output alphabet")
        if not self.p_x.fully_supported:
            raise ValidationError("source pmf must be fully supported")

    @staticmethod
    def make(p_x: Pmf, channel: ChannelKernel) -> "SourceSpec":
        return SourceSpec(
            Alphabet(p_x.size), Alphabet(channel.y_size), p_x, channel
        )

    @property
    def x_size(self) -> int:
        return self.x_alphabet.size

    @property
    def y_size(self) -> int:
        return self.y_alphabet.size

    def joint_pmf(self) -> np.ndarray:
        """P(x, y) = p_x(x) * P(y | x)."""
        return self.p_x.probs[:, None] * self.channel.rows


@dataclass(frozen=True)
class FragmentConfig:
    """Fragment geometry: m fragments of length l, with l ~ beta * log(m).

    Exactly one of ``l`` and ``beta`` is given; the other is derived via
    l = round(beta * log m) (floored at 1, natural log) or beta = l / log m.
    ``beta_effective`` = l / log m is what actually holds after rounding and
    is recorded in every output row.
    """

    m: int
    l: int = field(default=0)
    beta: float = field(default=0.0)

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError(f"fragment count must be >= 1, got {self.m}")
        given_l = self.l > 0
        given_beta = self.beta > 0
        if given_l == given_beta:
            raise ValidationError("give exactly one of fragment length l or beta")
        if given_beta:
            log_m = math.log(self.m)
            derived = max(1, int(math.floor(self.beta * log_m + 0.5)))
            object.__setattr__(self, "l", derived)
        else:
            if self.m == 1:
                object.__setattr__(self, "beta", math.inf)
            else:
                object.__setattr__(self, "beta", self.l / math.log(self.m))

    @property
    def n(self) -> int:
        return self.m * self.l

    @property
    def beta_effective(self) -> float:
        if self.m == 1:
            return math.inf
        return self.l / math.log(self.m)


_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream: a (master_seed, stream_index) value.

    Streams with the same pair reproduce the same draws; distinct indices
    give statistically independent Philox streams, so parallel trial t can
    always use stream index base+t regardless of scheduling.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = [self.master_seed & _MASK64, self.stream_index & _MASK64]
        return np.random.Generator(np.random.Philox(key=key))

    def shifted(self, offset: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index + offset)


def shannon_entropy(p: Pmf) -> float:
    """Entropy in nats, with 0 * log 0 = 0."""
    probs = p.probs
    pos = probs[probs > 0]
    return float(-(pos * np.log(pos)).sum())


def renyi_entropy(p: Pmf, alpha: float) -> float:
    """Order-alpha entropy in nats; alpha = 2 gives the collision entropy."""
    if alpha < 0:
        raise ValidationError(f"order must be >= 0, got {alpha}")
    if alpha == 1:
        raise ValidationError("order 1 is the Shannon entropy; use shannon_entropy")
    pos = p.probs[p.probs > 0]
    return float(np.log((pos ** alpha).sum()) / (1.0 - alpha))


def collision_entropy(p: Pmf) -> float:
    return renyi_entropy(p, 2.0)


def sample_pair(spec: SourceSpec, n: int, gen: np.random.Generator):
    """Draw (x_seq, y_seq) of length n using an already-instantiated generator."""
    x_seq = gen.choice(spec.x_size, size=n, p=spec.p_x.probs)
    cdf = np.cumsum(spec.channel.rows, axis=1)
    u = gen.random(n)
    y_seq = (u[:, None] >= cdf[x_seq]).sum(axis=1)
    np.clip(y_seq, 0, spec.y_size - 1, out=y_seq)
    return x_seq.astype(np.int64), y_seq.astype(np.int64)


def sample_sequence(spec: SourceSpec, n: int, rng: RngStream):
    """Draw an iid source sequence and its reference observed through the channel.

    Deterministic in ``rng``: two calls with an equal stream return identical
    sequences.
    """
    if n < 1:
        raise ValidationError(f"sequence length must be >= 1, got {n}")
    return sample_pair(spec, n, rng.generator())
