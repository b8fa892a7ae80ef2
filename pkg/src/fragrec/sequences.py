"""Fragmentation, shuffling, fragment histograms, and reconstruction counting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FragmentConfig, RngStream, SourceSpec, ValidationError, sample_pair, shannon_entropy
from .stats import clopper_pearson


@dataclass(frozen=True)
class ShuffledInstance:
    """One sampled trial: hidden truth plus the shuffled fragment multiset.

    ``fragments[j]`` is the true fragment at position ``hidden_perm[j]``; the
    hidden permutation exists for scoring only and is never shown to the
    decoder.
    """

    x_seq: np.ndarray
    y_seq: np.ndarray
    fragments: np.ndarray  # (m, l), shuffled order
    hidden_perm: np.ndarray  # shuffled position -> true position
    config: FragmentConfig

    def true_fragments(self) -> np.ndarray:
        return self.x_seq.reshape(self.config.m, self.config.l)

    def y_fragments(self) -> np.ndarray:
        return self.y_seq.reshape(self.config.m, self.config.l)


def fragment_and_shuffle(
    spec: SourceSpec, config: FragmentConfig, rng: RngStream
) -> ShuffledInstance:
    """Sample (x, y), cut x into m fragments, and shuffle them uniformly."""
    gen = rng.generator()
    x_seq, y_seq = sample_pair(spec, config.n, gen)
    true_frags = x_seq.reshape(config.m, config.l)
    perm = gen.permutation(config.m)
    return ShuffledInstance(
        x_seq=x_seq,
        y_seq=y_seq,
        fragments=true_frags[perm],
        hidden_perm=perm,
        config=config,
    )


def pack_fragments(fragments: np.ndarray, alphabet_size: int):
    """Map fragments to hashable keys: packed integers when they fit 63 bits,
    raw bytes otherwise."""
    m, l = fragments.shape
    if l * math.log2(max(2, alphabet_size)) <= 63:
        powers = alphabet_size ** np.arange(l, dtype=np.int64)
        return [int(k) for k in fragments @ powers]
    if alphabet_size > 256:
        raise ValidationError("fragment packing supports alphabets up to 256 symbols")
    u8 = fragments.astype(np.uint8)
    return [u8[i].tobytes() for i in range(m)]


@dataclass(frozen=True)
class Histogram:
    """Multiplicity of each distinct fragment value in the multiset."""

    counts: dict
    m: int
    l: int

    def multiplicities(self) -> np.ndarray:
        return np.array(sorted(self.counts.values(), reverse=True), dtype=np.int64)


def histogram(instance: ShuffledInstance, alphabet_size: int | None = None) -> Histogram:
    size = alphabet_size if alphabet_size is not None else int(instance.fragments.max(initial=0)) + 1
    keys = pack_fragments(instance.fragments, size)
    counts: dict = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    return Histogram(counts, instance.config.m, instance.config.l)


def log_num_reconstructions(h: Histogram) -> float:
    """log of the number of distinct orderings: log m! - sum_j log G(j)!."""
    total = math.lgamma(h.m + 1)
    for c in h.counts.values():
        total -= math.lgamma(c + 1)
    return total


def histogram_entropy(h: Histogram) -> float:
    """Entropy of the empirical fragment distribution G / m, in nats."""
    fracs = np.array(list(h.counts.values()), dtype=np.float64) / h.m
    return float(-(fracs * np.log(fracs)).sum())


@dataclass(frozen=True)
class CardinalityReport:
    m: int
    l: int
    beta_effective: float
    eta: float
    trials: int
    tail_count: int
    tail_rate: float
    ci_lo: float
    ci_hi: float
    mean_logcard: float
    mean_logcard_norm: float  # mean of log-cardinality / (m log m)
    threshold: float

    def csv_row(self, seed: int) -> list:
        return [
            seed, self.m, self.l, f"{self.beta_effective:.6f}", f"{self.eta:g}",
            self.trials, self.tail_count, f"{self.tail_rate:.6g}",
            f"{self.ci_lo:.6g}", f"{self.ci_hi:.6g}", f"{self.mean_logcard:.10g}",
        ]


CARDINALITY_CSV_HEADER = [
    "seed", "M", "L", "beta", "eta", "trials",
    "tail_count", "tail_rate", "ci_lo", "ci_hi", "mean_logcard",
]


def cardinality_concentration_experiment(
    spec: SourceSpec,
    config: FragmentConfig,
    eta: float,
    trials: int,
    rng: RngStream,
) -> CardinalityReport:
    """Estimate how often the log reconstruction count exceeds its typical level.

    Counts trials with (1/m) log #reconstructions >= l * H(p) + eta * log m
    and reports the rate with a 95% binomial interval. The multinomial
    entropy bound (1/m) log #reconstructions <= H(G/m) is asserted on every
    sampled instance; it is an identity and a violation is a bug.
    """
    if not 0.0 < eta < 1.0:
        raise ValidationError(f"eta must be in (0,1), got {eta}")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    h_source = shannon_entropy(spec.p_x)
    if h_source <= 0:
        raise ValidationError("cardinality concentration needs a source with positive entropy")
    threshold = config.l * h_source + eta * math.log(config.m)
    tail = 0
    sum_logcard = 0.0
    for t in range(trials):
        inst = fragment_and_shuffle(spec, config, rng.shifted(t))
        h = histogram(inst, spec.x_size)
        logcard = log_num_reconstructions(h)
        per_frag = logcard / config.m
        bound = histogram_entropy(h)
        if per_frag > bound + 1e-9:
            raise AssertionError(
                f"multinomial entropy bound violated: {per_frag!r} > {bound!r}"
            )
        if per_frag >= threshold:
            tail += 1
        sum_logcard += logcard
    lo, hi = clopper_pearson(tail, trials, 0.95)
    denom = config.m * math.log(config.m) if config.m > 1 else 1.0
    return CardinalityReport(
        m=config.m,
        l=config.l,
        beta_effective=config.beta_effective,
        eta=eta,
        trials=trials,
        tail_count=tail,
        tail_rate=tail / trials,
        ci_lo=lo,
        ci_hi=hi,
        mean_logcard=sum_logcard / trials,
        mean_logcard_norm=(sum_logcard / trials) / denom,
        threshold=threshold,
    )
