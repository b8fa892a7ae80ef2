"""Small statistical helpers shared by the experiment modules."""

from __future__ import annotations

import math

from scipy import stats as _st


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95):
    """Exact (Clopper-Pearson) two-sided binomial interval.

    Preferred over the normal approximation because the target rates here
    are often tiny or exactly zero.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must be in 0..trials")
    alpha = 1.0 - confidence
    if successes == 0:
        lo = 0.0
    else:
        lo = float(_st.beta.ppf(alpha / 2, successes, trials - successes + 1))
    if successes == trials:
        hi = 1.0
    else:
        hi = float(_st.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


def rule_of_three_upper(trials: int, confidence: float = 0.95) -> float:
    """One-sided upper bound on a rate after observing zero events."""
    return -math.log(1.0 - confidence) / trials


def least_squares_line(xs, ys):
    """OLS fit y = a + b x; returns (slope, slope standard error)."""
    n = len(xs)
    if n < 3:
        raise ValueError("need at least 3 points for a slope with a standard error")
    xbar = sum(xs) / n
    ybar = sum(ys) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    if sxx == 0:
        raise ValueError("degenerate fit: all x values equal")
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    rss = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    sigma2 = rss / (n - 2)
    return slope, math.sqrt(sigma2 / sxx)
