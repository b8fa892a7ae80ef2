"""Error-exponent rate functions, distance-at-distortion, and trade-off curves.

The central quantity is the transposition exponent: the rate (nats per
fragment symbol) at which the probability of confusing a swapped pair of
fragments decays. It admits three independent evaluation paths (closed
form, kernel trace, entropic mirror descent), which the tests hold to
mutual agreement. Cycle exponents for longer cycles come from the
eigendecomposition of the same kernel. The distance-at-distortion curve is
solved exactly by two-atom support enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distances import DistortionMeasure, SymbolDistanceTable, chernoff_table
from .model import SourceSpec, ValidationError, collision_entropy, shannon_entropy


@dataclass(frozen=True)
class BhattacharyyaKernel:
    """Symmetric kernel a[x1, x2] = sqrt(p(x1) p(x2)) exp(-d(x1, x2)).

    Its trace is 1 (zero diagonal distance) and trace(a^k) equals the exact
    expectation of the pairwise-confusion weight along a length-k cycle of
    iid fragments, which is why all cycle exponents reduce to eigenvalues.
    """

    a: np.ndarray

    @staticmethod
    def build(spec: SourceSpec) -> "BhattacharyyaKernel":
        table = chernoff_table(spec.channel, 0.5)
        p = spec.p_x.probs
        with np.errstate(invalid="ignore"):
            a = np.sqrt(np.outer(p, p)) * np.exp(-table.d)
        return BhattacharyyaKernel(a)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.a)

    def power_trace(self, k: int) -> float:
        lam = self.eigenvalues()
        return float((lam ** k).sum())


def transposition_exponent(spec: SourceSpec) -> float:
    """Closed-form transposition error exponent in nats.

    -1/2 log sum_{x1,x2} p(x1) p(x2) exp(-2 d(x1, x2)) with d the
    Bhattacharyya symbol distance.
    """
    table = chernoff_table(spec.channel, 0.5)
    p = spec.p_x.probs
    weights = np.outer(p, p) * np.exp(-2.0 * table.d)
    total = float(weights.sum())
    if total <= 0:
        raise ValidationError("degenerate source: confusion weight sums to zero")
    return -0.5 * math.log(total)


def transposition_exponent_split(spec: SourceSpec) -> float:
    """Alternative form: the diagonal collapses to the collision probability.

    -1/2 log [exp(-H2(p)) + sum_{x1 != x2} p(x1) p(x2) exp(-2 d(x1, x2))].
    Must equal :func:`transposition_exponent`; shows the clean-channel limit
    is half the collision entropy.
    """
    table = chernoff_table(spec.channel, 0.5)
    p = spec.p_x.probs
    weights = np.outer(p, p) * np.exp(-2.0 * table.d)
    off = float(weights.sum() - np.trace(weights))
    total = math.exp(-collision_entropy(spec.p_x)) + off
    if total <= 0:
        raise ValidationError("degenerate source: confusion weight sums to zero")
    return -0.5 * math.log(total)


def critical_beta(spec: SourceSpec) -> float:
    """Fragment-length threshold: above 1/exponent the decoder succeeds whp."""
    return 1.0 / transposition_exponent(spec)


def cycle_exponent(spec: SourceSpec, k: int) -> tuple[float, str]:
    """Exponent for a length-k fragment cycle: -(1/k) log trace(a^k).

    Computed from the symmetric-kernel eigendecomposition; k = 2 reproduces
    the transposition exponent. Falls back to a direct matrix-power cycle
    sum if the eigenvalue sum is numerically non-positive (cannot happen
    mathematically: the cycle sum is a sum of positive terms).

    Returns (value, method_tag).
    """
    if k < 2:
        raise ValidationError(f"cycle length must be >= 2, got {k}")
    kernel = BhattacharyyaKernel.build(spec)
    trace_k = kernel.power_trace(k)
    if trace_k > 0:
        return -math.log(trace_k) / k, "trace"
    if spec.x_size ** k > 10 ** 6:
        raise ValidationError("cycle sum fallback exceeds the enumeration budget")
    direct = float(np.trace(np.linalg.matrix_power(kernel.a, k)))
    if direct <= 0:
        raise ValidationError("cycle weight sum is non-positive; kernel is degenerate")
    return -math.log(direct) / k, "cycle-sum"


def cycle_bound_margins(spec: SourceSpec, k_max: int) -> list[dict]:
    """Check trace(a^k) <= exp(-k * transposition exponent) for k = 2..k_max.

    The bound is the eigenvalue-norm fact ||lam||_k <= ||lam||_2; a violation
    beyond 1e-12 relative slack is a bug and raises. Returns per-k margins.
    """
    if k_max < 2:
        raise ValidationError(f"k_max must be >= 2, got {k_max}")
    kernel = BhattacharyyaKernel.build(spec)
    exponent = transposition_exponent(spec)
    out = []
    for k in range(2, k_max + 1):
        trace_k = kernel.power_trace(k)
        bound = math.exp(-k * exponent)
        margin = bound - trace_k
        if margin < -1e-12 * bound:
            raise AssertionError(
                f"cycle bound violated at k={k}: trace={trace_k!r} > bound={bound!r}"
            )
        out.append({"k": k, "trace": trace_k, "bound": bound, "margin": margin})
    return out


def transposition_exponent_mirror_descent(
    spec: SourceSpec, tol: float = 1e-10, max_iters: int = 100_000
):
    """Independent optimizer oracle for the transposition exponent.

    Minimizes 0.5 * KL(q || p x p) + <q, d> over pair pmfs by multiplicative
    (entropic) updates, which preserve the simplex exactly. Stops when the
    objective change and the stationarity residual (variance of log q minus
    the log Gibbs target) both drop below tol.

    Returns (value, q). Raises if the iteration cap is hit, which signals a
    tolerance that is too tight.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    table = chernoff_table(spec.channel, 0.5)
    p = spec.p_x.probs
    d = table.d
    log_pp = np.log(np.outer(p, p))
    support = np.isfinite(d)
    # pairs with infinite distance have exactly zero Gibbs weight
    step = 0.5 / (1.0 + table.max_finite)

    q = np.zeros_like(d)
    q[support] = 1.0 / support.sum()

    def objective(qm):
        s = qm[support]
        kl = float((s * (np.log(s) - log_pp[support])).sum())
        return 0.5 * kl + float((s * d[support]).sum())

    log_target = log_pp[support] - 2.0 * d[support]
    prev = objective(q)
    for _ in range(max_iters):
        grad = 0.5 * (np.log(q[support]) - log_pp[support] + 1.0) + d[support]
        w = np.log(q[support]) - step * grad
        w -= w.max()
        qs = np.exp(w)
        qs /= qs.sum()
        q[support] = qs
        cur = objective(q)
        resid = np.log(qs) - log_target
        if abs(cur - prev) < tol and float(np.var(resid)) < tol:
            return cur, q
        prev = cur
    raise RuntimeError(
        f"mirror descent did not converge in {max_iters} iterations; tol={tol} too tight"
    )


def _sinkhorn_equal_marginals(mu, p, d, weight, tol=1e-13, max_iters=200_000):
    """Minimize weight * KL(q || mu x p) + <q, d> over couplings of (mu, mu).

    Multiplicative scaling on the kernel mu_i p_j exp(-d_ij / weight); the
    diagonal coupling diag(mu) is always feasible, so the iteration converges.
    Returns the optimal coupling restricted to the support of mu.
    """
    keep = mu > 0
    mu = mu[keep]
    kern = mu[:, None] * p[None, keep] * np.exp(-d[np.ix_(keep, keep)] / weight)
    u = np.ones_like(mu)
    v = np.ones_like(mu)
    for _ in range(max_iters):
        u = mu / (kern @ v)
        v = mu / (kern.T @ u)
        q = u[:, None] * kern * v[None, :]
        err = np.abs(q.sum(axis=1) - mu).sum() + np.abs(q.sum(axis=0) - mu).sum()
        if err < tol:
            break
    q /= q.sum()
    full = np.zeros_like(d)
    full[np.ix_(keep, keep)] = q
    return full


def _broken_cycle_value(spec, d, mu, k):
    """Objective of the cycle-break relaxation at a fixed shared marginal."""
    p = spec.p_x.probs
    pos = mu > 0
    kl_marginal = float((mu[pos] * (np.log(mu[pos]) - np.log(p[pos]))).sum())
    if math.isinf(k):
        w_head, w_tail = 0.0, 1.0
    else:
        w_head, w_tail = 1.0 / k, (k - 1.0) / k
    q = _sinkhorn_equal_marginals(mu, p, d, w_tail)
    sup = q > 0
    cond_kl = float(
        (q[sup] * (np.log(q[sup]) - np.log((mu[:, None] * p[None, :])[sup]))).sum()
    )
    return w_head * kl_marginal + w_tail * cond_kl + float((q[sup] * d[sup]).sum())


def _marginal_grid(size, step):
    if size == 2:
        for i in range(int(round(1.0 / step)) + 1):
            a = min(1.0, i * step)
            yield np.array([a, 1.0 - a])
    else:
        n = int(round(1.0 / step))
        for i in range(n + 1):
            for j in range(n + 1 - i):
                yield np.array([i * step, j * step, 1.0 - (i + j) * step])


def broken_cycle_exponent(spec: SourceSpec, k, grid_step: float = 0.01) -> float:
    """Lower-bounding relaxation for cycles of length k >= 4 (test-only).

    Breaking the cycle reduces the problem to pair pmfs with equal marginals:
    grid-search the shared marginal, solve the inner coupling exactly by
    multiplicative scaling, then refine the marginal locally. ``k`` may be
    math.inf for the long-cycle limit.
    """
    if not math.isinf(k) and k < 4:
        raise ValidationError(f"the relaxation applies to cycle length >= 4, got {k}")
    if grid_step > 0.01:
        raise ValidationError("grid step too coarse to track the marginal constraint")
    if spec.x_size > 3:
        raise ValidationError("grid search is only feasible for alphabets of size <= 3")
    d = chernoff_table(spec.channel, 0.5).d
    best_val = math.inf
    best_mu = None
    for mu in _marginal_grid(spec.x_size, grid_step):
        val = _broken_cycle_value(spec, d, mu, k)
        if val < best_val:
            best_val = val
            best_mu = mu
    # local pattern refinement around the best grid marginal
    step = grid_step
    mu = best_mu.copy()
    size = spec.x_size
    while step > 1e-7:
        improved = False
        for i in range(size):
            for j in range(size):
                if i == j:
                    continue
                cand = mu.copy()
                cand[i] += step
                cand[j] -= step
                if cand[j] < 0 or cand[i] > 1:
                    continue
                val = _broken_cycle_value(spec, d, cand, k)
                if val < best_val - 1e-15:
                    best_val, mu = val, cand
                    improved = True
        if not improved:
            step /= 2
    return best_val


def min_pair_distance_at_distortion(
    table: SymbolDistanceTable, measure: DistortionMeasure, delta: float
) -> float:
    """Smallest per-symbol distance among pair pmfs with distortion >= delta.

    A linear objective over the simplex cut by one halfspace attains its
    optimum on a support of at most two atoms, so the exact answer is the
    best of all single atoms meeting the constraint and all straddling
    two-atom mixtures with the constraint tight.
    """
    if table.d.shape != measure.delta_table.shape:
        raise ValidationError("distance and distortion tables must have equal shape")
    if not 0.0 <= delta <= measure.max_value:
        raise ValidationError(
            f"distortion level must be in [0, {measure.max_value}], got {delta}"
        )
    d = table.d.ravel()
    dist = measure.delta_table.ravel()

    best = math.inf
    feas = dist >= delta
    if feas.any():
        best = float(d[feas].min())

    above = dist > delta
    below = dist < delta
    if above.any() and below.any():
        d_a, dist_a = d[above], dist[above]
        d_b, dist_b = d[below], dist[below]
        t = (delta - dist_b[None, :]) / (dist_a[:, None] - dist_b[None, :])
        with np.errstate(invalid="ignore"):
            vals = t * d_a[:, None] + (1.0 - t) * d_b[None, :]
        # inf * t stays inf for t in (0,1); nan can only arise from inf - inf,
        # which the finite distortion table rules out
        best = min(best, float(np.min(vals)))
    return best


@dataclass(frozen=True)
class TradeoffPoint:
    delta: float
    min_distance: float
    xi_min: float
    vacuous: bool


def tradeoff_curve(
    spec: SourceSpec, measure: DistortionMeasure, deltas
) -> list[TradeoffPoint]:
    """Minimal tolerable failed-fragment fraction per distortion level.

    xi_min(delta) = H(p) / min-distance(delta); values above 1 (or infinite,
    when the distance floor is 0) make the trade-off vacuous at that level.
    """
    h = shannon_entropy(spec.p_x)
    table = chernoff_table(spec.channel, 0.5)
    out = []
    for delta in deltas:
        dstar = min_pair_distance_at_distortion(table, measure, delta)
        if dstar == 0.0:
            xi = math.inf
        elif math.isinf(dstar):
            xi = 0.0
        else:
            xi = h / dstar
        out.append(TradeoffPoint(float(delta), dstar, xi, not xi <= 1.0))
    return out


def symmetric_channel_distance(alpha: float, y_size: int) -> float:
    """Off-diagonal Bhattacharyya distance of the uniform-error channel."""
    if y_size < 2:
        raise ValidationError("output alphabet must have size >= 2")
    if not 0.0 <= alpha <= (y_size - 1) / y_size:
        raise ValidationError(
            f"channel parameter must be in [0, {(y_size-1)/y_size:.4f}], got {alpha}"
        )
    inner = math.sqrt(4.0 * (1.0 - alpha) * alpha / (y_size - 1)) + (y_size - 2) * alpha / (
        y_size - 1
    )
    if inner <= 0:
        return math.inf
    return -math.log(inner)


def binary_symmetric_closed_forms(p: float, alpha: float, y_size: int = 2):
    """Closed forms for a (p, 1-p) source through a uniform-error channel.

    Returns (transposition exponent, pairwise confusion coefficient,
    off-diagonal symbol distance). Each must agree with the generic paths
    to 1e-12: the coefficient is exp(-distance), and the exponent is
    0.5 * [H2(p) - log(1 + 2p(1-p)/(p^2+(1-p)^2) * coeff^2)].
    """
    if not 0.0 < p < 1.0:
        raise ValidationError(f"source parameter must be in (0,1), got {p}")
    d_alpha = symmetric_channel_distance(alpha, y_size)
    bc = math.exp(-d_alpha)
    h2 = -math.log(p * p + (1 - p) * (1 - p))
    ratio = 2.0 * p * (1 - p) / (p * p + (1 - p) * (1 - p))
    exponent = 0.5 * (h2 - math.log(1.0 + ratio * bc * bc))
    return exponent, bc, d_alpha


@dataclass(frozen=True)
class RateReport:
    """All rate quantities for one source, with method provenance per value."""

    transposition_exponent: float
    critical_beta: float
    cycle_exponents: dict = field(default_factory=dict)
    min_distance: dict = field(default_factory=dict)
    tradeoff: list = field(default_factory=list)
    source_entropy: float = 0.0
    collision_entropy: float = 0.0
    pair_lower_bound_condition: bool = False
    method_tags: dict = field(default_factory=dict)

    def to_rows(self) -> list[tuple]:
        """Flat (quantity, parameter, value, method) rows for CSV export."""
        rows = [
            ("transposition_exponent", "", self.transposition_exponent,
             self.method_tags.get("transposition_exponent", "closed-form")),
            ("critical_beta", "", self.critical_beta, "closed-form"),
            ("source_entropy", "", self.source_entropy, "closed-form"),
            ("collision_entropy", "", self.collision_entropy, "closed-form"),
            ("pair_lower_bound_condition", "", float(self.pair_lower_bound_condition),
             "closed-form"),
        ]
        for k in sorted(self.cycle_exponents):
            rows.append(("cycle_exponent", str(k), self.cycle_exponents[k],
                         self.method_tags.get(f"cycle_exponent[{k}]", "trace")))
        for delta in sorted(self.min_distance):
            rows.append(("min_distance", f"{delta:g}", self.min_distance[delta], "lp"))
        for pt in self.tradeoff:
            rows.append(("xi_min", f"{pt.delta:g}", pt.xi_min,
                         "vacuous" if pt.vacuous else "lp"))
        return rows

    def to_dict(self) -> dict:
        return {
            "transposition_exponent": self.transposition_exponent,
            "critical_beta": self.critical_beta,
            "source_entropy": self.source_entropy,
            "collision_entropy": self.collision_entropy,
            "pair_lower_bound_condition": self.pair_lower_bound_condition,
            "cycle_exponents": {str(k): v for k, v in sorted(self.cycle_exponents.items())},
            "min_distance": {f"{k:g}": v for k, v in sorted(self.min_distance.items())},
            "tradeoff": [
                {"delta": pt.delta, "min_distance": pt.min_distance,
                 "xi_min": pt.xi_min, "vacuous": pt.vacuous}
                for pt in self.tradeoff
            ],
            "method_tags": dict(self.method_tags),
        }


def rate_report(
    spec: SourceSpec,
    measure: DistortionMeasure | None = None,
    deltas=(),
    k_max: int = 8,
) -> RateReport:
    """Compute the full rate report for a source."""
    exponent = transposition_exponent(spec)
    h2 = collision_entropy(spec.p_x)
    tags = {"transposition_exponent": "closed-form"}
    cycles = {}
    for k in range(2, k_max + 1):
        val, tag = cycle_exponent(spec, k)
        cycles[k] = val
        tags[f"cycle_exponent[{k}]"] = tag
    min_dist = {}
    trade = []
    if measure is not None and len(tuple(deltas)):
        table = chernoff_table(spec.channel, 0.5)
        for delta in deltas:
            min_dist[float(delta)] = min_pair_distance_at_distortion(table, measure, delta)
        trade = tradeoff_curve(spec, measure, deltas)
    return RateReport(
        transposition_exponent=exponent,
        critical_beta=1.0 / exponent,
        cycle_exponents=cycles,
        min_distance=min_dist,
        tradeoff=trade,
        source_entropy=shannon_entropy(spec.p_x),
        collision_entropy=h2,
        pair_lower_bound_condition=exponent < 0.5 * h2,
        method_tags=tags,
    )
