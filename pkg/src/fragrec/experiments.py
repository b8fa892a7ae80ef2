"""Monte Carlo failure-probability estimation, exact small-instance oracles,
slope fits, and sweep orchestration.

Determinism contract: trial t of any cell always uses stream index
(cell base + t), and floating-point accumulators are reduced over fixed-size
trial chunks in index order, so results are identical for any worker count.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .decoder import is_failure, log_channel, reconstruct, solve_assignment
from .distances import DistortionMeasure, chernoff_table
from .model import (
    FragmentConfig,
    RngStream,
    SourceSpec,
    ValidationError,
    collision_entropy,
    shannon_entropy,
)
from .rates import min_pair_distance_at_distortion, transposition_exponent
from .sequences import fragment_and_shuffle
from .stats import clopper_pearson, least_squares_line, rule_of_three_upper

TRIAL_CHUNK = 256

SWEEP_CSV_HEADER = [
    "seed", "M", "L", "beta", "source", "channel_param", "delta", "xi",
    "trials", "failures", "fp_hat", "ci_lo", "ci_hi", "mean_xi", "runtime_ms",
]


@dataclass(frozen=True)
class CellResult:
    """Aggregated Monte Carlo estimate for one parameter cell."""

    seed: int
    m: int
    l: int
    beta: float
    source: str
    channel_param: str
    delta: float
    xi: float
    trials: int
    failures: int
    fp_hat: float
    ci_lo: float
    ci_hi: float
    mean_xi: float
    runtime_ms: float

    def csv_row(self) -> list[str]:
        return [
            str(self.seed), str(self.m), str(self.l), f"{self.beta:.6f}",
            self.source, self.channel_param, f"{self.delta:g}", f"{self.xi:g}",
            str(self.trials), str(self.failures), repr(self.fp_hat),
            repr(self.ci_lo), repr(self.ci_hi), repr(self.mean_xi),
            f"{self.runtime_ms:.1f}",
        ]

    def key(self) -> tuple:
        return (self.seed, self.m, self.l, f"{self.beta:.6f}", self.source,
                self.channel_param, f"{self.delta:g}", f"{self.xi:g}", self.trials)


def _run_chunk(spec, config, measure, delta, xi, seed, start, count):
    failures = 0
    sum_xi = 0.0
    base = RngStream(seed, start)
    for t in range(count):
        inst = fragment_and_shuffle(spec, config, base.shifted(t))
        recon = reconstruct(inst, spec, measure, delta)
        sum_xi += recon.fail_fraction
        if is_failure(recon, xi):
            failures += 1
    return start, failures, sum_xi


def _map_chunks(spec, config, measure, delta, xi, seed, base_index, trials, threads):
    chunks = [
        (base_index + off, min(TRIAL_CHUNK, trials - off))
        for off in range(0, trials, TRIAL_CHUNK)
    ]
    if threads <= 1 or len(chunks) == 1:
        results = [
            _run_chunk(spec, config, measure, delta, xi, seed, s, c) for s, c in chunks
        ]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_run_chunk, spec, config, measure, delta, xi, seed, s, c)
                for s, c in chunks
            ]
            results = [f.result() for f in futs]
    results.sort(key=lambda r: r[0])
    failures = sum(r[1] for r in results)
    sum_xi = 0.0
    for r in results:  # fixed order so the float sum is reproducible
        sum_xi += r[2]
    return failures, sum_xi


def estimate_fp(
    spec: SourceSpec,
    config: FragmentConfig,
    measure: DistortionMeasure,
    delta: float,
    xi: float,
    trials: int,
    rng: RngStream,
    threads: int = 1,
    source_label: str = "",
    channel_label: str = "",
) -> CellResult:
    """Monte Carlo estimate of the reconstruction failure probability.

    Trial t uses stream index rng.stream_index + t, so estimates are
    deterministic in (seed, plan) and independent of thread scheduling.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    t0 = time.perf_counter()
    failures, sum_xi = _map_chunks(
        spec, config, measure, delta, xi, rng.master_seed, rng.stream_index, trials, threads
    )
    lo, hi = clopper_pearson(failures, trials, 0.95)
    return CellResult(
        seed=rng.master_seed,
        m=config.m,
        l=config.l,
        beta=config.beta_effective,
        source=source_label,
        channel_param=channel_label,
        delta=delta,
        xi=xi,
        trials=trials,
        failures=failures,
        fp_hat=failures / trials,
        ci_lo=lo,
        ci_hi=hi,
        mean_xi=sum_xi / trials,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
    )


def _digit_rows(count: int, length: int, base: int) -> np.ndarray:
    out = np.empty((count, length), dtype=np.int64)
    v = np.arange(count)
    for t in range(length - 1, -1, -1):
        out[:, t] = v % base
        v //= base
    return out


def exact_transposition_probability(spec: SourceSpec, l: int) -> float:
    """Exact probability that swapping two length-l fragments looks at least
    as likely as the true order, for distinct fragments.

    Direct enumeration over all fragment and reference pairs, organized in
    the log domain. The budget guard keeps |X|^(2l) |Y|^(2l) <= 1e8.
    """
    if l < 1:
        raise ValidationError("fragment length must be >= 1")
    qx, qy = spec.x_size, spec.y_size
    if (qx ** (2 * l)) * (qy ** (2 * l)) > 10 ** 8:
        raise ValidationError("enumeration budget exceeded")
    nx, ny = qx ** l, qy ** l
    xrows = _digit_rows(nx, l, qx)
    yrows = _digit_rows(ny, l, qy)
    logp = log_channel(spec)
    loglik = np.zeros((nx, ny))
    for t in range(l):
        loglik += logp[xrows[:, t][:, None], yrows[:, t][None, :]]
    log_px = np.log(spec.p_x.probs)
    p_seq = np.exp(log_px[xrows].sum(axis=1))
    w = np.exp(loglik)  # P(y-seq | x-seq)
    total = 0.0
    with np.errstate(invalid="ignore"):
        # -inf minus -inf gives nan for references impossible under both
        # fragments; their likelihood weight is exactly 0, so the comparison
        # result is irrelevant
        for a in range(nx):
            ga, wa = loglik[a], w[a]
            for b in range(nx):
                if a == b:
                    continue
                diff = ga - loglik[b]
                swapped_at_least = diff[None, :] >= diff[:, None]
                inner = wa @ swapped_at_least @ w[b]
                total += p_seq[a] * p_seq[b] * inner
    return float(total)


@dataclass(frozen=True)
class PairwiseReport:
    l_values: list
    probabilities: list
    bounds: list
    rates: list  # -log P / (2 l)
    exponent: float
    condition_holds: bool  # exponent < half the collision entropy


def pairwise_probability_table(spec: SourceSpec, l_values) -> PairwiseReport:
    exponent = transposition_exponent(spec)
    probs, bounds, rates = [], [], []
    for l in l_values:
        p = exact_transposition_probability(spec, l)
        probs.append(p)
        bounds.append(math.exp(-2 * l * exponent))
        rates.append(-math.log(p) / (2 * l) if p > 0 else math.inf)
    return PairwiseReport(
        l_values=list(l_values),
        probabilities=probs,
        bounds=bounds,
        rates=rates,
        exponent=exponent,
        condition_holds=exponent < 0.5 * collision_entropy(spec.p_x),
    )


def exact_failure_probability(
    spec: SourceSpec,
    config: FragmentConfig,
    measure: DistortionMeasure,
    delta: float,
    xi: float,
) -> float:
    """Ground-truth failure probability by full enumeration of (x, y) pairs.

    Sums P(x) P(y|x) over every source and reference realization, averaging
    over all fragment presentation orders, and runs the real decoder on each,
    so tie-breaking matches Monte Carlo exactly. Budget-guarded; intended for
    tiny instances (m = 2, l <= 3).
    """
    m, l, n = config.m, config.l, config.n
    qx, qy = spec.x_size, spec.y_size
    budget = (qx ** n) * (qy ** n) * math.factorial(m)
    if budget > 10 ** 8:
        raise ValidationError("enumeration budget exceeded")
    logp = log_channel(spec)
    log_px = np.log(spec.p_x.probs)
    orders = list(itertools.permutations(range(m)))
    x_all = _digit_rows(qx ** n, n, qx)
    y_all = _digit_rows(qy ** n, n, qy)
    total = 0.0
    for x_row in x_all:
        truth = x_row.reshape(m, l)
        px = math.exp(log_px[x_row].sum())
        for y_row in y_all:
            log_py = logp[x_row, y_row].sum()
            if log_py == -math.inf:
                continue
            py = math.exp(log_py)
            yfrags = y_row.reshape(m, l)
            fail_weight = 0.0
            for order in orders:
                frags = truth[list(order)]
                w = logp[frags[:, None, :], yfrags[None, :, :]].sum(axis=2)
                assignment, _ = solve_assignment(w)
                decoded = frags[assignment]
                per_slot = measure.delta_table[truth, decoded].mean(axis=1)
                if delta > 0:
                    fails = per_slot >= delta
                else:
                    fails = per_slot > 0
                frac = float(fails.mean())
                failed = frac >= xi if xi > 0 else frac > 0
                if failed:
                    fail_weight += 1.0
            total += px * py * (fail_weight / len(orders))
    return total


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    used_cells: int
    excluded: list  # (m, rule-of-three upper bound) for zero-failure cells


def slope_fit(results: list[CellResult]) -> SlopeFit:
    """Least-squares slope of log fp against log m.

    Zero-failure cells cannot enter a log fit; they are excluded and reported
    with their one-sided 95% upper bound instead.
    """
    usable = [r for r in results if r.failures > 0]
    excluded = [(r.m, rule_of_three_upper(r.trials)) for r in results if r.failures == 0]
    if len(usable) < 3:
        raise ValidationError("need at least 3 cells with observed failures for a slope")
    xs = [math.log(r.m) for r in usable]
    ys = [math.log(r.fp_hat) for r in usable]
    slope, stderr = least_squares_line(xs, ys)
    return SlopeFit(slope=slope, stderr=stderr, used_cells=len(usable), excluded=excluded)


@dataclass(frozen=True)
class TradeoffExperimentReport:
    xi_min: float
    beta_condition_holds: bool  # beta * H(p) < 1
    cells: list  # CellResult per (m, xi)
    transition_xi: dict  # m -> first xi with fp_hat <= 0.5


def tradeoff_experiment(
    spec: SourceSpec,
    beta: float,
    m_grid,
    measure: DistortionMeasure,
    delta: float,
    xi_grid,
    trials: int,
    rng: RngStream,
    threads: int = 1,
    source_label: str = "",
    channel_label: str = "",
) -> TradeoffExperimentReport:
    """Scan failure probability over xi for each fragment count.

    Reports where the estimate crosses 1/2 and the threshold xi implied by
    the rate analysis. Only the one-sided claim is assertable: well above
    the threshold the failure probability falls with m.
    """
    h = shannon_entropy(spec.p_x)
    table = chernoff_table(spec.channel, 0.5)
    dstar = min_pair_distance_at_distortion(table, measure, delta)
    xi_min = h / dstar if dstar > 0 else math.inf
    cells = []
    cell_index = 0
    for m in m_grid:
        config = FragmentConfig(m=int(m), beta=beta)
        for xi in xi_grid:
            base = rng.shifted(cell_index * trials)
            cell_index += 1
            cells.append(
                estimate_fp(
                    spec, config, measure, delta, float(xi), trials, base,
                    threads=threads, source_label=source_label,
                    channel_label=channel_label,
                )
            )
    transition = {}
    for c in cells:
        if c.fp_hat <= 0.5 and c.m not in transition:
            transition[c.m] = c.xi
    return TradeoffExperimentReport(
        xi_min=xi_min,
        beta_condition_holds=beta * h < 1.0,
        cells=cells,
        transition_xi=transition,
    )


@dataclass(frozen=True)
class SweepPlan:
    """Cartesian sweep over fragment counts, lengths, and thresholds."""

    source: str
    channel: str
    m_grid: tuple
    delta_grid: tuple
    xi_grid: tuple
    trials: int
    seed: int
    beta_grid: tuple = ()
    l_grid: tuple = ()
    alpha_grid: tuple = ()

    def __post_init__(self):
        if bool(self.beta_grid) == bool(self.l_grid):
            raise ValidationError("give exactly one of beta_grid or l_grid")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.m_grid:
            raise ValidationError("m_grid must be non-empty")

    @staticmethod
    def from_json(path) -> "SweepPlan":
        with open(path) as fh:
            raw = json.load(fh)
        return SweepPlan(
            source=raw["source"],
            channel=raw["channel"],
            m_grid=tuple(raw["m_grid"]),
            delta_grid=tuple(raw.get("delta_grid", [0.0])),
            xi_grid=tuple(raw.get("xi_grid", [0.0])),
            trials=int(raw["trials"]),
            seed=int(raw["seed"]),
            beta_grid=tuple(raw.get("beta_grid", [])),
            l_grid=tuple(raw.get("l_grid", [])),
            alpha_grid=tuple(raw.get("alpha_grid", [])),
        )

    def to_json(self) -> dict:
        return asdict(self)

    def cells(self):
        """Deterministic cell enumeration; each cell owns a disjoint stream range."""
        frag_axis = [("beta", b) for b in self.beta_grid] or [("l", l) for l in self.l_grid]
        alpha_axis = list(self.alpha_grid) or [None]
        grid = itertools.product(self.m_grid, frag_axis, alpha_axis,
                                 self.delta_grid, self.xi_grid)
        for ordinal, (m, frag, alpha, delta, xi) in enumerate(grid):
            yield ordinal, int(m), frag, alpha, float(delta), float(xi)


def run_sweep(
    plan: SweepPlan,
    out_path,
    threads: int = 1,
    resolve=None,
    echo: dict | None = None,
) -> list[CellResult]:
    """Execute a sweep, streaming rows to CSV; completed cells are skipped.

    ``resolve`` maps (source, channel, alpha) to (SourceSpec, measure,
    channel_label); the CLI supplies it. Results are resumable: rows already
    present in the output match by parameter key and are not recomputed.
    """
    if resolve is None:
        raise ValidationError("run_sweep needs a resolver for source/channel presets")
    done_keys = set()
    existing = read_sweep_rows(out_path)
    for row in existing:
        done_keys.add(_row_key(row))
    new_file = not existing
    results: list[CellResult] = []
    mode = "a" if existing else "w"
    with open(out_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            for line in _comment_lines(echo or {}):
                fh.write(line + "\n")
            writer.writerow(SWEEP_CSV_HEADER)
        for ordinal, m, frag, alpha, delta, xi in plan.cells():
            spec, measure, channel_label = resolve(plan.source, plan.channel, alpha)
            if frag[0] == "beta":
                config = FragmentConfig(m=m, beta=float(frag[1]))
            else:
                config = FragmentConfig(m=m, l=int(frag[1]))
            base = RngStream(plan.seed, ordinal * plan.trials)
            probe = CellResult(
                seed=plan.seed, m=m, l=config.l, beta=config.beta_effective,
                source=plan.source, channel_param=channel_label, delta=delta,
                xi=xi, trials=plan.trials, failures=0, fp_hat=0.0, ci_lo=0.0,
                ci_hi=0.0, mean_xi=0.0, runtime_ms=0.0,
            )
            if probe.key() in done_keys:
                continue
            try:
                cell = estimate_fp(
                    spec, config, measure, delta, xi, plan.trials, base,
                    threads=threads, source_label=plan.source,
                    channel_label=channel_label,
                )
            except Exception as exc:
                raise RuntimeError(
                    f"sweep cell failed (M={m}, L={config.l}, delta={delta}, xi={xi}): {exc}"
                ) from exc
            writer.writerow(cell.csv_row())
            fh.flush()
            results.append(cell)
    return results


def _comment_lines(echo: dict) -> list[str]:
    return [f"# {k}={v}" for k, v in echo.items()]


def _row_key(row: dict) -> tuple:
    return (
        int(row["seed"]), int(row["M"]), int(row["L"]), f"{float(row['beta']):.6f}",
        row["source"], row["channel_param"], f"{float(row['delta']):g}",
        f"{float(row['xi']):g}", int(row["trials"]),
    )


def read_sweep_rows(path) -> list[dict]:
    """Parse a sweep CSV, skipping provenance comment lines."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        return []
    with fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    if not lines:
        return []
    reader = csv.DictReader(lines)
    return list(reader)
