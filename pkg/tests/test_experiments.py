import math

import pytest

from fragrec.distances import DistortionMeasure
from fragrec.experiments import (
    CellResult,
    SweepPlan,
    estimate_fp,
    exact_failure_probability,
    exact_transposition_probability,
    pairwise_probability_table,
    read_sweep_rows,
    run_sweep,
    slope_fit,
    tradeoff_experiment,
)
from fragrec.model import (
    ChannelKernel,
    FragmentConfig,
    Pmf,
    RngStream,
    SourceSpec,
    ValidationError,
)
from fragrec.stats import clopper_pearson


def uniform_bsc(alpha=0.1):
    return SourceSpec.make(Pmf.uniform(2), ChannelKernel.bsc(alpha))


HAMMING2 = DistortionMeasure.hamming(2)


class TestEstimateFp:
    def test_identity_channel_never_fails(self):
        spec = SourceSpec.make(Pmf.uniform(2), ChannelKernel.identity(2))
        cfg = FragmentConfig(m=8, l=6)
        cell = estimate_fp(spec, cfg, HAMMING2, 0.0, 0.0, 300, RngStream(0, 0))
        assert cell.failures == 0
        assert cell.fp_hat == 0.0
        assert cell.ci_lo == 0.0

    def test_deterministic_across_thread_counts(self):
        spec = uniform_bsc(0.1)
        cfg = FragmentConfig(m=12, beta=4.0)
        a = estimate_fp(spec, cfg, HAMMING2, 0.0, 0.0, 600, RngStream(7, 0), threads=1)
        b = estimate_fp(spec, cfg, HAMMING2, 0.0, 0.0, 600, RngStream(7, 0), threads=2)
        assert a.failures == b.failures
        assert a.mean_xi == b.mean_xi
        assert a.fp_hat == b.fp_hat

    def test_not_increasing_in_beta(self):
        spec = uniform_bsc(0.1)
        cells = []
        for idx, beta in enumerate((2.0, 6.0)):
            cfg = FragmentConfig(m=16, beta=beta)
            cells.append(
                estimate_fp(spec, cfg, HAMMING2, 0.0, 0.0, 400, RngStream(8, idx * 400))
            )
        assert cells[0].ci_hi >= cells[1].ci_lo  # longer fragments cannot be worse

    def test_ci_brackets_estimate(self):
        spec = uniform_bsc(0.2)
        cfg = FragmentConfig(m=8, beta=2.0)
        cell = estimate_fp(spec, cfg, HAMMING2, 0.0, 0.0, 200, RngStream(9, 0))
        assert cell.ci_lo <= cell.fp_hat <= cell.ci_hi

    def test_monotone_in_distortion_level(self):
        # shared streams: raising delta can only shrink each trial's failure set
        spec = uniform_bsc(0.2)
        cfg = FragmentConfig(m=10, beta=1.5)
        counts = [
            estimate_fp(spec, cfg, HAMMING2, delta, 0.2, 300, RngStream(20, 0)).failures
            for delta in (0.0, 0.25, 0.5, 1.0)
        ]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_monotone_in_failure_level(self):
        spec = uniform_bsc(0.2)
        cfg = FragmentConfig(m=10, beta=1.5)
        counts = [
            estimate_fp(spec, cfg, HAMMING2, 0.0, xi, 300, RngStream(21, 0)).failures
            for xi in (0.0, 0.2, 0.5, 0.9)
        ]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_monotone_in_channel_quality(self):
        # cleaner channels cannot be significantly worse (interval ordering)
        cfg = FragmentConfig(m=12, beta=3.0)
        cells = [
            estimate_fp(
                uniform_bsc(alpha), cfg, HAMMING2, 0.0, 0.0, 400,
                RngStream(22, idx * 400),
            )
            for idx, alpha in enumerate((0.02, 0.1, 0.25))
        ]
        for cleaner, noisier in zip(cells, cells[1:]):
            assert cleaner.ci_lo <= noisier.ci_hi
            assert cleaner.fp_hat <= noisier.fp_hat

    def test_below_threshold_regime_shows_no_decay(self):
        # beta far under the critical value: failure probability stays high
        spec = uniform_bsc(0.1)
        cells = []
        for idx, m in enumerate((8, 16, 32)):
            cfg = FragmentConfig(m=m, beta=2.0)
            cells.append(
                estimate_fp(spec, cfg, HAMMING2, 0.0, 0.0, 300, RngStream(23, idx * 300))
            )
        assert all(c.fp_hat > 0.5 for c in cells)
        fit = slope_fit(cells)
        assert fit.slope > -0.5


class TestExactTranspositionProbability:
    def test_identity_channel_is_zero(self):
        spec = SourceSpec.make(Pmf.uniform(2), ChannelKernel.identity(2))
        assert exact_transposition_probability(spec, 2) == 0.0

    def test_golden_value_single_symbol(self):
        # 16-term sum for the binary symmetric case at 0.1
        spec = uniform_bsc(0.1)
        assert exact_transposition_probability(spec, 1) == pytest.approx(0.095, abs=1e-12)

    def test_budget_guard(self):
        spec = SourceSpec.make(Pmf.uniform(4), ChannelKernel.symmetric(0.1, 4))
        with pytest.raises(ValidationError):
            exact_transposition_probability(spec, 8)

    def test_table_monotone_and_bounded(self):
        spec = uniform_bsc(0.1)
        report = pairwise_probability_table(spec, range(1, 5))
        assert report.condition_holds
        for p, b in zip(report.probabilities, report.bounds):
            assert p <= b * (1 + 1e-12)
        assert all(
            r1 >= r2 - 1e-12 for r1, r2 in zip(report.rates, report.rates[1:])
        )


class TestExactFailureProbability:
    def test_identity_channel_zero(self):
        spec = SourceSpec.make(Pmf.uniform(2), ChannelKernel.identity(2))
        cfg = FragmentConfig(m=2, l=1)
        assert exact_failure_probability(spec, cfg, HAMMING2, 0.0, 0.0) == 0.0

    def test_monte_carlo_agreement_small_case(self):
        spec = uniform_bsc(0.25)
        cfg = FragmentConfig(m=2, l=1)
        exact = exact_failure_probability(spec, cfg, HAMMING2, 0.0, 0.0)
        cell = estimate_fp(spec, cfg, HAMMING2, 0.0, 0.0, 20_000, RngStream(10, 0))
        lo, hi = clopper_pearson(cell.failures, cell.trials, 0.999)
        assert lo <= exact <= hi

    def test_budget_guard(self):
        spec = uniform_bsc(0.1)
        cfg = FragmentConfig(m=4, l=8)
        with pytest.raises(ValidationError):
            exact_failure_probability(spec, cfg, HAMMING2, 0.0, 0.0)


def _cell(m, trials, failures, seed=1):
    fp = failures / trials
    return CellResult(
        seed=seed, m=m, l=10, beta=2.0, source="uniform:2", channel_param="0.1",
        delta=0.0, xi=0.0, trials=trials, failures=failures, fp_hat=fp,
        ci_lo=0.0, ci_hi=1.0, mean_xi=fp, runtime_ms=0.0,
    )


class TestSlopeFit:
    def test_recovers_synthetic_power_law(self):
        cells = []
        c = 0.9
        for m in (16, 32, 64, 128):
            fp = c * m ** -1.08
            trials = 10 ** 6
            cells.append(_cell(m, trials, round(fp * trials)))
        fit = slope_fit(cells)
        assert fit.slope == pytest.approx(-1.08, abs=5e-3)
        assert fit.used_cells == 4

    def test_zero_failure_cells_excluded_and_reported(self):
        cells = [_cell(16, 1000, 100), _cell(32, 1000, 50),
                 _cell(64, 1000, 25), _cell(128, 1000, 0)]
        fit = slope_fit(cells)
        assert fit.used_cells == 3
        assert fit.excluded == [(128, pytest.approx(-math.log(0.05) / 1000))]

    def test_needs_three_usable_cells(self):
        with pytest.raises(ValidationError):
            slope_fit([_cell(16, 100, 5), _cell(32, 100, 2)])


class TestTradeoffExperiment:
    def test_report_structure_and_threshold(self):
        spec = SourceSpec.make(Pmf.bernoulli(0.0205), ChannelKernel.bsc(0.1))
        report = tradeoff_experiment(
            spec, 0.5, (16, 32), HAMMING2, 0.5, (0.05, 0.9), 150, RngStream(11, 0)
        )
        assert report.beta_condition_holds
        assert report.xi_min == pytest.approx(0.3915, abs=2e-3)
        assert len(report.cells) == 4
        # at xi = 0.9 nearly everything may fail without tripping the threshold
        high_xi = [c for c in report.cells if c.xi == 0.9]
        assert all(c.fp_hat == 0.0 for c in high_xi)
        assert set(report.transition_xi) <= {16, 32}


class TestSweep:
    def _plan(self, tmp_path, trials=5, m_grid=(4, 8)):
        return SweepPlan(
            source="uniform:2", channel="bsc:0.1", m_grid=m_grid,
            delta_grid=(0.0,), xi_grid=(0.0,), trials=trials, seed=77,
            beta_grid=(2.0,),
        )

    def _resolve(self, source, channel, alpha):
        from fragrec.cli import build_spec

        spec, _, label = build_spec(source, channel, alpha)
        return spec, HAMMING2, label

    def test_single_cell_single_trial(self, tmp_path):
        plan = SweepPlan(
            source="uniform:2", channel="bsc:0.1", m_grid=(4,),
            delta_grid=(0.0,), xi_grid=(0.0,), trials=1, seed=5, beta_grid=(1.0,),
        )
        path = tmp_path / "sweep.csv"
        cells = run_sweep(plan, path, resolve=self._resolve, echo={"k": "v"})
        assert len(cells) == 1
        rows = read_sweep_rows(path)
        assert len(rows) == 1
        assert rows[0]["M"] == "4"

    def test_csv_header_is_pinned(self, tmp_path):
        plan = SweepPlan(
            source="uniform:2", channel="bsc:0.1", m_grid=(4,),
            delta_grid=(0.0,), xi_grid=(0.0,), trials=1, seed=5, beta_grid=(1.0,),
        )
        path = tmp_path / "sweep.csv"
        run_sweep(plan, path, resolve=self._resolve)
        with open(path) as fh:
            header = next(ln for ln in fh if not ln.startswith("#")).strip()
        assert header == (
            "seed,M,L,beta,source,channel_param,delta,xi,trials,failures,"
            "fp_hat,ci_lo,ci_hi,mean_xi,runtime_ms"
        )

    def test_rerun_is_identical_except_runtime(self, tmp_path):
        plan = self._plan(tmp_path)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run_sweep(plan, p1, resolve=self._resolve)
        run_sweep(plan, p2, resolve=self._resolve, threads=2)
        rows1 = [{k: v for k, v in r.items() if k != "runtime_ms"} for r in read_sweep_rows(p1)]
        rows2 = [{k: v for k, v in r.items() if k != "runtime_ms"} for r in read_sweep_rows(p2)]
        assert rows1 == rows2

    def test_resume_skips_completed_cells(self, tmp_path):
        plan = self._plan(tmp_path)
        full = tmp_path / "full.csv"
        run_sweep(plan, full, resolve=self._resolve)
        all_rows = read_sweep_rows(full)
        # simulate an interrupted run: keep only the first data row
        partial = tmp_path / "partial.csv"
        with open(full) as fh:
            lines = fh.readlines()
        header_end = next(i for i, ln in enumerate(lines) if ln.startswith("seed"))
        partial.write_text("".join(lines[: header_end + 2]))
        new_cells = run_sweep(plan, partial, resolve=self._resolve)
        assert len(new_cells) == len(all_rows) - 1
        resumed = read_sweep_rows(partial)
        strip = lambda rows: sorted(
            tuple(v for k, v in r.items() if k != "runtime_ms") for r in rows
        )
        assert strip(resumed) == strip(all_rows)

    def test_plan_json_roundtrip(self, tmp_path):
        plan = self._plan(tmp_path)
        path = tmp_path / "plan.json"
        import json

        path.write_text(json.dumps(plan.to_json()))
        loaded = SweepPlan.from_json(path)
        assert loaded == plan

    def test_plan_validation(self):
        with pytest.raises(ValidationError):
            SweepPlan(
                source="uniform:2", channel="bsc:0.1", m_grid=(4,),
                delta_grid=(0.0,), xi_grid=(0.0,), trials=1, seed=5,
            )
