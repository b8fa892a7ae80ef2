import math

import numpy as np
import pytest

from fragrec.distances import (
    DistortionMeasure,
    chernoff_table,
    fragment_distance,
    fragment_distortion,
    joint_type,
    type_distance,
    type_distortion,
)
from fragrec.model import ChannelKernel, ValidationError


BSC01_OFFDIAG = -math.log(math.sqrt(4 * 0.1 * 0.9))  # -log 0.6


def random_channel(gen, nx, ny):
    rows = gen.random((nx, ny)) + 0.05
    return ChannelKernel(rows / rows.sum(axis=1, keepdims=True))


class TestChernoffTable:
    def test_bsc_bhattacharyya_offdiagonal(self):
        t = chernoff_table(ChannelKernel.bsc(0.1), 0.5)
        assert t.d[0, 1] == pytest.approx(BSC01_OFFDIAG, abs=1e-12)

    def test_diagonal_is_zero(self):
        gen = np.random.default_rng(0)
        t = chernoff_table(random_channel(gen, 4, 5), 0.3)
        assert np.all(np.diagonal(t.d) == 0.0)

    def test_identity_channel_gives_infinite_distance(self):
        t = chernoff_table(ChannelKernel.identity(3), 0.5)
        off = t.d[~np.eye(3, dtype=bool)]
        assert np.all(np.isinf(off))

    def test_half_table_symmetric(self):
        gen = np.random.default_rng(1)
        t = chernoff_table(random_channel(gen, 5, 3), 0.5)
        assert np.allclose(t.d, t.d.T, atol=1e-13)

    def test_parameter_swap_transposes(self):
        gen = np.random.default_rng(2)
        ch = random_channel(gen, 4, 4)
        for s in (0.2, 0.35, 0.7):
            a = chernoff_table(ch, s).d
            b = chernoff_table(ch, 1 - s).d
            assert np.allclose(a, b.T, atol=1e-12)

    def test_concave_in_s(self):
        # second differences on a 0.01 grid are non-positive for finite entries
        for ch in (ChannelKernel.bsc(0.1), random_channel(np.random.default_rng(3), 3, 4)):
            grid = np.arange(0.0, 1.0 + 1e-9, 0.01)
            vals = np.array([chernoff_table(ch, s).d for s in grid])
            second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
            finite = np.isfinite(vals).all(axis=0)
            assert np.all(second[:, finite] <= 1e-9)

    def test_midpoint_dominance(self):
        gen = np.random.default_rng(4)
        ch = random_channel(gen, 3, 3)
        mid = chernoff_table(ch, 0.5).d
        for s in np.arange(0.0, 1.0 + 1e-9, 0.01):
            a = chernoff_table(ch, float(s)).d
            b = chernoff_table(ch, float(1 - s)).d
            assert np.all(0.5 * a + 0.5 * b <= mid + 1e-9)

    def test_non_negative(self):
        gen = np.random.default_rng(5)
        for _ in range(5):
            t = chernoff_table(random_channel(gen, 4, 6), float(gen.random()))
            assert np.all(t.d >= 0)


class TestFragmentDistance:
    def test_equal_fragments_zero(self):
        t = chernoff_table(ChannelKernel.bsc(0.1))
        frag = np.array([0, 1, 1, 0])
        assert fragment_distance(t, frag, frag) == 0.0

    def test_additivity_over_mismatches(self):
        t = chernoff_table(ChannelKernel.bsc(0.1))
        a = np.array([0, 0, 0, 0, 0])
        b = np.array([1, 1, 0, 0, 1])
        assert fragment_distance(t, a, b) == pytest.approx(3 * BSC01_OFFDIAG, abs=1e-12)

    def test_type_evaluation_agrees_with_direct_sum(self):
        gen = np.random.default_rng(6)
        ch = random_channel(gen, 3, 4)
        t = chernoff_table(ch)
        for _ in range(20):
            l = int(gen.integers(2, 40))
            a = gen.integers(0, 3, size=l)
            b = gen.integers(0, 3, size=l)
            q = joint_type(a, b, 3)
            assert fragment_distance(t, a, b) == pytest.approx(
                l * type_distance(t, q), abs=1e-12
            )

    def test_length_mismatch_rejected(self):
        t = chernoff_table(ChannelKernel.bsc(0.1))
        with pytest.raises(ValidationError):
            fragment_distance(t, np.array([0, 1]), np.array([0]))


class TestTypeDistance:
    def test_diagonal_type_zero(self):
        t = chernoff_table(ChannelKernel.bsc(0.1))
        assert type_distance(t, np.diag([0.5, 0.5])) == 0.0

    def test_uniform_offdiagonal_binary(self):
        t = chernoff_table(ChannelKernel.bsc(0.1))
        q = np.array([[0.0, 0.5], [0.5, 0.0]])
        assert type_distance(t, q) == pytest.approx(BSC01_OFFDIAG, abs=1e-12)

    def test_product_type_matches_brute_expectation(self):
        gen = np.random.default_rng(7)
        ch = random_channel(gen, 3, 3)
        t = chernoff_table(ch)
        p = gen.random(3) + 0.1
        p /= p.sum()
        q = np.outer(p, p)
        brute = sum(
            p[i] * p[j] * t.d[i, j] for i in range(3) for j in range(3)
        )
        assert type_distance(t, q) == pytest.approx(brute, rel=1e-12)

    def test_infinite_entry_with_mass(self):
        t = chernoff_table(ChannelKernel.identity(2))
        q = np.array([[0.25, 0.25], [0.25, 0.25]])
        assert type_distance(t, q) == math.inf

    def test_rejects_non_pmf(self):
        t = chernoff_table(ChannelKernel.bsc(0.1))
        with pytest.raises(ValidationError):
            type_distance(t, np.array([[0.5, 0.2], [0.1, 0.1]]))


class TestDistortion:
    def test_identical_fragments(self):
        m = DistortionMeasure.hamming(2)
        frag = np.array([0, 1, 0])
        assert fragment_distortion(m, frag, frag) == 0.0

    def test_hamming_counts_mismatches(self):
        m = DistortionMeasure.hamming(2)
        assert fragment_distortion(
            m, np.array([0, 0, 0, 0]), np.array([1, 0, 0, 0])
        ) == pytest.approx(0.25)

    def test_type_path_agrees_with_average(self):
        gen = np.random.default_rng(8)
        table = gen.random((3, 3)) * 2
        table = (table + table.T) / 2
        np.fill_diagonal(table, 0.0)
        m = DistortionMeasure(table)
        for _ in range(20):
            l = int(gen.integers(2, 30))
            a = gen.integers(0, 3, size=l)
            b = gen.integers(0, 3, size=l)
            q = joint_type(a, b, 3)
            assert fragment_distortion(m, a, b) == pytest.approx(
                type_distortion(m, q), abs=1e-12
            )

    def test_diagonal_must_be_zero(self):
        with pytest.raises(ValidationError):
            DistortionMeasure(np.array([[0.1, 1.0], [1.0, 0.0]]))


class TestMatrixFiles:
    def test_channel_from_file(self, tmp_path):
        path = tmp_path / "channel.txt"
        path.write_text("0.9 0.1\n0.2 0.8\n")
        ch = ChannelKernel.from_file(path)
        assert ch.rows[1, 0] == pytest.approx(0.2)

    def test_distortion_from_file(self, tmp_path):
        path = tmp_path / "measure.txt"
        path.write_text("0 2.5\n2.5 0\n")
        m = DistortionMeasure.from_file(path)
        assert m.max_value == 2.5
