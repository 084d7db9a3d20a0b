"""
Unit tests for the stdev and Neyman allocation confidence sequences
"""
import numpy as np
import pytest

from src.concentration.confidence_sequences import (
    BoundaryTimeMode,
    CsParams,
    boundary,
    boundary_values,
    neyman_cs,
    stdev_cs,
    stdev_cs_bounds,
)
from src.models.core import ArmStats, DomainError, Interval


class TestBoundary:
    """Test the iterated-logarithm boundary"""

    def test_known_values(self):
        """Test boundary at n = 2 and n = 100"""
        assert boundary(2, 0.05) == pytest.approx(3.67059, abs=1e-4)
        assert boundary(100, 0.05) == pytest.approx(5.01139, abs=1e-4)

    def test_increasing_in_n(self):
        """Test the boundary grows with n and shrinks with delta"""
        assert boundary(1000, 0.05) > boundary(100, 0.05)
        assert boundary(100, 0.01) > boundary(100, 0.05)

    @pytest.mark.parametrize("n,delta", [(1, 0.05), (0, 0.05), (10, 0.0), (10, 1.0)])
    def test_domain(self, n, delta):
        """Test n < 2 and delta outside (0, 1) are rejected"""
        with pytest.raises(DomainError):
            boundary(n, delta)

    def test_array_lookup_matches_scalar(self):
        """Test table lookups agree bit for bit with the scalar formula"""
        ns = np.array([0, 1, 2, 3, 17, 999, 40000])
        values = boundary_values(ns, 0.01)
        for n, value in zip(ns, values):
            assert value == boundary(max(int(n), 2), 0.01)


class TestStdevCs:
    """Test the per-arm stdev confidence sequence"""

    def test_vacuous_without_data(self):
        """Test count 0 and 1 give [0, 0.5]"""
        params = CsParams(delta=0.05)
        assert stdev_cs(ArmStats(), params) == Interval(0.0, 0.5)
        assert stdev_cs(ArmStats(count=1, mean=1.0, m2=0.0), params) == Interval(0.0, 0.5)

    def test_known_interval(self):
        """Test count 100 with sigma hat 0.5"""
        stats = ArmStats(count=100, mean=0.5, m2=25.0)
        interval = stdev_cs(stats, CsParams(delta=0.05))
        assert interval.lo == pytest.approx(0.11944, abs=1e-4)
        assert interval.hi == 0.5

    def test_collapses_with_data(self):
        """Test the width shrinks as the count grows"""
        params = CsParams(delta=0.05)
        widths = [
            stdev_cs(ArmStats(count=n, mean=0.5, m2=0.16 * n), params).width
            for n in (100, 10_000, 1_000_000)
        ]
        assert widths[0] > widths[1] > widths[2]
        assert widths[2] < 0.02

    def test_total_time_mode(self):
        """Test the total count feeds the boundary in total_time mode"""
        stats = ArmStats(count=5000, mean=0.5, m2=0.04 * 5000)
        arm = CsParams(delta=0.05)
        total = CsParams(delta=0.05, boundary_time_mode=BoundaryTimeMode.TOTAL_TIME)
        lo_arm, hi_arm = stdev_cs_bounds(stats, arm, total_count=100_000)
        lo_total, hi_total = stdev_cs_bounds(stats, total, total_count=100_000)
        assert 0.0 < lo_total < lo_arm
        assert hi_arm < hi_total

    def test_per_arm_split(self):
        """Test delta is divided across the good-event components"""
        params = CsParams(delta=0.05)
        assert params.per_arm().delta == pytest.approx(0.01)
        assert params.per_arm().split == 1

    def test_invalid_delta(self):
        """Test delta outside (0, 1)"""
        with pytest.raises(DomainError):
            CsParams(delta=1.5)


class TestNeymanCs:
    """Test the Neyman allocation confidence sequence"""

    def test_known_interval(self):
        """Test cs0 = [0.1, 0.3], cs1 = [0.4, 0.6]"""
        interval = neyman_cs(Interval(0.1, 0.3), Interval(0.4, 0.6))
        assert interval.lo == pytest.approx(0.57143, abs=1e-5)
        assert interval.hi == pytest.approx(0.85714, abs=1e-5)

    def test_point_intervals(self):
        """Test equal point intervals give 1/2"""
        interval = neyman_cs(Interval(0.3, 0.3), Interval(0.3, 0.3))
        assert interval == Interval(0.5, 0.5)

    def test_vacuous_inputs(self):
        """Test vacuous stdev intervals give [0, 1]"""
        assert neyman_cs(Interval(0.0, 0.5), Interval(0.0, 0.5)) == Interval(0.0, 1.0)

    def test_contains_truth_when_inputs_do(self):
        """Test the true Neyman allocation lies inside when both stdev intervals cover"""
        s0, s1 = 0.3, 0.5
        interval = neyman_cs(Interval(0.25, 0.35), Interval(0.45, 0.5))
        assert interval.contains(s1 / (s0 + s1))

    def test_monotone_in_inputs(self):
        """Test nested stdev intervals give nested allocation intervals"""
        rng = np.random.default_rng(17)
        for _ in range(500):
            outer0 = np.sort(rng.uniform(0.0, 0.5, 2))
            outer1 = np.sort(rng.uniform(0.0, 0.5, 2))
            inner0 = np.sort(rng.uniform(outer0[0], outer0[1], 2))
            inner1 = np.sort(rng.uniform(outer1[0], outer1[1], 2))
            outer = neyman_cs(Interval(*outer0), Interval(*outer1))
            inner = neyman_cs(Interval(*inner0), Interval(*inner1))
            assert outer.lo <= inner.lo + 1e-15
            assert inner.hi <= outer.hi + 1e-15
