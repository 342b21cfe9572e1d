"""Design generation and the exact CDF discrepancy."""

import numpy as np
import pytest

from bnpreg.design import Design, discrepancy, equidistant_design, uniform_design
from bnpreg.errors import DomainError, UnsupportedBasisError


class TestUniformDesign:
    def test_moments(self):
        design = uniform_design(100000, 1, seed=3)
        se = (1.0 / np.sqrt(12.0)) / np.sqrt(design.n)
        assert abs(design.points.mean() - 0.5) < 3.0 * se

    def test_determinism(self):
        a = uniform_design(100, 1, seed=9)
        b = uniform_design(100, 1, seed=9)
        np.testing.assert_array_equal(a.points, b.points)

    def test_multivariate_shape(self):
        design = uniform_design(1, 3, seed=0)
        assert design.points.shape == (1, 3)
        assert design.p == 3

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            uniform_design(0, 1, seed=0)


class TestEquidistantDesign:
    def test_two_points(self):
        np.testing.assert_allclose(equidistant_design(2).points, [0.25, 0.75])

    def test_single_point(self):
        np.testing.assert_allclose(equidistant_design(1).points, [0.5])

    def test_sorted_distinct(self):
        pts = equidistant_design(37).points
        assert np.all(np.diff(pts) > 0)


class TestDiscrepancy:
    def test_midpoint_design_value(self):
        assert discrepancy(equidistant_design(10)) == pytest.approx(0.05, abs=1e-15)

    def test_single_central_point(self):
        d = Design(np.array([0.5]), "random-uniform", 0)
        assert discrepancy(d) == pytest.approx(0.5, abs=1e-15)

    def test_scaled_constant_over_sizes(self):
        for n in [1, 2, 10, 1000, 100000]:
            assert n * discrepancy(equidistant_design(n)) == pytest.approx(0.5, abs=1e-9)

    def test_random_design_is_larger(self):
        n = 10000
        d_rand = discrepancy(uniform_design(n, 1, seed=13))
        assert d_rand > 10.0 / n

    def test_multivariate_unsupported(self):
        with pytest.raises(UnsupportedBasisError):
            discrepancy(uniform_design(5, 2, seed=0))
