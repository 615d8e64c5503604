import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsdae import TimeScaleGrid, TsdaeError, grid_from_descriptor
from tsdae.errors import GridIndexError


@pytest.fixture
def geometric():
    return TimeScaleGrid.geometric(2, 1, 12)


@pytest.fixture
def uniform():
    return TimeScaleGrid.uniform(1.0, 0.0, 10)


@pytest.fixture
def explicit():
    return TimeScaleGrid.explicit([1.0, 1.5, 4.0])


class TestJumpOperators:
    def test_sigma_doubles_on_powers_of_two(self, geometric):
        k = geometric.points.index(4)
        assert geometric.sigma(k) == 8

    def test_sigma_uniform(self, uniform):
        assert uniform.sigma(3) == 4

    def test_sigma_explicit(self, explicit):
        assert explicit.sigma(1) == 4.0

    def test_sigma_out_of_range_at_last_point(self, geometric):
        with pytest.raises(GridIndexError):
            geometric.sigma(geometric.last_index)

    def test_rho(self, geometric, uniform, explicit):
        assert geometric.rho(geometric.points.index(8)) == 4
        assert uniform.rho(4) == 3
        assert explicit.rho(2) == 1.5
        with pytest.raises(GridIndexError):
            explicit.rho(0)

    def test_mu(self, geometric, explicit):
        k = geometric.points.index(4)
        assert geometric.mu(k) == 4          # mu(t) = t on powers of two
        assert TimeScaleGrid.uniform(0.5, 0, 5).mu(2) == 0.5
        assert explicit.mu(1) == 2.5

    def test_jump_round_trips(self, explicit):
        for k in range(explicit.last_index):
            assert explicit.rho(k + 1) == explicit.points[k]
            assert explicit.sigma(k) == explicit.points[k + 1]
        assert all(explicit.mu(k) > 0 for k in range(explicit.last_index))

    def test_left_graininess_positive(self, geometric):
        assert geometric.nu_left(3) == geometric.points[3] - geometric.points[2]


class TestDelta:
    def test_square_on_geometric(self, geometric):
        samples = [t * t for t in geometric.points]
        k = geometric.points.index(2)
        # (4t^2 - t^2)/t = 3t
        assert geometric.delta(samples, k) == 6

    def test_constant_is_flat(self, uniform):
        samples = [7.5] * len(uniform)
        assert all(uniform.delta(samples, k) == 0
                   for k in range(uniform.last_index))

    def test_identity_has_unit_slope(self, explicit):
        samples = list(explicit.points)
        assert all(explicit.delta(samples, k) == 1.0
                   for k in range(explicit.last_index))

    def test_no_derivative_at_last_point(self, uniform):
        with pytest.raises(GridIndexError):
            uniform.delta(list(uniform.points), uniform.last_index)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4),
           st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4),
           st.floats(-8, 8))
    def test_linearity(self, f, g, alpha):
        grid = TimeScaleGrid.explicit([0.0, 1.0, 2.5, 7.0])
        combo = [alpha * a + b for a, b in zip(f, g)]
        for k in range(grid.last_index):
            lhs = grid.delta(combo, k)
            rhs = alpha * grid.delta(f, k) + grid.delta(g, k)
            assert abs(lhs - rhs) <= 1e-14 * max(1.0, abs(lhs), abs(rhs))


class TestSimpleUsefulFormula:
    def test_holds_for_square(self, geometric):
        samples = [t * t for t in geometric.points]
        assert all(geometric.check_simple_useful_formula(samples, k)
                   for k in range(geometric.last_index))

    def test_holds_for_random_samples(self, uniform):
        rng = np.random.default_rng(0)
        samples = list(rng.normal(size=len(uniform)))
        assert all(uniform.check_simple_useful_formula(samples, k)
                   for k in range(uniform.last_index))

    def test_detects_perturbed_derivative_path(self, uniform):
        samples = list(np.arange(float(len(uniform))))

        class Perturbed:
            def __getitem__(self, k):
                # only the derivative path sees the lie at index 3
                return samples[k] + (0.5 if k == 3 else 0.0)

        # f(sigma(t_2)) read from the true samples, derivative from the
        # perturbed path
        k = 2
        lhs = samples[k + 1]
        rhs = samples[k] + uniform.mu(k) * uniform.delta(Perturbed(), k)
        assert abs(lhs - rhs) > 1e-12


class TestConstruction:
    def test_needs_three_points(self):
        with pytest.raises(TsdaeError):
            TimeScaleGrid.explicit([0.0, 1.0])

    def test_strictly_increasing(self):
        with pytest.raises(TsdaeError):
            TimeScaleGrid.explicit([0.0, 1.0, 1.0])

    def test_geometric_guard(self):
        with pytest.raises(TsdaeError):
            TimeScaleGrid.geometric(1.0, 1.0, 5)
        with pytest.raises(TsdaeError):
            TimeScaleGrid.geometric(2.0, 0.0, 5)

    def test_uniform_guard(self):
        with pytest.raises(TsdaeError):
            TimeScaleGrid.uniform(0.0, 0.0, 5)

    def test_exact_mode_uses_fractions(self):
        grid = TimeScaleGrid.geometric(2, 1, 6, exact=True)
        assert grid.exact
        assert grid.mu(3) == 8

    def test_descriptors(self):
        g1 = grid_from_descriptor({"kind": "geometric", "q": 2, "t0": 1, "count": 4})
        assert g1.points == (1, 2, 4, 8)
        g2 = grid_from_descriptor({"kind": "uniform", "h": 1.0, "t0": 0, "count": 3})
        assert g2.points == (0.0, 1.0, 2.0)
        g3 = grid_from_descriptor({"kind": "explicit", "points": [1, 1.5, 4]})
        assert g3.points == (1, 1.5, 4)
        with pytest.raises(TsdaeError):
            grid_from_descriptor({"kind": "fancy"})
