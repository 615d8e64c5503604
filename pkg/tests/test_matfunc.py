import numpy as np
import pytest
from numpy.testing import assert_allclose

from tsdae import DAESystem, MatrixFunction, TimeScaleGrid, check_product_rule
from tsdae.errors import GridIndexError, ShapeError

from conftest import paper_system


@pytest.fixture
def grid():
    return TimeScaleGrid.uniform(1.0, 0.0, 8)


def test_sigma_shift_of_fixture_coefficient():
    system = paper_system()
    b_sigma = system.B.sigma()
    k = system.grid.points.index(1)
    # entry (2,2) is 2t, so the shift reads 4 at t = 1
    assert float(b_sigma(k)[1, 1]) == 4.0


def test_sigma_shift_of_constant_is_identity_on_shorter_range(grid):
    f = MatrixFunction.constant(grid, np.arange(6.0).reshape(2, 3))
    shifted = f.sigma()
    assert shifted.last_index == grid.last_index - 1
    assert_allclose(shifted(2), f(2))
    with pytest.raises(GridIndexError):
        shifted(grid.last_index)


def test_sigma_shift_of_linear_scalar_matrix(grid):
    f = MatrixFunction.from_callable(grid, (2, 2), lambda t: t * np.eye(2))
    shifted = f.sigma()
    for k in range(grid.last_index):
        assert_allclose(shifted(k), (grid.t(k) + 1.0) * np.eye(2))


def test_delta_of_fixture_coefficient_is_constant():
    system = paper_system()
    b_delta = system.B.delta()
    for k in range(system.grid.last_index):
        expected = np.zeros((3, 5))
        expected[1, 1] = 2.0       # (2*2t - 2t)/t
        assert_allclose(np.asarray(b_delta(k), dtype=float), expected)


def test_delta_of_constant_is_zero(grid):
    f = MatrixFunction.constant(grid, np.ones((3, 3)))
    for k in range(grid.last_index):
        assert_allclose(f.delta()(k), np.zeros((3, 3)))


def test_shift_equals_value_plus_mu_delta(grid):
    rng = np.random.default_rng(3)
    f = MatrixFunction.from_table(grid, [rng.normal(size=(3, 2))
                                         for _ in range(len(grid))])
    for k in range(grid.last_index):
        lhs = f.sigma()(k)
        rhs = f(k) + grid.mu(k) * f.delta()(k)
        assert_allclose(lhs, rhs, rtol=0, atol=1e-15)


def test_shapes_preserved_by_calculus(grid):
    f = MatrixFunction.constant(grid, np.ones((4, 2)))
    assert f.delta().shape == (4, 2)
    assert f.sigma().shape == (4, 2)


class TestPointwiseAlgebra:
    def test_fixture_g0_is_projector_like(self):
        system = paper_system()
        g0 = system.A.sigma() @ system.B
        for k in range(g0.last_index + 1):
            assert_allclose(np.asarray(g0(k), float), np.diag([1, 1, 1, 0, 0.0]),
                            atol=1e-14)

    def test_product_with_identity(self, grid):
        rng = np.random.default_rng(1)
        f = MatrixFunction.from_table(grid, [rng.normal(size=(3, 3))
                                             for _ in range(len(grid))])
        ident = MatrixFunction.constant(grid, np.eye(3))
        for k in range(len(grid)):
            assert_allclose((f @ ident)(k), f(k))

    def test_sum_with_zero(self, grid):
        f = MatrixFunction.constant(grid, np.arange(4.0).reshape(2, 2))
        zero = MatrixFunction.constant(grid, np.zeros((2, 2)))
        assert_allclose((f + zero)(3), f(3))
        assert_allclose((f - zero)(3), f(3))
        assert_allclose((-f)(3), -f(3))

    def test_shape_mismatch_raises(self, grid):
        f = MatrixFunction.constant(grid, np.ones((2, 3)))
        g = MatrixFunction.constant(grid, np.ones((2, 3)))
        with pytest.raises(ShapeError):
            _ = f @ g
        with pytest.raises(ShapeError):
            _ = f + MatrixFunction.constant(grid, np.ones((3, 2)))


class TestProductRule:
    def test_linear_times_linear_on_uniform(self, grid):
        f = MatrixFunction.from_callable(grid, (2, 2), lambda t: t * np.eye(2))
        assert check_product_rule(f, f, 3)

    def test_random_sampled(self, grid):
        rng = np.random.default_rng(7)
        f = MatrixFunction.from_table(grid, [rng.normal(size=(3, 3))
                                             for _ in range(len(grid))])
        g = MatrixFunction.from_table(grid, [rng.normal(size=(3, 3))
                                             for _ in range(len(grid))])
        assert all(check_product_rule(f, g, k) for k in range(grid.last_index))

    def test_perturbed_product_table_fails(self, grid):
        rng = np.random.default_rng(8)
        tabs = [rng.normal(size=(2, 2)) for _ in range(len(grid))]
        f = MatrixFunction.from_table(grid, tabs)
        g = MatrixFunction.from_table(grid, tabs)

        fg_broken = [f(k) @ g(k) for k in range(len(grid))]
        fg_broken[4] = fg_broken[4] + 0.1
        broken = MatrixFunction.from_table(grid, fg_broken)
        lhs = broken.delta()(3)
        rhs = f.delta()(3) @ g(3) + f.sigma()(3) @ g.delta()(3)
        assert np.max(np.abs(lhs - rhs)) > 1e-6


class TestEvaluation:
    def test_cache_is_deterministic(self, grid):
        calls = []

        def fn(t):
            calls.append(t)
            return np.eye(2) * t

        f = MatrixFunction.from_callable(grid, (2, 2), fn)
        a = f(3)
        b = f(3)
        assert a is b
        assert calls == [grid.t(3)]

    def test_declared_shape_enforced(self, grid):
        f = MatrixFunction(grid, (2, 2), lambda k: np.zeros((3, 3)))
        with pytest.raises(ShapeError):
            f(0)

    def test_out_of_range(self, grid):
        f = MatrixFunction.constant(grid, np.eye(2))
        with pytest.raises(GridIndexError):
            f(len(grid))


class TestDAESystem:
    def test_shape_validation(self, grid):
        a = MatrixFunction.constant(grid, np.ones((3, 2)))
        b = MatrixFunction.constant(grid, np.ones((2, 3)))
        c = MatrixFunction.constant(grid, np.ones((3, 3)))
        f = MatrixFunction.constant(grid, np.ones((3, 1)))
        DAESystem(grid, a, b, c, f, 3, 2)
        with pytest.raises(ShapeError):
            DAESystem(grid, b, b, c, f, 3, 2)

    def test_exactness_flag(self):
        system = paper_system(exact=True)
        assert system.exact
        assert not paper_system(exact=False).exact
