import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from krsel.exceptions import SimulationError
from krsel.kernels import (
    GaussianKernelSpec,
    ProductStateKernelSpec,
    gaussian_eval,
    gram_matrix,
    median_heuristic,
    state_kernel_eval,
)
from krsel.state import MixtureState, ParamVector, SimplexWeights

vectors = arrays(float, 3, elements=st.floats(-100, 100))


def test_gaussian_eval_identity_and_unit_distance():
    spec = GaussianKernelSpec(2.0)
    x = np.array([1.0, -3.0])
    assert gaussian_eval(x, x, spec) == 1.0
    assert gaussian_eval(x, x + np.array([2.0, 0.0]), spec) == pytest.approx(np.exp(-1.0), rel=1e-15)


@given(vectors, vectors)
def test_gaussian_eval_symmetric_and_bounded(x, y):
    spec = GaussianKernelSpec(3.0)
    k = gaussian_eval(x, y, spec)
    assert k == gaussian_eval(y, x, spec)
    assert 0.0 <= k <= 1.0
    if np.array_equal(x, y):
        assert k == 1.0


def test_nearly_equal_points_no_cancellation():
    x = np.array([1e8])
    y = x + 1e-4
    k = gaussian_eval(x, y, GaussianKernelSpec(1e-3))
    assert k == pytest.approx(np.exp(-1e-2), rel=1e-6)


def _state(phi, *thetas):
    return MixtureState(SimplexWeights(phi), tuple(ParamVector(t, m) for m, t in enumerate(thetas)))


def test_state_kernel_is_product_of_factors():
    a = _state([0.2, 0.8], [1.0, 2.0], [3.0])
    b = _state([0.6, 0.4], [0.0, 2.5], [1.0])
    spec = ProductStateKernelSpec(0.7, (1.5, 2.5))
    manual = (
        gaussian_eval(a.phi, b.phi, GaussianKernelSpec(0.7))
        * gaussian_eval(a.theta(0), b.theta(0), GaussianKernelSpec(1.5))
        * gaussian_eval(a.theta(1), b.theta(1), GaussianKernelSpec(2.5))
    )
    assert state_kernel_eval(a, b, spec) == pytest.approx(manual, rel=1e-15)
    assert state_kernel_eval(a, a, spec) == 1.0


def test_state_kernel_single_factor_drives_product_down():
    a = _state([0.5, 0.5], [0.0], [0.0])
    spec = ProductStateKernelSpec(1.0, (1.0, 1.0))
    vals = [state_kernel_eval(a, _state([0.5, 0.5], [d], [0.0]), spec) for d in (1, 5, 40)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-300


@pytest.mark.parametrize(
    "points,scale,expected",
    [([[0.0], [2.0]], 1.0, 2.0), ([[0.0], [1.0], [10.0]], 1.0, 9.0), ([[4.0]] * 5, 2.0, 2.0), ([[1.0]], 3.0, 3.0)],
)
def test_median_heuristic_examples(points, scale, expected):
    assert median_heuristic(np.array(points), scale) == expected


@given(arrays(float, (6, 2), elements=st.floats(-50, 50)), st.floats(0.1, 10))
def test_median_heuristic_permutation_and_scale(points, s):
    base = median_heuristic(points, 1.0)
    assert median_heuristic(points[::-1], 1.0) == base
    assert median_heuristic(points, s) == pytest.approx(s * base, rel=1e-12)


def test_gram_matrix_examples():
    spec = GaussianKernelSpec(2.0)
    assert gram_matrix(np.array([[3.0]]), spec).tolist() == [[1.0]]
    pts = np.array([[0.0], [1.0], [3.0]])
    G = gram_matrix(pts, spec)
    expected = np.array(
        [
            [1.0, np.exp(-1 / 4), np.exp(-9 / 4)],
            [np.exp(-1 / 4), 1.0, np.exp(-4 / 4)],
            [np.exp(-9 / 4), np.exp(-4 / 4), 1.0],
        ]
    )
    assert np.allclose(G, expected, rtol=1e-15, atol=0)
    assert np.array_equal(G, G.T)


@given(arrays(float, (8, 3), elements=st.floats(-10, 10)), st.floats(0.1, 5))
def test_gram_plus_ridge_is_positive_definite(points, delta):
    G = gram_matrix(points, GaussianKernelSpec(1.0))
    assert np.array_equal(G, G.T)
    assert np.all(np.diag(G) == 1.0)
    np.linalg.cholesky(G + len(points) * delta * np.eye(len(points)))


def test_gram_matrix_rejects_nonfinite_kernel():
    with pytest.raises(SimulationError):
        gram_matrix(np.zeros((2, 1)), lambda x, y: float("nan"))


def test_bandwidth_must_be_positive():
    with pytest.raises(ValueError):
        GaussianKernelSpec(0.0)
