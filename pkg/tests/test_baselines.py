import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binom
from sklearn.base import clone

from krsel.baselines import (
    ABCMCSelector,
    ABCSMCSelector,
    ModelPosterior,
    abc_mc_select,
    abc_smc_select,
    frequency_posterior,
    mean_shift_mode,
    smc_tolerances,
)
from krsel.exceptions import ConfigError
from krsel.simulators import ModelSpec
from krsel.state import PriorSpec


def _mean_model(n_obs, noise_sd=1.0, name="mean"):
    def forward(thetas):
        return np.repeat(thetas[:, :1], n_obs, axis=1), np.zeros(thetas.shape[0], dtype=bool)

    return ModelSpec(name, 1, n_obs, forward, noise_sd)


def _separable():
    models = [_mean_model(3, 0.1, "low"), _mean_model(3, 0.1, "high")]
    prior = PriorSpec.from_intervals(1.0, (1, 1), [[(0, 1)], [(10, 11)]])
    return models, prior


def _empty(K):
    return tuple((np.empty((0, 1)), np.empty((0, 2))) for _ in range(K))


def test_frequency_posterior():
    assert np.array_equal(frequency_posterior([0, 2, 2, 1], 3), [0.25, 0.25, 0.5])
    with pytest.raises(ValueError):
        frequency_posterior([], 2)


def test_model_posterior_tie_and_bayes_factor():
    acc = ((np.zeros((2, 1)), np.zeros((2, 1))), (np.zeros((2, 1)), np.zeros((2, 1))), (np.empty((0, 1)), np.empty((0, 1))))
    post = ModelPosterior([0.5, 0.5, 0.0], acc)
    assert post.selected_model == 0
    assert post.bayes_factor(0, 2) == 5.0
    assert post.bayes_factor(0, 1) == 1.0


def test_model_posterior_validation():
    with pytest.raises(ValueError):
        ModelPosterior([0.7, 0.7], _empty(2))
    with pytest.raises(ValueError):
        ModelPosterior([0.5, 0.5], _empty(3))


def test_abc_mc_separable_models():
    models, prior = _separable()
    post = abc_mc_select([0.5, 0.5, 0.5], models, prior, 400, 50, rng=0)
    assert np.array_equal(post.probs, [1.0, 0.0])
    th, Y = post.accepted[0]
    assert th.shape == (50, 1) and Y.shape == (50, 3)
    assert np.all((th >= 0) & (th <= 1))


def test_abc_mc_accept_all_recovers_prior():
    models, prior = _separable()
    n = 2000
    post = abc_mc_select([0.5] * 3, models, prior, n, n, rng=3)
    lo, hi = binom(n, 0.5).ppf([0.0005, 0.9995]) / n
    assert lo <= post.probs[0] <= hi


def test_abc_mc_nearest_are_closest():
    models, prior = _separable()
    y = np.array([0.2, 0.2, 0.2])
    post = abc_mc_select(y, models, prior, 300, 10, rng=1)
    kept = np.concatenate([Y for _, Y in post.accepted if len(Y)])
    # every kept simulation lies no further than the tenth nearest of a rerun with the same stream
    full = abc_mc_select(y, models, prior, 300, 300, rng=1)
    alld = np.sort(np.linalg.norm(np.concatenate([Y for _, Y in full.accepted if len(Y)]) - y, axis=1))
    assert np.linalg.norm(kept - y, axis=1).max() <= alld[9] + 1e-12


def test_abc_mc_rejects_large_k():
    models, prior = _separable()
    with pytest.raises(ConfigError):
        abc_mc_select([0.5] * 3, models, prior, 10, 11)


def test_abc_mc_identical_models_are_balanced():
    models = [_mean_model(5), _mean_model(5)]
    prior = PriorSpec.from_intervals(1.0, (1, 1), [(-3, 3)] * 2)
    n, k = 20000, 2000
    post = abc_mc_select(np.zeros(5), models, prior, n, k, rng=7)
    lo, hi = binom(k, 0.5).ppf([0.0005, 0.9995]) / k
    assert lo <= post.probs[0] <= hi


def test_abc_smc_separable_models():
    models, prior = _separable()
    post, tol = smc_tolerances([10.5] * 3, models, prior, 60, 5, rng=0)
    assert post.selected_model == 1
    assert post.probs[1] == 1.0
    assert np.all(np.diff(tol) <= 0)


@given(st.integers(0, 2**16))
def test_abc_smc_tolerances_non_increasing(seed):
    models = [_mean_model(4), _mean_model(4)]
    prior = PriorSpec.from_intervals(1.0, (1, 1), [(-2, 2), (0, 4)])
    post, tol = smc_tolerances(np.full(4, 1.0), models, prior, 30, 4, rng=seed)
    assert tol.size == 4
    assert np.all(np.diff(tol) <= 1e-12)
    assert np.isclose(post.probs.sum(), 1.0)


def test_abc_smc_accepted_inside_prior():
    models = [_mean_model(4), _mean_model(4)]
    prior = PriorSpec.from_intervals(1.0, (1, 1), [(-2, 2), (0, 4)])
    post = abc_smc_select(np.full(4, 1.9), models, prior, 40, 4, rng=2)
    for m, (th, _) in enumerate(post.accepted):
        assert np.all(prior.contains(m, th)) if len(th) else True


def test_abc_smc_rejects_bad_perturbation():
    models, prior = _separable()
    with pytest.raises(ConfigError):
        abc_smc_select([0.5] * 3, models, prior, 10, 2, perturb_sd=0.0)


def _kde(grid, X, h):
    return np.exp(-((grid[:, None] - X[None, :]) ** 2) / (2 * h * h)).sum(axis=1)


@given(st.integers(0, 2**32 - 1))
def test_mean_shift_matches_grid_maximum(seed):
    r = np.random.default_rng(seed)
    X = np.concatenate([r.normal(-2, 0.5, 40), r.normal(1.5, 0.8, 25)])
    h = 0.6
    grid = np.linspace(X.min() - 1, X.max() + 1, 40001)
    ref = grid[np.argmax(_kde(grid, X, h))]
    mode = mean_shift_mode(X, h, tol=1e-9, max_iter=5000)[0]
    assert mode == pytest.approx(ref, abs=2 * (grid[1] - grid[0]))


def test_mean_shift_default_bandwidth_and_edge_cases():
    assert np.array_equal(mean_shift_mode([[3.0, 4.0]]), [3.0, 4.0])
    assert np.allclose(mean_shift_mode(np.ones((5, 2))), [1.0, 1.0])
    X = np.array([[0.0], [0.1], [0.2], [5.0]])
    assert mean_shift_mode(X)[0] < 1.0
    with pytest.raises(ValueError):
        mean_shift_mode(np.empty((0, 1)))


@pytest.mark.parametrize("cls, kw", [(ABCMCSelector, dict(n_sims=300, knn_k=30)), (ABCSMCSelector, dict(population=30, generations=3))])
def test_selectors_fit_and_clone(cls, kw):
    models, prior = _separable()
    est = cls(models, prior, random_state=4, **kw)
    est.fit([10.4] * 3)
    assert est.selected_model_ == 1
    assert 10 <= est.params_[0] <= 11
    again = clone(est).fit([10.4] * 3)
    assert np.array_equal(again.probs_, est.probs_) and np.array_equal(again.params_, est.params_)
    assert est.simulate(0).shape == (3,)
