import numpy as np
import pytest
from sklearn.base import clone

from krsel.estimator import KernelRecursiveABC, state_kernel_for
from krsel.exceptions import ConfigError
from krsel.harness.experiments import gaussian_mean_model
from krsel.herding import HerdingConfig
from krsel.kernels import median_heuristic
from krsel.state import MixtureState, ParticleEnsemble, PriorSpec


def _toy(n_obs=4):
    models = [gaussian_mean_model(n_obs), gaussian_mean_model(n_obs)]
    prior = PriorSpec.from_intervals(0.5, (1, 1), [(0, 2), (8, 10)])
    return models, prior


def _fit(y, **kw):
    models, prior = _toy(len(y))
    opts = dict(n_per_iter=30, n_iters=4, random_state=0)
    opts.update(kw)
    return KernelRecursiveABC(models, prior, **opts).fit(y)


def test_fitted_attributes():
    est = _fit(np.full(4, 9.0))
    assert isinstance(est.final_state_, MixtureState)
    assert est.trajectory_.shape == (4, 2)
    assert len(est.state_trajectory_) == 4
    assert est.state_trajectory_[-1] == est.final_state_
    assert np.allclose(est.trajectory_.sum(axis=1), 1.0)
    assert isinstance(est.particles_, ParticleEnsemble) and est.particles_.n == 30
    assert est.selected_model_ == int(np.argmax(est.coefficients_))
    assert np.array_equal(est.params_, est.final_state_.theta(est.selected_model_))


def test_selects_separated_model():
    assert _fit(np.full(4, 9.0)).selected_model_ == 1
    assert _fit(np.full(4, 1.0)).selected_model_ == 0


def test_deterministic_and_seed_sensitive():
    y = np.full(4, 9.0)
    a, b = _fit(y), _fit(y)
    assert a.final_state_ == b.final_state_
    assert np.array_equal(a.trajectory_, b.trajectory_)
    c = _fit(y, random_state=1)
    assert not np.array_equal(a.particles_.flat(), c.particles_.flat())


def test_clone_refits_identically():
    y = np.full(4, 9.0)
    a = _fit(y)
    assert clone(a).fit(y).final_state_ == a.final_state_


def test_callback_sees_every_recursion():
    seen = []
    models, prior = _toy()
    est = KernelRecursiveABC(models, prior, n_per_iter=10, n_iters=3, random_state=0)
    est.fit(np.full(4, 1.0), callback=lambda N, ens, emb: seen.append((N, ens.n, emb.weights.size)))
    assert seen == [(1, 10, 10), (2, 10, 10), (3, 10, 10)]


def test_single_model_concentrates_near_mean():
    y = np.array([2.6, 3.4, 2.9, 3.3, 3.0])
    prior = PriorSpec(0.01, (np.array([[-10.0, 0.0]]),))
    est = KernelRecursiveABC([gaussian_mean_model(5)], prior, n_per_iter=60, n_iters=12, random_state=2).fit(y)
    assert est.selected_model_ == 0
    assert abs(est.params_[0] - y.mean()) < 0.5


def test_arctan_option_runs():
    est = _fit(np.full(4, 9.0), arctan=True)
    assert est.trajectory_.shape == (4, 2)


def test_explicit_herding_config_gets_model_mask():
    est = KernelRecursiveABC(*_toy(), herding=HerdingConfig(pool_multiplier=5))
    cfg = est._herding_config(est.models)
    assert cfg.nonneg_mask == (False, False) and cfg.pool_multiplier == 5


def test_state_kernel_uses_block_medians(rng):
    ens = ParticleEnsemble(rng.dirichlet([1, 1], 12), (rng.normal(size=(12, 2)), rng.normal(size=(12, 3))))
    k = state_kernel_for(ens, 2.0)
    assert k.simplex_bandwidth == median_heuristic(ens.phi, 2.0)
    assert k.param_bandwidths[1] == median_heuristic(ens.thetas[1], 2.0)


@pytest.mark.parametrize(
    "kw",
    [dict(delta=0.0), dict(bandwidth_scale=-1.0), dict(n_per_iter=0), dict(n_iters=0), dict(prior="box")],
)
def test_invalid_settings(kw):
    models, prior = _toy()
    opts = dict(models=models, prior=prior)
    opts.update(kw)
    with pytest.raises((ConfigError, ValueError)):
        KernelRecursiveABC(**opts).fit(np.zeros(4))


def test_wrong_observation_length():
    with pytest.raises((ConfigError, ValueError)):
        KernelRecursiveABC(*_toy(4), n_per_iter=5, n_iters=1).fit(np.zeros(3))


def test_simulate_requires_fit():
    with pytest.raises(Exception):
        KernelRecursiveABC(*_toy()).simulate(0)
    est = _fit(np.full(4, 9.0))
    assert est.simulate(0).shape == (4,)
