"""Comparison methods: rejection ABC (k-nearest-neighbour) and ABC-SMC model selection.

Both treat the model index as a discrete parameter with a uniform prior and
report posterior model probabilities as class frequencies among accepted
draws. Parameter point estimates come from mean shift on the accepted
parameters of the selected model.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from ._random import as_generator
from ._validation import check_is_fitted, check_models, check_observed, check_positive_int
from .exceptions import ConfigError, NumericalError
from .state import PriorSpec

logger = logging.getLogger(__name__)

STAY_PROBABILITY = 0.75
ATTEMPT_FACTOR = 50
RELAX_FACTOR = 1.5
MAX_RELAXATIONS = 5
SMOOTHING = 0.5


@dataclass(frozen=True, eq=False)
class ModelPosterior:
    """Posterior model probabilities with the accepted draws behind them.

    Attributes
    ----------
    probs : ndarray of shape (K,)
    accepted : tuple of (thetas, summaries) pairs, one per model
        ``thetas`` has shape ``(a_m, d_m)`` and ``summaries`` ``(a_m, L)``.
    """

    probs: np.ndarray
    accepted: tuple

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0, rtol=0, atol=1e-9):
            raise ValueError(f"model probabilities must be nonnegative and sum to 1: {p}")
        if len(self.accepted) != p.size:
            raise ValueError("one accepted set per model is required")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def K(self):
        return self.probs.size

    @property
    def counts(self):
        return np.array([len(th) for th, _ in self.accepted])

    @property
    def selected_model(self):
        # np.argmax returns the first maximum, i.e. the lowest index on ties
        return int(np.argmax(self.probs))

    def bayes_factor(self, i, j):
        """Ratio of accepted counts with add-0.5 smoothing; for reporting only."""
        c = self.counts
        return float((c[i] + SMOOTHING) / (c[j] + SMOOTHING))


def frequency_posterior(model_indices, K):
    """Class frequencies ``(1/T) sum_t 1[m_t = m]``."""
    m = np.asarray(model_indices, dtype=int).ravel()
    if m.size == 0:
        raise ValueError("no accepted draws")
    return np.bincount(m, minlength=K)[:K] / m.size


def _transform(Y, transform):
    return Y if transform is None else transform(Y)


def _simulate(models, m, thetas, rng):
    """Simulate rows of ``thetas`` where row ``i`` belongs to model ``m[i]``."""
    L = models[0].output_dim
    Y = np.empty((m.size, L))
    eps = rng.standard_normal((m.size, L))
    for k, mdl in enumerate(models):
        rows = np.flatnonzero(m == k)
        if rows.size:
            Y[rows] = mdl.simulate_batch(np.stack([thetas[r] for r in rows]), eps[rows])
    return Y


def _prior_draws(priors, n, rng):
    m = rng.integers(0, priors.K, size=n)
    thetas = [None] * n
    for k, box in enumerate(priors.boxes):
        rows = np.flatnonzero(m == k)
        draws = rng.uniform(box[:, 0], box[:, 1], size=(rows.size, box.shape[0]))
        for r, th in zip(rows, draws):
            thetas[r] = th
    return m, thetas


def _accepted_sets(m, thetas, Y, K, priors):
    out = []
    for k in range(K):
        rows = np.flatnonzero(m == k)
        th = np.stack([thetas[r] for r in rows]) if rows.size else np.empty((0, priors.dims[k]))
        out.append((th, Y[rows]))
    return tuple(out)


def _check_inputs(observed, models, priors):
    if not isinstance(priors, PriorSpec):
        raise ConfigError("priors must be a PriorSpec")
    models = check_models(models, priors)
    y = check_observed(observed, models[0].output_dim)
    return y, models


def abc_mc_select(observed, models, priors, n_sims, knn_k, rng=None, *, transform=None):
    """Rejection ABC model selection keeping the ``knn_k`` nearest simulations.

    Parameters
    ----------
    observed : array-like of shape (L,)
    models : list of ModelSpec
    priors : PriorSpec
        Only the parameter boxes are used; the model prior is uniform.
    n_sims, knn_k : int
    rng : seed or Generator
    transform : callable, optional
        Applied to observed and simulated summaries before distances.

    Returns
    -------
    ModelPosterior
    """
    y, models = _check_inputs(observed, models, priors)
    n_sims = check_positive_int(n_sims, "n_sims")
    knn_k = check_positive_int(knn_k, "knn_k")
    if knn_k > n_sims:
        raise ConfigError(f"knn_k={knn_k} exceeds n_sims={n_sims}")
    rng = as_generator(rng)
    m, thetas = _prior_draws(priors, n_sims, rng)
    Y = _simulate(models, m, thetas, rng)
    d = np.linalg.norm(_transform(Y, transform) - _transform(y, transform), axis=1)
    keep = np.sort(np.argsort(d, kind="stable")[:knn_k])
    probs = frequency_posterior(m[keep], priors.K)
    return ModelPosterior(probs, _accepted_sets(m[keep], [thetas[i] for i in keep], Y[keep], priors.K, priors))


def _perturb_models(m, K, rng):
    if K == 1:
        return m.copy()
    move = rng.random(m.size) >= STAY_PROBABILITY
    shift = rng.integers(1, K, size=m.size)
    return np.where(move, (m + shift) % K, m)


def _model_kernel(K):
    if K == 1:
        return np.ones((1, 1))
    km = np.full((K, K), (1 - STAY_PROBABILITY) / (K - 1))
    np.fill_diagonal(km, STAY_PROBABILITY)
    return km


def abc_smc_select(
    observed, models, priors, population, generations, perturb_sd=np.sqrt(0.1), rng=None, *, transform=None
):
    """Sequential Monte Carlo ABC over the joint (model index, parameters).

    Generation 0 samples the priors with tolerance equal to the median distance
    of an initial batch of ``population`` draws. Each later generation uses the
    median accepted distance of the previous one, proposes by resampling the
    previous population, moving the model index (stay with probability 0.75,
    otherwise uniform over the others) and adding Gaussian noise of sd
    ``perturb_sd`` to every parameter coordinate. Proposals outside the prior
    box are rejected without simulation.

    When no proposal is accepted within ``50 * population`` attempts the
    tolerance is relaxed 1.5-fold, at most five times, before a
    NumericalError. A generation that accepts some but fewer than
    ``population`` proposals within that budget keeps the smaller set.

    Returns
    -------
    ModelPosterior
        ``probs`` are the model frequencies of the final generation; use
        :func:`smc_tolerances` for the tolerance schedule as well.
    """
    post, _ = _abc_smc(observed, models, priors, population, generations, perturb_sd, rng, transform)
    return post


def smc_tolerances(observed, models, priors, population, generations, perturb_sd=np.sqrt(0.1), rng=None, *, transform=None):
    """Run ABC-SMC and return ``(ModelPosterior, tolerance per generation)``."""
    return _abc_smc(observed, models, priors, population, generations, perturb_sd, rng, transform)


def _abc_smc(observed, models, priors, population, generations, perturb_sd, rng, transform):
    y, models = _check_inputs(observed, models, priors)
    population = check_positive_int(population, "population")
    generations = check_positive_int(generations, "generations")
    perturb_sd = float(perturb_sd)
    if not perturb_sd > 0:
        raise ConfigError("perturb_sd must be positive")
    rng = as_generator(rng)
    K = priors.K
    y_t = _transform(y, transform)

    def distances(m, thetas):
        Y = _simulate(models, m, thetas, rng)
        return np.linalg.norm(_transform(Y, transform) - y_t, axis=1), Y

    # generation 0: the initial batch sets the tolerance and seeds acceptance
    m0, th0 = _prior_draws(priors, population, rng)
    d0, Y0 = distances(m0, th0)
    eps = float(np.median(d0))
    keep = d0 < eps
    acc_m, acc_th, acc_Y, acc_d = list(m0[keep]), [th0[i] for i in np.flatnonzero(keep)], list(Y0[keep]), list(d0[keep])

    def fill(acc, proposer, eps):
        acc_m, acc_th, acc_Y, acc_d = acc
        relaxations = 0
        attempts = 0
        while len(acc_m) < population:
            m, th, ok = proposer(population)
            attempts += population
            if np.any(ok):
                idx = np.flatnonzero(ok)
                d, Y = distances(m[idx], [th[i] for i in idx])
                hit = d < eps
                for j in np.flatnonzero(hit)[: population - len(acc_m)]:
                    acc_m.append(m[idx[j]])
                    acc_th.append(th[idx[j]])
                    acc_Y.append(Y[j])
                    acc_d.append(d[j])
            if attempts >= ATTEMPT_FACTOR * population and len(acc_m) < population:
                if acc_m:
                    logger.info("ABC-SMC generation kept %d of %d particles", len(acc_m), population)
                    break
                if relaxations == MAX_RELAXATIONS:
                    raise NumericalError(
                        "ABC-SMC accepted nothing after tolerance relaxation",
                        tolerance=eps,
                        attempts=attempts,
                        relaxations=relaxations,
                    )
                eps *= RELAX_FACTOR
                relaxations += 1
                attempts = 0
                logger.warning("ABC-SMC relaxed tolerance to %g", eps)
        return (np.array(acc_m, dtype=int), acc_th, np.array(acc_Y), np.array(acc_d)), eps

    def from_prior(n):
        m, th = _prior_draws(priors, n, rng)
        return m, th, np.ones(n, dtype=bool)

    (m_prev, th_prev, Y_prev, d_prev), eps = fill((acc_m, acc_th, acc_Y, acc_d), from_prior, eps)
    w_prev = np.full(m_prev.size, 1.0 / m_prev.size)
    tolerances = [eps]
    km = _model_kernel(K)
    log_prior = np.array([-np.log(K) - priors.log_volume(k) for k in range(K)])
    var = perturb_sd**2

    for _ in range(1, generations):
        eps = min(float(np.median(d_prev)), eps)
        marg = np.bincount(m_prev, weights=w_prev, minlength=K)
        by_model = [np.flatnonzero(m_prev == k) for k in range(K)]

        def propose(n, m_prev=m_prev, th_prev=th_prev, w_prev=w_prev, marg=marg, by_model=by_model):
            m = rng.choice(K, size=n, p=marg / marg.sum())
            m = _perturb_models(m, K, rng)
            th = [None] * n
            ok = np.zeros(n, dtype=bool)
            for i in range(n):
                rows = by_model[m[i]]
                if rows.size == 0:
                    continue
                p = w_prev[rows] / w_prev[rows].sum()
                base = th_prev[rows[rng.choice(rows.size, p=p)]]
                th[i] = base + perturb_sd * rng.standard_normal(base.size)
                ok[i] = bool(priors.contains(m[i], th[i])[0])
            return m, th, ok

        (m_new, th_new, Y_new, d_new), eps = fill(([], [], [], []), propose, eps)
        # importance weights: prior over the mixture proposal density
        logw = np.empty(m_new.size)
        for i in range(m_new.size):
            k = m_new[i]
            rows = by_model[k]
            prev = np.stack([th_prev[r] for r in rows])
            sq = np.sum((prev - th_new[i]) ** 2, axis=1)
            wk = w_prev[rows] / w_prev[rows].sum()
            log_kp = logsumexp(-0.5 * sq / var, b=wk) - 0.5 * prev.shape[1] * np.log(2 * np.pi * var)
            log_km = np.log(marg @ km[:, k] / marg.sum())
            logw[i] = log_prior[k] - log_km - log_kp
        w = np.exp(logw - logw.max())
        m_prev, th_prev, Y_prev, d_prev, w_prev = m_new, th_new, Y_new, d_new, w / w.sum()
        tolerances.append(eps)

    probs = frequency_posterior(m_prev, K)
    post = ModelPosterior(probs, _accepted_sets(m_prev, th_prev, Y_prev, K, priors))
    return post, np.array(tolerances)


def mean_shift_mode(samples, bandwidth=None, *, tol=1e-6, max_iter=500):
    """Highest-density mode of a Gaussian KDE found by mean shift from every sample.

    ``bandwidth`` defaults to the median pairwise distance (1.0 if degenerate).
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("mean_shift_mode needs at least one sample")
    if X.shape[0] == 1:
        return X[0].copy()
    if bandwidth is None:
        med = float(np.median(pdist(X))) if X.shape[0] > 1 else 0.0
        bandwidth = med if med > 1e-12 else 1.0
    h2 = 2.0 * float(bandwidth) ** 2
    if not h2 > 0:
        raise ValueError("bandwidth must be positive")

    def weights(Z):
        sq = np.sum((Z[:, None, :] - X[None, :, :]) ** 2, axis=2)
        return np.exp(-sq / h2)

    Z = X.copy()
    active = np.ones(Z.shape[0], dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        W = weights(Z[active])
        new = (W @ X) / W.sum(axis=1, keepdims=True)
        shift = np.linalg.norm(new - Z[active], axis=1)
        Z[active] = new
        idx = np.flatnonzero(active)
        active[idx[shift < tol]] = False
    density = weights(Z).sum(axis=1)
    return Z[int(np.argmax(density))].copy()


class _BaselineSelector(BaseEstimator):
    def _finish(self, post):
        self.posterior_ = post
        self.probs_ = post.probs
        self.selected_model_ = post.selected_model
        thetas, _ = post.accepted[self.selected_model_]
        self.params_ = mean_shift_mode(thetas)
        return self

    def simulate(self, random_state=None, model=None):
        """Summary vector simulated at the parameter estimate of the selected model."""
        check_is_fitted(self, "params_")
        mdl = model if model is not None else self.models[self.selected_model_]
        return mdl(self.params_, random_state)


class ABCMCSelector(_BaselineSelector):
    """Estimator wrapper for :func:`abc_mc_select` with mean-shift parameter estimates."""

    def __init__(self, models=None, priors=None, n_sims=2000, knn_k=100, transform=None, random_state=None):
        self.models = models
        self.priors = priors
        self.n_sims = n_sims
        self.knn_k = knn_k
        self.transform = transform
        self.random_state = random_state

    def fit(self, y):
        post = abc_mc_select(
            y, self.models, self.priors, self.n_sims, self.knn_k, self.random_state, transform=self.transform
        )
        return self._finish(post)


class ABCSMCSelector(_BaselineSelector):
    """Estimator wrapper for :func:`abc_smc_select` with mean-shift parameter estimates."""

    def __init__(
        self,
        models=None,
        priors=None,
        population=100,
        generations=20,
        perturb_sd=np.sqrt(0.1),
        transform=None,
        random_state=None,
    ):
        self.models = models
        self.priors = priors
        self.population = population
        self.generations = generations
        self.perturb_sd = perturb_sd
        self.transform = transform
        self.random_state = random_state

    def fit(self, y):
        post, tol = smc_tolerances(
            y,
            self.models,
            self.priors,
            self.population,
            self.generations,
            self.perturb_sd,
            self.random_state,
            transform=self.transform,
        )
        self.tolerances_ = tol
        return self._finish(post)
