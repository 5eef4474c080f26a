"""Greedy kernel herding from a signed-weight posterior embedding.

The argmax over the continuous state space is approximated by scanning a
finite candidate pool that is rebuilt for every output point:

* the embedding's own particles,
* Gaussian-perturbed copies of particles (parameters perturbed directly,
  mixing weights perturbed in log space and renormalised),
* a fraction of fresh draws from the initial prior, when one is supplied.

Parameters are never clipped to the prior box; only coordinates flagged in
``nonneg_mask`` are clamped at zero.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from ._random import as_generator
from .kernel_bayes import PosteriorEmbedding
from .state import MixtureState, ParticleEnsemble, flatten

STD_FLOOR = 1e-6
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class HerdingConfig:
    """Candidate-pool settings for the herding argmax.

    Attributes
    ----------
    pool_multiplier : int
        Pool size per output point is ``pool_multiplier * n``.
    perturbation_scale : float
        Perturbation std as a fraction of the particles' per-coordinate std.
    fresh_prior_fraction : float
        Share of the pool drawn fresh from the initial prior.
    nonneg_mask : tuple of bool or None
        Flags over the flattened parameter coordinates that must stay >= 0.
    normalize_weights : bool
        Rescale the weights to unit sum (when the sum is positive) before
        herding. The first selection is unchanged; later ones weigh the
        attraction against the repulsion term as for a unit-mass target.
    """

    pool_multiplier: int = 10
    perturbation_scale: float = 0.5
    fresh_prior_fraction: float = 0.1
    nonneg_mask: tuple = field(default=None)
    normalize_weights: bool = False

    def __post_init__(self):
        if int(self.pool_multiplier) < 1:
            raise ValueError("pool_multiplier must be >= 1")
        if not float(self.perturbation_scale) > 0:
            raise ValueError("perturbation_scale must be positive")
        if not 0.0 <= float(self.fresh_prior_fraction) <= 1.0:
            raise ValueError("fresh_prior_fraction must lie in [0, 1]")
        object.__setattr__(self, "pool_multiplier", int(self.pool_multiplier))
        object.__setattr__(self, "perturbation_scale", float(self.perturbation_scale))
        object.__setattr__(self, "fresh_prior_fraction", float(self.fresh_prior_fraction))
        if self.nonneg_mask is not None:
            object.__setattr__(self, "nonneg_mask", tuple(bool(b) for b in self.nonneg_mask))
        object.__setattr__(self, "normalize_weights", bool(self.normalize_weights))


def _as_flat(states, dims):
    if isinstance(states, ParticleEnsemble):
        return states.flat()
    states = list(states)
    if not states:
        return np.empty((0, len(dims) + sum(dims)))
    if isinstance(states[0], MixtureState):
        return np.stack([flatten(s) for s in states])
    return np.atleast_2d(np.asarray(states, dtype=float))


def herding_scores(candidates, embedding, selected, k):
    """Vectorised herding objective for rows of flattened ``candidates``."""
    dims = embedding.particles.dims
    scales = k.coordinate_scales(dims)
    C = np.atleast_2d(candidates) * scales
    X = embedding.particles.flat() * scales
    score = np.exp(-cdist(C, X, "sqeuclidean")) @ embedding.weights
    S = _as_flat(selected, dims)
    t = S.shape[0]
    if t:
        score -= np.exp(-cdist(C, S * scales, "sqeuclidean")).sum(axis=1) / (t + 1)
    return score


def herding_objective(candidate, embedding, selected, k):
    """``sum_i w_i k(c, x_i) - 1/(t+1) sum_{j<=t} k(c, s_j)`` with ``t = len(selected)``."""
    c = flatten(candidate) if isinstance(candidate, MixtureState) else np.asarray(candidate, float)
    return float(herding_scores(c[None, :], embedding, selected, k)[0])


def mmd_to_embedding(points, embedding, k):
    """RKHS distance between the uniform average over ``points`` and the embedding."""
    dims = embedding.particles.dims
    P = _as_flat(points, dims)
    t = P.shape[0]
    if t == 0:
        raise ValueError("mmd_to_embedding needs at least one point")
    w = embedding.weights
    X = embedding.particles.flat()
    Kxx = k.matrix(X, X, dims)
    Kxp = k.matrix(X, P, dims)
    Kpp = k.matrix(P, P, dims)
    sq = w @ Kxx @ w - 2.0 * (w @ Kxp.sum(axis=1)) / t + Kpp.sum() / t**2
    return float(np.sqrt(max(sq, 0.0)))


class _PoolBuilder:
    """Draws the per-step candidate pool around the embedding's particles."""

    def __init__(self, embedding, cfg, prior, rng):
        ens = embedding.particles
        self.K, self.dims = ens.K, ens.dims
        self.X = ens.flat()
        self.n = ens.n
        self.size = cfg.pool_multiplier * self.n
        self.prior = prior
        self.rng = rng
        n_extra = self.size - self.n
        self.n_fresh = 0 if prior is None else min(n_extra, int(round(cfg.fresh_prior_fraction * self.size)))
        self.n_pert = n_extra - self.n_fresh

        w = np.clip(embedding.weights, 0.0, None)
        self.base_p = w / w.sum() if w.sum() > 0 else np.full(self.n, 1.0 / self.n)

        K = self.K
        self.log_phi = np.log(np.clip(self.X[:, :K], LOG_FLOOR, None))
        self.theta = self.X[:, K:]
        self.sd_phi = np.maximum(cfg.perturbation_scale * self.log_phi.std(axis=0), STD_FLOOR)
        self.sd_theta = np.maximum(cfg.perturbation_scale * self.theta.std(axis=0), STD_FLOOR)

        mask = cfg.nonneg_mask
        n_params = sum(self.dims)
        if mask is None:
            self.mask = np.zeros(n_params, dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.size == n_params + K:
                mask = mask[K:]
            if mask.size != n_params:
                raise ValueError(f"nonneg_mask has {mask.size} flags, expected {n_params}")
            self.mask = mask

    def __call__(self):
        parts = [self.X]
        if self.n_pert:
            idx = self.rng.choice(self.n, size=self.n_pert, p=self.base_p)
            log_phi = self.log_phi[idx] + self.rng.normal(size=(self.n_pert, self.K)) * self.sd_phi
            log_phi -= log_phi.max(axis=1, keepdims=True)
            phi = np.exp(log_phi)
            phi /= phi.sum(axis=1, keepdims=True)
            theta = self.theta[idx] + self.rng.normal(size=self.theta[idx].shape) * self.sd_theta
            theta[:, self.mask] = np.maximum(theta[:, self.mask], 0.0)
            parts.append(np.hstack([phi, theta]))
        if self.n_fresh:
            phi = self.prior.sample_weights(self.n_fresh, self.rng)
            thetas = self.prior.sample_params(self.n_fresh, self.rng)
            parts.append(np.hstack((phi,) + thetas))
        return np.vstack(parts)


def herd_sample(embedding, n_out, k, cfg=None, rng=None, *, prior=None, pool=None):
    """Greedy herding of ``n_out`` states from ``embedding``.

    Parameters
    ----------
    embedding : PosteriorEmbedding
    n_out : int
    k : ProductStateKernelSpec
    cfg : HerdingConfig, optional
    rng : seed or Generator
    prior : PriorSpec, optional
        Source of the fresh candidates; without it that share of the pool goes
        to perturbed copies.
    pool : {"particles"} or array of shape (M, D), optional
        Fix the candidate pool for every step instead of drawing one. With
        ``"particles"`` the search is exhaustive over the embedding's particles.

    Returns
    -------
    ParticleEnsemble
        States for the next recursion. Ties go to the lowest pool index and
        repeated selections are allowed.
    """
    if not isinstance(embedding, PosteriorEmbedding):
        raise TypeError("herd_sample expects a PosteriorEmbedding")
    cfg = cfg or HerdingConfig()
    n_out = int(n_out)
    if n_out < 1:
        raise ValueError("n_out must be >= 1")
    rng = as_generator(rng)
    ens = embedding.particles
    dims = ens.dims
    scales = k.coordinate_scales(dims)
    Xs = ens.flat() * scales
    w = embedding.weights
    if cfg.normalize_weights and w.sum() > 0:
        w = w / w.sum()
    out = np.empty((n_out, ens.D))

    if pool is not None:
        P = ens.flat() if isinstance(pool, str) and pool == "particles" else np.atleast_2d(pool)
        Ps = P * scales
        attract = np.exp(-cdist(Ps, Xs, "sqeuclidean")) @ w
        repel = np.zeros(P.shape[0])
        for t in range(n_out):
            j = int(np.argmax(attract - repel / (t + 1)))
            out[t] = P[j]
            repel += np.exp(-cdist(Ps, Ps[j : j + 1], "sqeuclidean"))[:, 0]
        return ParticleEnsemble.from_flat(out, dims, ens.recursion_index + 1)

    build = _PoolBuilder(embedding, cfg, prior, rng)
    # the particles head every pool, so their scores are reused across steps
    attract_base = np.exp(-cdist(Xs, Xs, "sqeuclidean")) @ w
    repel_base = np.zeros(ens.n)
    for t in range(n_out):
        P = build()
        Ps = P[ens.n :] * scales
        attract = np.concatenate([attract_base, np.exp(-cdist(Ps, Xs, "sqeuclidean")) @ w])
        if t:
            S = out[:t] * scales
            repel = np.concatenate(
                [repel_base, np.exp(-cdist(Ps, S, "sqeuclidean")).sum(axis=1)]
            )
        else:
            repel = np.zeros(P.shape[0])
        j = int(np.argmax(attract - repel / (t + 1)))
        out[t] = P[j]
        repel_base += np.exp(-cdist(Xs, (P[j] * scales)[None, :], "sqeuclidean"))[:, 0]
    return ParticleEnsemble.from_flat(out, dims, ens.recursion_index + 1)
