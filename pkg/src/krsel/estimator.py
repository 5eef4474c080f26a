"""Model selection by kernel recursive ABC on a mixture of candidate models."""

import dataclasses
import logging

import numpy as np
from sklearn.base import BaseEstimator

from ._random import as_seed_sequence, child_sequence, substream
from ._validation import check_is_fitted, check_models, check_observed, check_positive_int
from .exceptions import ConfigError
from .herding import HerdingConfig, herd_sample
from .kernel_bayes import embed_posterior
from .kernels import GaussianKernelSpec, ProductStateKernelSpec, median_heuristic
from .simulators import arctan_transform, simulate_ensemble
from .state import PriorSpec, sample_initial_ensemble

logger = logging.getLogger(__name__)


def state_kernel_for(ensemble, scale):
    """Median-heuristic product kernel for the current particles (one bandwidth per block)."""
    return ProductStateKernelSpec(
        median_heuristic(ensemble.phi, scale),
        tuple(median_heuristic(th, scale) for th in ensemble.thetas),
    )


class KernelRecursiveABC(BaseEstimator):
    """Joint model selection and parameter estimation for simulators.

    The candidate models are combined into a mixture whose coefficients live
    on the simplex. Each recursion simulates once per particle, reweights the
    particles with kernel ABC against the observed summary, and herds a new
    particle set from the weighted embedding. The first herded state of the
    last recursion is the point estimate.

    Parameters
    ----------
    models : list of ModelSpec
    prior : PriorSpec
    n_per_iter : int, default=100
        Particles (and simulations) per recursion.
    n_iters : int, default=20
    bandwidth_scale : float, default=1.0
        Multiplier ``s`` on every median-heuristic bandwidth.
    delta : float, default=0.1
        Kernel ridge regulariser; the solve uses ``n * delta``.
    herding : HerdingConfig, optional
        Defaults to ``HerdingConfig()`` with the nonnegativity flags of the models.
    arctan : bool, default=False
        Apply ``arctan`` to observed and simulated summaries.
    random_state : int, SeedSequence or None

    Attributes
    ----------
    final_state_ : MixtureState
    coefficients_ : ndarray of shape (K,)
    selected_model_ : int
    params_ : ndarray
        Parameter estimate of the selected model.
    particles_ : ParticleEnsemble
        Herded states after the last recursion.
    trajectory_ : ndarray of shape (n_iters, K)
        Mixing coefficients of the first herded state after each recursion.
    state_trajectory_ : tuple of MixtureState
        The first herded state after each recursion.
    """

    def __init__(
        self,
        models=None,
        prior=None,
        n_per_iter=100,
        n_iters=20,
        bandwidth_scale=1.0,
        delta=0.1,
        herding=None,
        arctan=False,
        random_state=None,
    ):
        self.models = models
        self.prior = prior
        self.n_per_iter = n_per_iter
        self.n_iters = n_iters
        self.bandwidth_scale = bandwidth_scale
        self.delta = delta
        self.herding = herding
        self.arctan = arctan
        self.random_state = random_state

    def _herding_config(self, models):
        mask = tuple(b for mdl in models for b in mdl.nonneg_mask)
        if self.herding is None:
            return HerdingConfig(nonneg_mask=mask)
        if self.herding.nonneg_mask is None:
            return dataclasses.replace(self.herding, nonneg_mask=mask)
        return self.herding

    def fit(self, y, *, callback=None):
        """Run the recursion against observed summary ``y``.

        ``callback(N, ensemble, embedding)`` is invoked after each kernel-ABC
        step when given.
        """
        if not isinstance(self.prior, PriorSpec):
            raise ConfigError("prior must be a PriorSpec")
        models = check_models(self.models, self.prior)
        n = check_positive_int(self.n_per_iter, "n_per_iter")
        n_iters = check_positive_int(self.n_iters, "n_iters")
        if not float(self.delta) > 0 or not float(self.bandwidth_scale) > 0:
            raise ConfigError("delta and bandwidth_scale must be positive")
        y = check_observed(y, models[0].output_dim)
        y_cmp = arctan_transform(y) if self.arctan else y
        cfg = self._herding_config(models)

        root = as_seed_sequence(self.random_state)
        ensemble = sample_initial_ensemble(self.prior, n, substream(root, 0))
        sim_root = child_sequence(root, 1)
        trajectory = np.empty((n_iters, self.prior.K))
        first_states = []
        n_clamped = 0
        for N in range(1, n_iters + 1):
            Y, _, clamped = simulate_ensemble(ensemble, models, sim_root, N)
            n_clamped += int(clamped.sum())
            if self.arctan:
                Y = arctan_transform(Y)
            k_y = GaussianKernelSpec(median_heuristic(Y, self.bandwidth_scale))
            embedding = embed_posterior(ensemble, y_cmp, k_y, self.delta, Y)
            if callback is not None:
                callback(N, ensemble, embedding)
            k = state_kernel_for(ensemble, self.bandwidth_scale)
            ensemble = herd_sample(
                embedding, n, k, cfg, substream(root, 2, N), prior=self.prior
            )
            trajectory[N - 1] = ensemble.phi[0]
            first_states.append(ensemble[0])
        if n_clamped:
            logger.info("%d simulations were clamped during the recursion", n_clamped)

        self.particles_ = ensemble
        self.final_state_ = ensemble[0]
        self.coefficients_ = self.final_state_.phi.copy()
        self.selected_model_ = int(np.argmax(self.coefficients_))
        self.params_ = self.final_state_.theta(self.selected_model_).copy()
        self.trajectory_ = trajectory
        self.state_trajectory_ = tuple(first_states)
        self.n_clamped_ = n_clamped
        return self

    def simulate(self, random_state=None, model=None):
        """Summary vector simulated from the fitted point estimate of the selected model.

        ``model`` substitutes a different simulator with the same parameters,
        e.g. one recorded on an extrapolation design.
        """
        check_is_fitted(self, "final_state_")
        mdl = model if model is not None else self.models[self.selected_model_]
        return mdl(self.params_, random_state)
