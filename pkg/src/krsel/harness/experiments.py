"""Experiment settings: candidate simulators, holdout designs, ground truths and default priors."""

from dataclasses import dataclass

import numpy as np

from .._random import substream
from ..exceptions import ConfigError
from ..simulators import ODE_KINDS, POLYNOMIAL_ORDERS, ModelSpec, ode_model, polynomial_design, polynomial_model
from ..state import PriorSpec


@dataclass(frozen=True, eq=False)
class Experiment:
    """Resolved experiment.

    Attributes
    ----------
    name : str
    model_ids : tuple of str
    models : tuple of ModelSpec
        Simulators on the fitting design.
    holdout_models : tuple of ModelSpec
        The same simulators on the extrapolation design.
    truths : tuple of ndarray
        Ground-truth parameters, one per candidate.
    default_boxes : tuple of ndarray
        Per-coordinate ``(lower, upper)`` prior boxes.
    arctan : bool
        Whether summaries are compared after ``arctan`` by default.
    """

    name: str
    model_ids: tuple
    models: tuple
    holdout_models: tuple
    truths: tuple
    default_boxes: tuple
    arctan: bool = False

    @property
    def K(self):
        return len(self.models)

    def prior(self, dirichlet_alpha=0.01, boxes=None):
        return PriorSpec(dirichlet_alpha, tuple(self.default_boxes if boxes is None else boxes))

    def observe(self, truth_model, seed):
        """Observed and holdout summaries from the ground truth for one trial seed."""
        theta = self.truths[truth_model]
        y = self.models[truth_model](theta, substream(seed, 0))
        y_hold = self.holdout_models[truth_model](theta, substream(seed, 1))
        return y, y_hold


def _box(intervals):
    return np.asarray(intervals, dtype=float).reshape(-1, 2)


_PP_TRUTH = {"lotka_volterra": [1.0, 0.1, 1.5, 0.75], "bazykin": [1.0, 0.1, 1.5, 0.75, 0.01, 0.01]}
_EPI_TRUTH = {
    "sir": [0.5, 0.001, 0.01, 0.02],
    "sir_latent": [0.5, 0.001, 0.01, 0.02, 0.1],
    "sir_reinfect": [0.5, 0.001, 0.01, 0.02, 0.1],
}


def _polynomial(name, ids, design, holdout, noise_sd, truth_value, interval):
    models, hold, truths, boxes = [], [], [], []
    for mid in ids:
        if mid not in POLYNOMIAL_ORDERS:
            raise ConfigError(f"experiment {name} takes polynomial models, got {mid!r}")
        order = POLYNOMIAL_ORDERS[mid]
        models.append(polynomial_model(order, design, noise_sd, mid))
        hold.append(polynomial_model(order, holdout, noise_sd, mid))
        truths.append(np.full(order + 1, float(truth_value)))
        boxes.append(_box([interval] * (order + 1)))
    return Experiment(name, tuple(ids), tuple(models), tuple(hold), tuple(truths), tuple(boxes))


def _ode(name, ids, truth_table, window, holdout, rate_interval, unknown_initial, init_interval):
    models, hold, truths, boxes = [], [], [], []
    for mid in ids:
        if mid not in truth_table:
            raise ConfigError(f"experiment {name} takes {sorted(truth_table)}, got {mid!r}")
        spec = ODE_KINDS[mid]
        models.append(ode_model(mid, *window, unknown_initial=unknown_initial))
        hold.append(ode_model(mid, *holdout, unknown_initial=unknown_initial))
        truth = list(truth_table[mid])
        box = [rate_interval] * spec.n_rates
        if unknown_initial:
            truth += list(spec.initial_state)
            box += [init_interval] * len(spec.initial_state)
        truths.append(np.asarray(truth))
        boxes.append(_box(box))
    return Experiment(
        name, tuple(ids), tuple(models), tuple(hold), tuple(truths), tuple(boxes), arctan=unknown_initial
    )


def gaussian_mean_model(n_obs=10, name="gaussian"):
    """``y_j = theta + eps_j`` for ``j < n_obs`` with unit noise."""
    ones = np.ones((1, n_obs))

    def forward(thetas):
        return thetas @ ones, np.zeros(thetas.shape[0], dtype=bool)

    return ModelSpec(name=name, dim=1, output_dim=n_obs, forward=forward, noise_sd=1.0)


EXPERIMENTS = {
    "polynomial": dict(models=("poly3", "poly4")),
    "polynomial_alpha": dict(models=("poly3", "poly10")),
    "predator_prey": dict(models=("lotka_volterra", "bazykin")),
    "predator_prey_difficult": dict(models=("lotka_volterra", "bazykin")),
    "epidemics": dict(models=("sir", "sir_latent", "sir_reinfect")),
    "epidemics_difficult": dict(models=("sir_latent", "sir_reinfect")),
    "gaussian": dict(models=("gaussian",)),
}


def build_experiment(name, model_ids=None):
    """Resolve experiment ``name`` for the candidate identifiers ``model_ids``."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; known: {sorted(EXPERIMENTS)}")
    ids = tuple(model_ids) if model_ids else EXPERIMENTS[name]["models"]
    if not ids:
        raise ConfigError("at least one model is required")
    if name == "polynomial":
        return _polynomial(
            name, ids, polynomial_design(-1, 5, 25), polynomial_design(5, 6, 5), 3.0, 40.0, (30.0, 50.0)
        )
    if name == "polynomial_alpha":
        return _polynomial(
            name, ids, polynomial_design(-1, 2, 20), polynomial_design(2, 3, 5), 1.0, 4.0, (-100.0, 100.0)
        )
    if name == "predator_prey":
        return _ode(name, ids, _PP_TRUTH, (0, 20), (21, 26), (0.0, 2.0), False, None)
    if name == "predator_prey_difficult":
        return _ode(name, ids, _PP_TRUTH, (10, 30), (31, 36), (0.0, 2.0), True, (0.0, 2000.0))
    if name == "epidemics":
        return _ode(name, ids, _EPI_TRUTH, (0, 70), (71, 86), (0.0, 1.0), False, None)
    if name == "epidemics_difficult":
        return _ode(name, ids, _EPI_TRUTH, (10, 80), (81, 96), (0.0, 1.0), True, (0.0, 500.0))
    # gaussian mean toy with a misspecified prior
    if ids != ("gaussian",):
        raise ConfigError("experiment gaussian takes the single model 'gaussian'")
    return Experiment(
        name,
        ids,
        (gaussian_mean_model(10),),
        (gaussian_mean_model(10),),
        (np.array([3.0]),),
        (_box([(-10.0, 0.0)]),),
    )
