"""Trial driver: fits, hyperparameter selection, error measures and metrics."""

import logging
import os
from dataclasses import dataclass, replace

import numpy as np

from .._random import as_seed_sequence, child_sequence, substream
from ..baselines import ABCMCSelector, ABCSMCSelector
from ..estimator import KernelRecursiveABC
from ..exceptions import KrselError
from ..simulators import ModelSpec, arctan_transform
from ..state import MixtureState, SimplexWeights
from . import io

logger = logging.getLogger(__name__)

METHODS = ("krsel", "abc-mc", "abc-smc")
HYPER_ITERS = 5
FIT_FRACTION = 0.8
DEFAULT_KNN = 100


@dataclass(frozen=True, eq=False)
class TrialResult:
    """Outcome of one method on one observed data set.

    Attributes
    ----------
    selected_model : int
    final_state : MixtureState
        For the proposed method, the first herded state of the last recursion.
    coefficients : SimplexWeights
    data_error, extrapolation_error : float
    per_iteration_log : ndarray of shape (n_iters, K)
    trial, seed : int
    method : str
    bandwidth_scale, delta : float
        Hyperparameters used (NaN for the baselines).
    """

    selected_model: int
    final_state: MixtureState
    coefficients: SimplexWeights
    data_error: float = float("nan")
    extrapolation_error: float = float("nan")
    per_iteration_log: np.ndarray = None
    trial: int = 0
    seed: int = 0
    method: str = "krsel"
    bandwidth_scale: float = float("nan")
    delta: float = float("nan")

    @property
    def params(self):
        return self.final_state.theta(self.selected_model)


@dataclass(frozen=True)
class MetricsRecord:
    model_error: float
    mean_data_error: float
    mean_extrapolation_error: float
    n_trials: int


def _estimate_error(estimate, models, observed, rng):
    m = estimate.selected_model
    y = models[m](estimate.final_state.theta(m), rng)
    return float(np.linalg.norm(y - np.asarray(observed, dtype=float)))


def data_error(estimate, observed, models, rng=None):
    """Euclidean distance between one simulation at the estimate and ``observed``."""
    return _estimate_error(estimate, models, observed, rng)


def extrapolation_error(estimate, holdout_models, holdout_observed, rng=None):
    """As :func:`data_error`, on the extrapolation design."""
    return _estimate_error(estimate, holdout_models, holdout_observed, rng)


def compute_metrics(trials, truth_model):
    """Model error (share of wrong selections) and mean errors over ``trials``."""
    trials = list(trials)
    if not trials:
        raise ValueError("compute_metrics needs at least one trial")
    wrong = sum(t.selected_model != truth_model for t in trials)
    return MetricsRecord(
        model_error=wrong / len(trials),
        mean_data_error=float(np.mean([t.data_error for t in trials])),
        mean_extrapolation_error=float(np.mean([t.extrapolation_error for t in trials])),
        n_trials=len(trials),
    )


def restrict(model, index):
    """Simulator whose summary keeps only the coordinates ``index`` of ``model``."""
    index = np.asarray(index)

    def forward(thetas):
        Y, clamped = model.forward(thetas)
        return Y[:, index], clamped

    return ModelSpec(
        name=model.name,
        dim=model.dim,
        output_dim=int(index.size),
        forward=forward,
        noise_sd=model.noise_sd,
        nonneg_mask=model.nonneg_mask,
    )


def _estimator(config, models, prior, s, delta, random_state, n_iters=None):
    return KernelRecursiveABC(
        models=list(models),
        prior=prior,
        n_per_iter=config.n_per_iter,
        n_iters=config.n_iters if n_iters is None else n_iters,
        bandwidth_scale=s,
        delta=delta,
        herding=config.herding_config(),
        arctan=config.arctan,
        random_state=random_state,
    )


def heldout_error(observed, config, s, delta, rng, *, models=None, prior=None, n_iters=HYPER_ITERS):
    """Short fit on the first 80% of coordinates, error on the remaining 20%."""
    exp = config.resolve()
    models = list(models or exp.models)
    prior = prior or config.prior()
    y = np.asarray(observed, dtype=float)
    L = y.size
    n_fit = min(max(int(np.floor(FIT_FRACTION * L)), 1), L - 1)
    fit_idx, held_idx = np.arange(n_fit), np.arange(n_fit, L)
    root = as_seed_sequence(rng)
    est = _estimator(config, [restrict(m, fit_idx) for m in models], prior, s, delta, child_sequence(root, 0), n_iters)
    est.fit(y[fit_idx])
    sim = models[est.selected_model_](est.params_, substream(root, 1))
    return float(np.linalg.norm(sim[held_idx] - y[held_idx]))


def select_hyperparameters(observed, config, rng=None, *, models=None, prior=None, error_fn=None):
    """Grid pair ``(s, delta)`` with the smallest held-out error.

    Every pair reuses the same random stream. Ties go to the smaller ``s``,
    then the smaller ``delta``. Pairs whose short run fails score ``inf``.

    Returns
    -------
    (s, delta, scores) where ``scores`` lists ``(s, delta, error)`` per pair.
    """
    grid = config.grid
    root = as_seed_sequence(rng)
    if len(grid) == 1:
        s, d = grid[0]
        return s, d, [(s, d, float("nan"))]
    error_fn = error_fn or heldout_error
    scores = []
    for s, d in grid:
        try:
            err = error_fn(observed, config, s, d, root, models=models, prior=prior)
        except KrselError as exc:
            logger.warning("hyperparameter pair s=%g delta=%g failed: %s", s, d, exc)
            err = float("inf")
        scores.append((s, d, float(err)))
    best = min(scores, key=lambda r: (r[2], r[0], r[1]))
    return best[0], best[1], scores


def run_kr_abc(config, observed, rng=None, *, s=None, delta=None, holdout=None, models=None, prior=None):
    """Fit the proposed method to ``observed`` and score the point estimate.

    ``holdout`` is an optional ``(holdout_models, holdout_observed)`` pair for
    the extrapolation error. Without ``s``/``delta`` the grid in ``config`` is
    searched first.
    """
    exp = config.resolve()
    models = list(models or exp.models)
    prior = prior or config.prior()
    root = as_seed_sequence(rng)
    if s is None or delta is None:
        s, delta, _ = select_hyperparameters(observed, config, child_sequence(root, 1), models=models, prior=prior)
    est = _estimator(config, models, prior, s, delta, child_sequence(root, 0)).fit(observed)
    result = TrialResult(
        selected_model=est.selected_model_,
        final_state=est.final_state_,
        coefficients=est.final_state_.weights,
        per_iteration_log=est.trajectory_,
        bandwidth_scale=float(s),
        delta=float(delta),
    )
    return _scored(result, models, observed, holdout, root)


def _scored(result, models, observed, holdout, root):
    d_err = data_error(result, observed, models, substream(root, 2))
    x_err = float("nan")
    if holdout is not None:
        x_err = extrapolation_error(result, holdout[0], holdout[1], substream(root, 3))
    return replace(result, data_error=d_err, extrapolation_error=x_err)


def _baseline_state(selector, prior):
    params = []
    for m, (thetas, _) in enumerate(selector.posterior_.accepted):
        if m == selector.selected_model_:
            params.append(selector.params_)
        elif len(thetas):
            params.append(thetas.mean(axis=0))
        else:
            params.append(prior.boxes[m].mean(axis=1))
    return MixtureState(SimplexWeights(selector.probs_), tuple(params))


def run_baseline(config, observed, method, rng=None, *, holdout=None, models=None, prior=None):
    """Fit ABC-MC or ABC-SMC with the simulation budget of the proposed method."""
    exp = config.resolve()
    models = list(models or exp.models)
    prior = prior or config.prior()
    root = as_seed_sequence(rng)
    opts = dict(config.baselines)
    transform = arctan_transform if config.arctan else None
    if method == "abc-mc":
        n_sims = int(opts.get("n_sims", config.n_per_iter * config.n_iters))
        selector = ABCMCSelector(
            models,
            prior,
            n_sims=n_sims,
            knn_k=int(opts.get("knn_k", min(DEFAULT_KNN, n_sims))),
            transform=transform,
            random_state=substream(root, 0),
        )
    elif method == "abc-smc":
        selector = ABCSMCSelector(
            models,
            prior,
            population=int(opts.get("population", config.n_per_iter)),
            generations=int(opts.get("generations", config.n_iters)),
            perturb_sd=float(opts.get("perturb_sd", np.sqrt(0.1))),
            transform=transform,
            random_state=substream(root, 0),
        )
    else:
        raise ValueError(f"unknown baseline {method!r}")
    selector.fit(observed)
    state = _baseline_state(selector, prior)
    result = TrialResult(
        selected_model=selector.selected_model_,
        final_state=state,
        coefficients=state.weights,
        per_iteration_log=np.asarray(selector.probs_)[None, :],
        method=method,
    )
    return _scored(result, models, observed, holdout, root)


def trial_seed(config, trial):
    return int(config.seed) + int(trial)


def run_trial(config, trial, method="krsel", *, s=None, delta=None):
    """Generate the observed data for ``trial`` and fit ``method`` to it.

    Returns ``(TrialResult, observed, holdout_observed)``.
    """
    exp = config.resolve()
    seed = trial_seed(config, trial)
    y, y_hold = exp.observe(config.truth_model, seed)
    root = child_sequence(as_seed_sequence(seed), 2)
    holdout = (exp.holdout_models, y_hold)
    if method == "krsel":
        res = run_kr_abc(config, y, root, s=s, delta=delta, holdout=holdout)
    elif method in METHODS:
        res = run_baseline(config, y, method, root, holdout=holdout)
    else:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    return replace(res, trial=int(trial), seed=seed, method=method), y, y_hold


def run_experiment(config, method="krsel", out_dir=None, *, s=None, delta=None):
    """Run every trial of ``config`` with ``method``; write CSVs when ``out_dir`` is given.

    Returns ``(trials, MetricsRecord)``.
    """
    trials = []
    for t in range(config.trials):
        res, y, y_hold = run_trial(config, t, method, s=s, delta=delta)
        trials.append(res)
        logger.info("trial %d (%s): model %d, data error %.4g", t, method, res.selected_model, res.data_error)
        if out_dir is not None:
            io.write_observed(os.path.join(out_dir, f"observed_{t}.csv"), y, y_hold)
            io.write_trajectory(os.path.join(out_dir, f"trajectory_{t}.csv"), res.per_iteration_log)
            io.write_state(os.path.join(out_dir, f"estimate_{t}.csv"), res.final_state)
    metrics = compute_metrics(trials, config.truth_model)
    if out_dir is not None:
        io.write_trials(os.path.join(out_dir, "trials.csv"), trials)
        io.write_metrics(os.path.join(out_dir, "metrics.csv"), [(method, config.truth_model, metrics)])
    return trials, metrics


def compare(config, out_dir=None, methods=METHODS):
    """Run each method on identical observed data and seeds.

    Results go to ``out_dir/<method>/`` with a combined ``out_dir/metrics.csv``.
    """
    records = []
    out = {}
    for method in methods:
        sub = None if out_dir is None else os.path.join(out_dir, method)
        trials, metrics = run_experiment(config, method, sub)
        out[method] = (trials, metrics)
        records.append((method, config.truth_model, metrics))
    if out_dir is not None:
        io.write_metrics(os.path.join(out_dir, "metrics.csv"), records)
    return out
