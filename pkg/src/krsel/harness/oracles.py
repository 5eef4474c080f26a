"""Tractable checks of the recursive-posterior identity and of power-posterior concentration."""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import dirichlet, norm

from .._random import as_seed_sequence, child_sequence, substream
from ..estimator import KernelRecursiveABC
from ..state import PriorSpec
from .experiments import gaussian_mean_model


@dataclass(frozen=True)
class GridToy:
    """Mixture of one-parameter Gaussian-likelihood models on parameter grids.

    Model ``m`` has ``y_j ~ N(scale_m * theta, 1)`` for every observation and a
    uniform prior over the points of ``theta_grids[m]``. The simplex is
    discretised by midpoints of ``n_phi`` equal cells of the first coordinate
    (``K = 2``) or is the single point ``phi = 1`` (``K = 1``).
    """

    y_star: tuple = (0.3, 0.8, 0.5)
    theta_grids: tuple = field(
        default_factory=lambda: (tuple(np.linspace(-2.0, 2.0, 20)), tuple(np.linspace(-1.0, 3.0, 20)))
    )
    scales: tuple = (1.0, 0.5)
    dirichlet_alpha: float = 0.01
    n_phi: int = 49

    def __post_init__(self):
        K = len(self.theta_grids)
        if K not in (1, 2):
            raise ValueError("the grid toy supports one or two models")
        if len(self.scales) != K:
            raise ValueError("one scale per model is required")
        if any(len(g) > 50 for g in self.theta_grids):
            raise ValueError("parameter grids are limited to 50 points")

    @property
    def K(self):
        return len(self.theta_grids)

    def likelihoods(self):
        y = np.asarray(self.y_star, dtype=float)
        return [
            np.prod(norm.pdf(y[None, :], loc=c * np.asarray(g)[:, None]), axis=1)
            for g, c in zip(self.theta_grids, self.scales)
        ]

    def phi_grid(self):
        """Simplex points (rows) with their quadrature weights."""
        if self.K == 1:
            return np.ones((1, 1)), np.ones(1)
        u = (np.arange(self.n_phi) + 0.5) / self.n_phi
        return np.column_stack([u, 1.0 - u]), np.full(self.n_phi, 1.0 / self.n_phi)


def _joint_prior(toy):
    """Prior mass on the (phi, theta_1, ..., theta_K) grid."""
    phi, dw = toy.phi_grid()
    if toy.K == 1:
        w_phi = np.ones(1)
    else:
        w_phi = dirichlet(np.full(2, toy.dirichlet_alpha)).pdf(phi.T) * dw
    shape = (phi.shape[0],) + tuple(len(g) for g in toy.theta_grids)
    P = w_phi.reshape((-1,) + (1,) * toy.K)
    for m, g in enumerate(toy.theta_grids):
        s = [1] * (toy.K + 1)
        s[m + 1] = len(g)
        P = P * np.full(len(g), 1.0 / len(g)).reshape(s)
    return np.broadcast_to(P, shape).copy(), phi, dw


def _mixture_likelihood(toy, phi):
    lik = toy.likelihoods()
    out = 0.0
    for m in range(toy.K):
        s = [1] * (toy.K + 1)
        s[m + 1] = lik[m].size
        out = out + phi[:, m].reshape((-1,) + (1,) * toy.K) * lik[m].reshape(s)
    return out


def prop1_sides(toy, N):
    """Both sides of the marginal-posterior identity at recursion ``N``.

    The left side is the marginal density over the simplex grid of the joint
    posterior after ``N`` updates. The right side rebuilds it from the prior
    marginal, the per-model conditional priors and the normaliser ``C_N``,
    summing over each model's own parameter axis separately.
    """
    prior, phi, dw = _joint_prior(toy)
    L = _mixture_likelihood(toy, phi)
    pi_N = prior / prior.sum()
    for _ in range(N - 1):
        post = L * pi_N
        pi_N = post / post.sum()
    post = L * pi_N
    post = post / post.sum()
    theta_axes = tuple(range(1, toy.K + 1))
    lhs = post.sum(axis=theta_axes) / dw

    C_N = float((L * pi_N).sum())
    pi_phi = pi_N.sum(axis=theta_axes)
    lik = toy.likelihoods()
    evidence = np.zeros(phi.shape[0])
    for m in range(toy.K):
        other = tuple(a for a in theta_axes if a != m + 1)
        cond = pi_N.sum(axis=other) if other else pi_N
        cond = cond / pi_phi[:, None]
        evidence += phi[:, m] * (cond @ lik[m])
    rhs = pi_phi * evidence / C_N / dw
    return lhs, rhs


def prop1_check(toy=None, N=(1, 2)):
    """Largest relative discrepancy between the two sides over the simplex grid and ``N``."""
    toy = toy or GridToy()
    worst = 0.0
    for n in np.atleast_1d(N):
        lhs, rhs = prop1_sides(toy, int(n))
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.abs(lhs))))
    return worst


def power_posterior_oracle(
    seed=0,
    truth=3.0,
    prior_interval=(-10.0, 0.0),
    n_obs=10,
    n_iters=15,
    n_per_iter=100,
    bandwidth_scale=1.0,
    delta=0.1,
):
    """Distance of the first herded parameter to the maximum-likelihood estimate, per recursion.

    The toy has ``y_j ~ N(theta, 1)`` for ``j < n_obs`` and a single model, so
    the maximum-likelihood estimate is the sample mean.
    """
    root = as_seed_sequence(seed)
    model = gaussian_mean_model(n_obs)
    y = model(np.array([truth]), substream(root, 0))
    mle = float(np.mean(y))
    prior = PriorSpec(0.01, (np.array([prior_interval], dtype=float),))
    est = KernelRecursiveABC(
        [model],
        prior,
        n_per_iter=n_per_iter,
        n_iters=n_iters,
        bandwidth_scale=bandwidth_scale,
        delta=delta,
        random_state=child_sequence(root, 1),
    ).fit(y)
    return np.array([abs(float(s.theta(0)[0]) - mle) for s in est.state_trajectory_])
