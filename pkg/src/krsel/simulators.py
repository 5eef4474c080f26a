"""Simulators: polynomial regressions, predator-prey and epidemic ODEs.

Every model maps a batch of parameter rows and a matching batch of standard
normal draws to a batch of summary vectors, so the noise-free part is a pure
function of the parameters and all randomness enters through ``eps``. ODEs
are integrated with a fixed-step classical Runge-Kutta scheme that is
vectorised across the batch.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._random import as_generator, substream

CLAMP = 1e8
DEFAULT_SUBSTEPS = 10


@dataclass(frozen=True)
class OdeSystem:
    """Autonomous-or-not ODE ``dx/dt = derivative(t, x, params)`` on a batch.

    ``derivative`` receives ``x`` of shape ``(n, state_dim)`` and ``params`` of
    shape ``(n, d)`` and must return an array shaped like ``x``.
    ``initial_state`` is either a fixed vector or ``None``, in which case the
    last ``state_dim`` parameter columns hold the initial state.
    """

    state_dim: int
    derivative: Callable
    initial_state: tuple = None
    t_end: float = 20.0
    obs_stride: float = 1.0

    @property
    def parameterized_initial(self):
        return self.initial_state is None

    def times(self):
        n = int(round(self.t_end / self.obs_stride))
        return np.arange(n + 1) * self.obs_stride


def _clamp(x):
    bad = ~np.isfinite(x) | (np.abs(x) > CLAMP)
    if not bad.any():
        return x, np.zeros(x.shape[0], dtype=bool)
    x = np.nan_to_num(x, nan=CLAMP, posinf=CLAMP, neginf=-CLAMP)
    x = np.clip(x, -CLAMP, CLAMP)
    return x, bad.reshape(x.shape[0], -1).any(axis=1)


def rk4_batch(system, params, substeps=DEFAULT_SUBSTEPS, initial_state=None):
    """Integrate a batch; returns ``(trajectories (n, n_times, state_dim), clamped (n,))``.

    Runaway or non-finite states are clamped to ``+-1e8`` and flagged.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    n = params.shape[0]
    s = system.state_dim
    if initial_state is not None:
        x = np.broadcast_to(np.asarray(initial_state, dtype=float), (n, s)).copy()
    elif system.parameterized_initial:
        x = params[:, -s:].copy()
    else:
        x = np.broadcast_to(np.asarray(system.initial_state, dtype=float), (n, s)).copy()
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(params))):
        raise ValueError("initial state and parameters must be finite")

    times = system.times()
    h = system.obs_stride / int(substeps)
    f = system.derivative
    out = np.empty((n, times.size, s))
    out[:, 0] = x
    clamped = np.zeros(n, dtype=bool)
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, times.size):
            for _ in range(int(substeps)):
                k1 = f(t, x, params)
                k2 = f(t + h / 2, x + h / 2 * k1, params)
                k3 = f(t + h / 2, x + h / 2 * k2, params)
                k4 = f(t + h, x + h * k3, params)
                x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                x, hit = _clamp(x)
                clamped |= hit
                t += h
            t = times[k]
            out[:, k] = x
    return out, clamped


def rk4_integrate(system, params, substeps=DEFAULT_SUBSTEPS):
    """Trajectory matrix ``(n_times, state_dim)`` at ``t = 0, stride, ..., t_end``."""
    traj, _ = rk4_batch(system, np.asarray(params, dtype=float)[None, :], substeps)
    return traj[0]


# -- right-hand sides --------------------------------------------------------


def lotka_volterra_rhs(t, z, p):
    x, y = z[:, 0], z[:, 1]
    return np.stack([p[:, 0] * x - p[:, 1] * x * y, -p[:, 2] * y + p[:, 3] * x * y], axis=1)


def bazykin_rhs(t, z, p):
    x, y = z[:, 0], z[:, 1]
    dx = p[:, 0] * x - p[:, 1] * x * y - p[:, 4] * x * x
    dy = -p[:, 2] * y + p[:, 3] * x * y - p[:, 5] * y * y
    return np.stack([dx, dy], axis=1)


def sir_rhs(t, z, p):
    S, I, R = z[:, 0], z[:, 1], z[:, 2]
    birth, infect, death, recover = p[:, 0], p[:, 1], p[:, 2], p[:, 3]
    new = infect * S * I
    return np.stack(
        [birth - new - death * S, new - recover * I - death * I, recover * I - death * R], axis=1
    )


def sir_latent_rhs(t, z, p):
    # state order S, L, I, R
    S, L, I, R = z[:, 0], z[:, 1], z[:, 2], z[:, 3]
    birth, infect, death, recover, activate = p[:, 0], p[:, 1], p[:, 2], p[:, 3], p[:, 4]
    new = infect * S * I
    return np.stack(
        [
            birth - new - death * S,
            new - activate * L - death * L,
            activate * L - recover * I - death * I,
            recover * I - death * R,
        ],
        axis=1,
    )


def sir_reinfect_rhs(t, z, p):
    S, I, R = z[:, 0], z[:, 1], z[:, 2]
    birth, infect, death, recover, relapse = p[:, 0], p[:, 1], p[:, 2], p[:, 3], p[:, 4]
    new = infect * S * I
    return np.stack(
        [
            birth - new - death * S + relapse * R,
            new - recover * I - death * I,
            recover * I - (death + relapse) * R,
        ],
        axis=1,
    )


@dataclass(frozen=True)
class _OdeKind:
    rhs: Callable
    n_rates: int
    initial_state: tuple
    observed: tuple  # state columns recorded in the summary


ODE_KINDS = {
    "lotka_volterra": _OdeKind(lotka_volterra_rhs, 4, (10.0, 5.0), (0, 1)),
    "bazykin": _OdeKind(bazykin_rhs, 6, (10.0, 5.0), (0, 1)),
    "sir": _OdeKind(sir_rhs, 4, (20.0, 50.0, 0.0), (0, 1, 2)),
    "sir_latent": _OdeKind(sir_latent_rhs, 5, (20.0, 0.0, 50.0, 0.0), (0, 2, 3)),
    "sir_reinfect": _OdeKind(sir_reinfect_rhs, 5, (20.0, 50.0, 0.0), (0, 1, 2)),
}

POLYNOMIAL_ORDERS = {"poly3": 3, "poly4": 4, "poly10": 10}
MODEL_IDS = tuple(POLYNOMIAL_ORDERS) + tuple(ODE_KINDS)


# -- model specs --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A candidate simulator.

    Attributes
    ----------
    name : str
    dim : int
        Number of parameters ``d_m``.
    output_dim : int
        Length of every summary vector.
    forward : callable
        ``forward(thetas (n, dim)) -> (Y (n, output_dim), clamped (n,))``,
        the noise-free map.
    noise_sd : float
        Observation noise scale multiplying standard normal draws.
    nonneg_mask : tuple of bool
        Parameters that are physically nonnegative.
    """

    name: str
    dim: int
    output_dim: int
    forward: Callable
    noise_sd: float = 1.0
    nonneg_mask: tuple = field(default=None)

    def __post_init__(self):
        mask = self.nonneg_mask
        mask = (False,) * self.dim if mask is None else tuple(bool(b) for b in mask)
        if len(mask) != self.dim:
            raise ValueError(f"nonneg_mask for {self.name} must have {self.dim} flags")
        object.__setattr__(self, "nonneg_mask", mask)

    def simulate_batch(self, thetas, eps, return_clamped=False):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != self.dim:
            raise ValueError(f"{self.name} expects {self.dim} parameters, got {thetas.shape[1]}")
        Y, clamped = self.forward(thetas)
        Y = Y + self.noise_sd * np.asarray(eps, dtype=float).reshape(Y.shape)
        return (Y, clamped) if return_clamped else Y

    def noise_free(self, theta):
        Y, _ = self.forward(np.atleast_2d(np.asarray(theta, dtype=float)))
        return Y[0]

    def __call__(self, theta, rng=None):
        """One noisy summary vector for parameter vector ``theta``."""
        rng = as_generator(rng)
        eps = rng.standard_normal(self.output_dim)
        return self.simulate_batch(np.asarray(theta, dtype=float)[None, :], eps[None, :])[0]


def polynomial_design(start, stop, num):
    return np.linspace(float(start), float(stop), int(num))


def simulate_polynomial(order, coeffs, design, noise_sd, noise=None):
    """``y_i = sum_l c_l x_i**l + noise_sd * eps_i``."""
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if coeffs.size != order + 1:
        raise ValueError(f"order {order} needs {order + 1} coefficients, got {coeffs.size}")
    model = polynomial_model(order, design, noise_sd)
    if noise_sd == 0:
        return model.noise_free(coeffs)
    return model(coeffs, noise)


def polynomial_model(order, design, noise_sd=3.0, name=None):
    x = np.asarray(design, dtype=float).ravel()
    powers = np.vander(x, order + 1, increasing=True)  # (L, order + 1)

    def forward(thetas):
        return thetas @ powers.T, np.zeros(thetas.shape[0], dtype=bool)

    return ModelSpec(
        name=name or f"poly{order}",
        dim=order + 1,
        output_dim=x.size,
        forward=forward,
        noise_sd=float(noise_sd),
    )


def ode_model(
    kind,
    t_start=0,
    t_stop=20,
    noise_sd=1.0,
    unknown_initial=False,
    substeps=DEFAULT_SUBSTEPS,
):
    """Summary simulator for one of the ODE models.

    Observations are the recorded compartments at integer times
    ``t_start, ..., t_stop - 1``, flattened time-major. With
    ``unknown_initial`` the full initial state becomes trailing parameters.
    """
    if kind not in ODE_KINDS:
        raise KeyError(f"unknown ODE model {kind!r}; known: {sorted(ODE_KINDS)}")
    spec = ODE_KINDS[kind]
    s = len(spec.initial_state)
    system = OdeSystem(
        state_dim=s,
        derivative=spec.rhs,
        initial_state=None if unknown_initial else spec.initial_state,
        t_end=float(t_stop - 1),
    )
    obs = np.asarray(spec.observed)
    window = slice(int(t_start), int(t_stop))
    dim = spec.n_rates + (s if unknown_initial else 0)
    n_out = (int(t_stop) - int(t_start)) * obs.size

    def forward(thetas):
        traj, clamped = rk4_batch(system, thetas, substeps)
        Y = np.maximum(traj[:, window][:, :, obs], 0.0)
        return Y.reshape(Y.shape[0], -1), clamped

    return ModelSpec(
        name=kind, dim=dim, output_dim=n_out, forward=forward, noise_sd=float(noise_sd),
        nonneg_mask=(True,) * dim,
    )


def simulate_ode_model(model, params, noise=None, **opts):
    """Noisy summary vector of ODE ``model`` (identifier) at ``params``.

    ``opts`` are forwarded to :func:`ode_model` (``t_start``, ``t_stop``,
    ``noise_sd``, ``unknown_initial``, ``substeps``). With ``noise_sd=0`` the
    noise-free trajectory summary is returned.
    """
    spec = ode_model(model, **opts)
    if spec.noise_sd == 0:
        return spec.noise_free(params)
    return spec(params, noise)


def arctan_transform(y):
    return np.arctan(np.asarray(y, dtype=float))


def _draw_model(phi, rng):
    cdf = np.cumsum(phi)
    m = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(m, len(phi) - 1)


def simulate_mixture(state, models, rng=None):
    """Draw ``m ~ Multinomial(phi)`` and simulate model ``m`` at ``theta^m``."""
    rng = as_generator(rng)
    if len(models) != state.K:
        raise ValueError(f"state has {state.K} models, {len(models)} simulators given")
    m = _draw_model(state.phi, rng)
    L = models[m].output_dim
    eps = rng.standard_normal(L)
    y = models[m].simulate_batch(state.theta(m)[None, :], eps[None, :])[0]
    return y, m


def simulate_ensemble(ensemble, models, root, recursion=0):
    """Mixture simulation for every particle of ``ensemble``.

    Particle ``i`` uses the sub-stream ``(recursion, i)`` below ``root`` and
    reproduces ``simulate_mixture`` exactly; the model runs are batched.

    Returns
    -------
    Y : ndarray (n, L)
    chosen : ndarray of int (n,)
    clamped : ndarray of bool (n,)
    """
    n = ensemble.n
    L = models[0].output_dim
    if any(mdl.output_dim != L for mdl in models):
        raise ValueError("all candidate models must share the summary dimension")
    chosen = np.empty(n, dtype=int)
    eps = np.empty((n, L))
    for i in range(n):
        rng = substream(root, recursion, i)
        chosen[i] = _draw_model(ensemble.phi[i], rng)
        eps[i] = rng.standard_normal(L)
    Y = np.empty((n, L))
    clamped = np.zeros(n, dtype=bool)
    for m, mdl in enumerate(models):
        rows = np.flatnonzero(chosen == m)
        if rows.size:
            Y[rows], clamped[rows] = mdl.simulate_batch(
                ensemble.thetas[m][rows], eps[rows], return_clamped=True
            )
    return Y, chosen, clamped
