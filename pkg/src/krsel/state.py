"""Mixture states over candidate models and ensembles of them.

A state holds mixing coefficients on the probability simplex together with
one parameter vector per candidate model. Ensembles keep the same data as
dense arrays (``phi`` of shape ``(n, K)`` and one ``(n, d_m)`` array per
model) because every downstream computation is vectorised.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._random import as_generator
from .exceptions import ConfigError

SIMPLEX_TOL = 1e-9
SIMPLEX_HARD_TOL = 1e-6


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """Mixing coefficients ``phi``: nonnegative, summing to one.

    Float dust up to ``1e-6`` in the total is renormalised away; anything
    larger is treated as a logic error.
    """

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).ravel()
        if phi.size == 0:
            raise ValueError("simplex weights need at least one component")
        if not np.all(np.isfinite(phi)):
            raise ValueError("simplex weights must be finite")
        if np.any(phi < -SIMPLEX_TOL):
            raise ValueError(f"negative simplex weight: {phi}")
        phi = np.clip(phi, 0.0, None)
        total = phi.sum()
        if abs(total - 1.0) > SIMPLEX_HARD_TOL:
            raise ValueError(f"simplex weights sum to {total!r}, not 1")
        if abs(total - 1.0) > SIMPLEX_TOL:
            phi = phi / total
        object.__setattr__(self, "phi", _frozen(phi))

    @property
    def K(self):
        return self.phi.size

    def __eq__(self, other):
        return isinstance(other, SimplexWeights) and np.array_equal(self.phi, other.phi)

    def __hash__(self):
        return hash(self.phi.tobytes())


@dataclass(frozen=True, eq=False)
class ParamVector:
    theta: np.ndarray
    model_index: int

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        if not np.all(np.isfinite(theta)):
            raise ValueError(f"parameter vector for model {self.model_index} is not finite")
        if self.model_index < 0:
            raise ValueError("model_index must be nonnegative")
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "model_index", int(self.model_index))

    @property
    def dim(self):
        return self.theta.size

    def __eq__(self, other):
        return (
            isinstance(other, ParamVector)
            and self.model_index == other.model_index
            and np.array_equal(self.theta, other.theta)
        )

    def __hash__(self):
        return hash((self.model_index, self.theta.tobytes()))


@dataclass(frozen=True, eq=False)
class MixtureState:
    """One point ``(phi^1..phi^K, theta^1..theta^K)`` of the joint state space."""

    weights: SimplexWeights
    params: tuple

    def __post_init__(self):
        weights = self.weights
        if not isinstance(weights, SimplexWeights):
            weights = SimplexWeights(weights)
        params = []
        for m, p in enumerate(self.params):
            if not isinstance(p, ParamVector):
                p = ParamVector(p, m)
            if p.model_index != m:
                raise ValueError(f"parameter vector {m} carries model_index {p.model_index}")
            params.append(p)
        if len(params) != weights.K:
            raise ValueError(f"{weights.K} mixing weights but {len(params)} parameter vectors")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "params", tuple(params))

    @property
    def K(self):
        return self.weights.K

    @property
    def dims(self):
        return tuple(p.dim for p in self.params)

    @property
    def D(self):
        return self.K + sum(self.dims)

    @property
    def phi(self):
        return self.weights.phi

    def theta(self, m):
        return self.params[m].theta

    def flatten(self):
        return flatten(self)

    def __eq__(self, other):
        return (
            isinstance(other, MixtureState)
            and self.weights == other.weights
            and self.params == other.params
        )

    def __hash__(self):
        return hash((self.weights, self.params))


def flatten(state):
    """Concatenate ``[phi^1..phi^K, theta^1, ..., theta^K]`` into one vector."""
    return np.concatenate([state.weights.phi] + [p.theta for p in state.params])


def unflatten(vector, dims):
    """Inverse of :func:`flatten` for parameter dimensions ``dims``."""
    vector = np.asarray(vector, dtype=float).ravel()
    K = len(dims)
    if vector.size != K + sum(dims):
        raise ValueError(f"vector of length {vector.size} does not match dims {tuple(dims)}")
    offsets = np.cumsum([K] + list(dims))
    params = [ParamVector(vector[offsets[m] : offsets[m + 1]], m) for m in range(K)]
    return MixtureState(SimplexWeights(vector[:K]), tuple(params))


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Dirichlet(alpha, ..., alpha) on the simplex and uniform boxes per model.

    Parameters
    ----------
    dirichlet_alpha : float
        Symmetric concentration, must be positive.
    boxes : sequence
        One entry per model, each an array-like of shape ``(d_m, 2)`` holding
        ``(lower, upper)`` per coordinate.
    """

    dirichlet_alpha: float
    boxes: tuple

    def __post_init__(self):
        alpha = float(self.dirichlet_alpha)
        if not np.isfinite(alpha) or alpha <= 0:
            raise ConfigError(f"dirichlet_alpha must be positive, got {self.dirichlet_alpha!r}")
        boxes = []
        if len(self.boxes) == 0:
            raise ConfigError("prior needs at least one model")
        for m, box in enumerate(self.boxes):
            box = np.asarray(box, dtype=float)
            if box.ndim == 1 and box.size == 2:
                box = box[None, :]
            if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] == 0:
                raise ConfigError(f"box for model {m} must have shape (d, 2), got {box.shape}")
            if not np.all(np.isfinite(box)) or np.any(box[:, 0] >= box[:, 1]):
                raise ConfigError(f"box for model {m} needs finite lower < upper: {box.tolist()}")
            boxes.append(_frozen(box))
        object.__setattr__(self, "dirichlet_alpha", alpha)
        object.__setattr__(self, "boxes", tuple(boxes))

    @classmethod
    def from_intervals(cls, dirichlet_alpha, dims, intervals):
        """Build boxes by repeating one ``(lower, upper)`` per model over its dims."""
        boxes = [np.tile(np.asarray(iv, dtype=float), (d, 1)) for d, iv in zip(dims, intervals)]
        return cls(dirichlet_alpha, tuple(boxes))

    @property
    def K(self):
        return len(self.boxes)

    @property
    def dims(self):
        return tuple(b.shape[0] for b in self.boxes)

    def sample_weights(self, n, rng):
        return sample_dirichlet(self.dirichlet_alpha, self.K, n, rng)

    def sample_params(self, n, rng):
        rng = as_generator(rng)
        return tuple(rng.uniform(b[:, 0], b[:, 1], size=(n, b.shape[0])) for b in self.boxes)

    def contains(self, m, theta):
        """Elementwise box membership for rows of ``theta`` under model ``m``."""
        box = self.boxes[m]
        theta = np.atleast_2d(theta)
        return np.all((theta >= box[:, 0]) & (theta <= box[:, 1]), axis=1)

    def log_volume(self, m):
        box = self.boxes[m]
        return float(np.sum(np.log(box[:, 1] - box[:, 0])))


def sample_dirichlet(alpha, K, n, rng):
    """Draw ``n`` symmetric Dirichlet(alpha) vectors of length ``K``.

    Gamma variates are generated in log space with the shape-boosting
    identity ``G(a) = G(a + 1) * U**(1/a)``, so concentrations far below one
    never underflow to an all-zero vector.
    """
    rng = as_generator(rng)
    alpha = float(alpha)
    if alpha <= 0:
        raise ConfigError("dirichlet alpha must be positive")
    if K == 1:
        return np.ones((n, 1))
    if alpha >= 1.0:
        g = rng.standard_gamma(alpha, size=(n, K))
        logs = np.log(g)
    else:
        g = rng.standard_gamma(alpha + 1.0, size=(n, K))
        u = rng.random(size=(n, K))
        logs = np.log(g) + np.log(u) / alpha
    logs -= logs.max(axis=1, keepdims=True)
    phi = np.exp(logs)
    totals = phi.sum(axis=1, keepdims=True)
    bad = ~np.isfinite(totals[:, 0]) | (totals[:, 0] <= 0)
    if np.any(bad):
        # alpha -> 0 limit: all mass on one uniformly chosen vertex
        phi[bad] = 0.0
        phi[bad, rng.integers(0, K, size=int(bad.sum()))] = 1.0
        totals = phi.sum(axis=1, keepdims=True)
    return phi / totals


class ParticleEnsemble:
    """``n`` mixture states stored column-wise.

    Parameters
    ----------
    phi : array of shape (n, K)
    thetas : sequence of K arrays, the m-th of shape (n, d_m)
    recursion_index : int
        Recursion ``N >= 1`` at which this ensemble is the prior sample.
    """

    def __init__(self, phi, thetas, recursion_index=1):
        phi = np.array(phi, dtype=float, ndmin=2)
        n, K = phi.shape
        if n < 1:
            raise ValueError("an ensemble needs at least one state")
        if len(thetas) != K:
            raise ValueError(f"{K} simplex columns but {len(thetas)} parameter blocks")
        if np.any(phi < -SIMPLEX_TOL):
            raise ValueError("negative mixing weight in ensemble")
        phi = np.clip(phi, 0.0, None)
        totals = phi.sum(axis=1)
        if np.any(np.abs(totals - 1.0) > SIMPLEX_HARD_TOL):
            raise ValueError("ensemble mixing weights do not sum to one")
        off = np.abs(totals - 1.0) > SIMPLEX_TOL
        phi[off] /= totals[off, None]
        blocks = []
        for m, th in enumerate(thetas):
            th = np.array(th, dtype=float)
            if th.ndim == 1:
                th = th[:, None]
            if th.shape[0] != n:
                raise ValueError(f"parameter block {m} has {th.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(th)):
                raise ValueError(f"parameter block {m} is not finite")
            blocks.append(_frozen(th))
        if int(recursion_index) < 1:
            raise ValueError("recursion_index must be >= 1")
        self.phi = _frozen(phi)
        self.thetas = tuple(blocks)
        self.recursion_index = int(recursion_index)

    @classmethod
    def from_states(cls, states, recursion_index=1):
        states = list(states)
        if not states:
            raise ValueError("an ensemble needs at least one state")
        dims = states[0].dims
        for s in states:
            if s.dims != dims:
                raise ValueError("all states in an ensemble must share K and d_m")
        phi = np.stack([s.phi for s in states])
        thetas = [np.stack([s.theta(m) for s in states]) for m in range(len(dims))]
        return cls(phi, thetas, recursion_index)

    @classmethod
    def from_flat(cls, matrix, dims, recursion_index=1):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        K = len(dims)
        offsets = np.cumsum([K] + list(dims))
        thetas = [matrix[:, offsets[m] : offsets[m + 1]] for m in range(K)]
        return cls(matrix[:, :K], thetas, recursion_index)

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def K(self):
        return self.phi.shape[1]

    @property
    def dims(self):
        return tuple(t.shape[1] for t in self.thetas)

    @property
    def D(self):
        return self.K + sum(self.dims)

    @property
    def states(self):
        return [self[i] for i in range(self.n)]

    def flat(self):
        """Dense ``(n, D)`` matrix, one flattened state per row."""
        return np.hstack((self.phi,) + self.thetas)

    def take(self, indices, recursion_index=None):
        idx = np.asarray(indices, dtype=int)
        return ParticleEnsemble(
            self.phi[idx],
            [t[idx] for t in self.thetas],
            self.recursion_index if recursion_index is None else recursion_index,
        )

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        params = tuple(ParamVector(t[i], m) for m, t in enumerate(self.thetas))
        return MixtureState(SimplexWeights(self.phi[i]), params)

    def __eq__(self, other):
        return (
            isinstance(other, ParticleEnsemble)
            and self.recursion_index == other.recursion_index
            and np.array_equal(self.phi, other.phi)
            and len(self.thetas) == len(other.thetas)
            and all(np.array_equal(a, b) for a, b in zip(self.thetas, other.thetas))
        )

    def __repr__(self):
        return f"ParticleEnsemble(n={self.n}, K={self.K}, dims={self.dims}, N={self.recursion_index})"

    def column_names(self):
        names = [f"phi_{m + 1}" for m in range(self.K)]
        for m, d in enumerate(self.dims):
            names += [f"theta_{m + 1}_{j + 1}" for j in range(d)]
        return names

    def to_csv(self, path_or_buf=None):
        """Write one flattened state per row; returns the text if no target given."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.column_names())
        for row in self.flat():
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return None

    @classmethod
    def read_csv(cls, path_or_buf, recursion_index=1):
        if hasattr(path_or_buf, "read"):
            text = path_or_buf.read()
        else:
            with open(path_or_buf, newline="") as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        K = sum(1 for h in header if h.startswith("phi_"))
        dims = [sum(1 for h in header if h.startswith(f"theta_{m + 1}_")) for m in range(K)]
        matrix = np.array([[float(v) for v in r] for r in body])
        return cls.from_flat(matrix, dims, recursion_index)


def sample_initial_ensemble(prior, n, rng):
    """Draw ``n`` i.i.d. states from the initial prior (recursion 1)."""
    if not isinstance(prior, PriorSpec):
        raise ConfigError("prior must be a PriorSpec")
    if int(n) < 1:
        raise ConfigError(f"ensemble size must be >= 1, got {n}")
    rng = as_generator(rng)
    phi = prior.sample_weights(int(n), rng)
    thetas = prior.sample_params(int(n), rng)
    return ParticleEnsemble(phi, thetas, recursion_index=1)
