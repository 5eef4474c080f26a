"""Gaussian kernels, the product kernel on mixture states, and bandwidths."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import SimulationError
from .state import MixtureState

# medians at or below this are treated as "all points coincide"
DEGENERATE_DISTANCE = 1e-12
FALLBACK_BANDWIDTH = 1.0


def _check_bandwidth(value, name="bandwidth"):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class GaussianKernelSpec:
    """``k(x, x') = exp(-||x - x'||^2 / bandwidth^2)``."""

    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "bandwidth", _check_bandwidth(self.bandwidth))

    def __call__(self, X, Y=None):
        return gaussian_matrix(X, X if Y is None else Y, self.bandwidth)


@dataclass(frozen=True)
class ProductStateKernelSpec:
    """Gaussian on the simplex times one Gaussian per model parameter block."""

    simplex_bandwidth: float
    param_bandwidths: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "simplex_bandwidth", _check_bandwidth(self.simplex_bandwidth, "simplex_bandwidth")
        )
        bws = tuple(_check_bandwidth(b, "param bandwidth") for b in self.param_bandwidths)
        object.__setattr__(self, "param_bandwidths", bws)

    @property
    def K(self):
        return len(self.param_bandwidths)

    def coordinate_scales(self, dims):
        """Per-coordinate ``1 / bandwidth`` over a flattened state of block sizes ``dims``.

        Scaling each coordinate this way turns the product kernel into a single
        unit-bandwidth Gaussian on the flattened vector.
        """
        if len(dims) != self.K:
            raise ValueError(f"kernel has {self.K} parameter bandwidths, state has {len(dims)} blocks")
        parts = [np.full(len(dims), 1.0 / self.simplex_bandwidth)]
        parts += [np.full(d, 1.0 / g) for d, g in zip(dims, self.param_bandwidths)]
        return np.concatenate(parts)

    def matrix(self, A, B, dims):
        """Kernel matrix between flattened state rows ``A`` and ``B``."""
        scales = self.coordinate_scales(dims)
        A = np.atleast_2d(A) * scales
        B = np.atleast_2d(B) * scales
        return np.exp(-cdist(A, B, "sqeuclidean"))


def squared_distances(X, Y):
    """Pairwise squared Euclidean distances from explicit coordinate differences.

    The ``|x|^2 - 2 x.y + |y|^2`` expansion is avoided on purpose: it loses all
    precision for nearly equal points, exactly where ``k`` is close to one.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return cdist(X, Y, "sqeuclidean")


def gaussian_matrix(X, Y, bandwidth):
    return np.exp(-squared_distances(X, Y) / bandwidth**2)


def gaussian_eval(x, x2, spec):
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {x2.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(x2))):
        raise ValueError("kernel inputs must be finite")
    d = x - x2
    return float(np.exp(-np.dot(d, d) / spec.bandwidth**2))


def state_kernel_eval(a, b, spec):
    """Product kernel between two :class:`MixtureState` objects."""
    if not (isinstance(a, MixtureState) and isinstance(b, MixtureState)):
        raise TypeError("state_kernel_eval expects MixtureState arguments")
    if a.dims != b.dims:
        raise ValueError(f"state dimension mismatch: {a.dims} vs {b.dims}")
    if spec.K != a.K:
        raise ValueError(f"kernel is for {spec.K} models, states have {a.K}")
    d = a.phi - b.phi
    total = np.dot(d, d) / spec.simplex_bandwidth**2
    for m, g in enumerate(spec.param_bandwidths):
        d = a.theta(m) - b.theta(m)
        total += np.dot(d, d) / g**2
    return float(np.exp(-total))


def median_heuristic(points, scale=1.0):
    """``scale`` times the median Euclidean distance over distinct index pairs.

    Falls back to ``scale * 1.0`` when there is a single point or the median
    distance is (numerically) zero.
    """
    scale = _check_bandwidth(scale, "scale")
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("median_heuristic needs at least one point")
    if X.shape[0] == 1:
        return scale * FALLBACK_BANDWIDTH
    med = float(np.median(pdist(X, "euclidean")))
    if not np.isfinite(med) or med <= DEGENERATE_DISTANCE:
        return scale * FALLBACK_BANDWIDTH
    return scale * med


def gram_matrix(points, kernel):
    """Symmetric Gram matrix of ``points`` under ``kernel``.

    ``kernel`` is a :class:`GaussianKernelSpec` or any callable returning a
    kernel value for two vectors. Only the upper triangle is evaluated.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n == 0:
        raise ValueError("gram_matrix needs at least one point")
    if not np.all(np.isfinite(X)):
        raise SimulationError("non-finite simulated summary reached the Gram matrix")
    if isinstance(kernel, GaussianKernelSpec):
        G = squareform(np.exp(-pdist(X, "sqeuclidean") / kernel.bandwidth**2))
        np.fill_diagonal(G, 1.0)
    else:
        G = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                G[i, j] = G[j, i] = kernel(X[i], X[j])
    if not np.all(np.isfinite(G)):
        raise SimulationError("Gram matrix has non-finite entries")
    return G
