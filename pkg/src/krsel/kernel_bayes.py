"""Kernel ABC: posterior kernel-mean weights from simulated summaries."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import NumericalError
from .kernels import gaussian_matrix, gram_matrix
from .state import ParticleEnsemble

logger = logging.getLogger(__name__)

MAX_ESCALATIONS = 3
LOW_SIGNAL = 1e-12


@dataclass(frozen=True, eq=False)
class PosteriorEmbedding:
    """Particles paired with signed weights ``w``; the embedding is ``sum_i w_i k(., particle_i)``."""

    particles: ParticleEnsemble
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size != self.particles.n:
            raise ValueError(f"{w.size} weights for {self.particles.n} particles")
        if not np.all(np.isfinite(w)):
            raise ValueError("posterior embedding weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.particles.n


def kernel_abc_weights(G, k_star, delta):
    """Solve ``(G + n*delta*I) w = k_star`` by Cholesky factorisation.

    If the factorisation fails in floating point the regulariser is raised
    tenfold, up to three times, before giving up with a NumericalError.
    """
    G = np.asarray(G, dtype=float)
    k_star = np.asarray(k_star, dtype=float).ravel()
    n = G.shape[0]
    if G.shape != (n, n) or k_star.size != n:
        raise ValueError(f"shape mismatch: G {G.shape}, k_star {k_star.shape}")
    if not np.all(np.isfinite(k_star)):
        raise ValueError("k_star must be finite")
    delta = float(delta)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if not np.allclose(G, G.T, rtol=0, atol=1e-12):
        raise ValueError("Gram matrix must be symmetric")

    if np.max(np.abs(k_star), initial=0.0) < LOW_SIGNAL:
        logger.warning("observed summary is far from every simulation (max k_star < %g)", LOW_SIGNAL)

    d = delta
    for attempt in range(MAX_ESCALATIONS + 1):
        A = G + n * d * np.eye(n)
        try:
            factor = cho_factor(A, lower=True, check_finite=True)
        except LinAlgError:
            if attempt == MAX_ESCALATIONS:
                break
            logger.warning("Cholesky failed at delta=%g, retrying with %g", d, 10 * d)
            d *= 10
            continue
        w = cho_solve(factor, k_star)
        scale = max(np.max(np.abs(k_star)), np.finfo(float).tiny)
        residual = np.max(np.abs(A @ w - k_star))
        if residual > 1e-8 * scale:
            raise NumericalError(
                "kernel ABC solve residual too large", residual=residual, delta=d, n=n
            )
        return w
    raise NumericalError(
        "Gram system not positive definite after regulariser escalation",
        delta=delta,
        final_delta=d,
        n=n,
        min_diag=float(np.min(np.diag(G))),
    )


def embed_posterior(ensemble, observed, k_y, delta, simulated):
    """Kernel-ABC posterior embedding for ``ensemble`` given one simulation per particle."""
    Y = np.asarray(simulated, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != ensemble.n:
        raise ValueError(f"{Y.shape[0]} simulations for {ensemble.n} particles")
    y_star = np.asarray(observed, dtype=float).ravel()
    if y_star.size != Y.shape[1]:
        raise ValueError(f"observed length {y_star.size} != simulated length {Y.shape[1]}")
    G = gram_matrix(Y, k_y)
    k_star = gaussian_matrix(Y, y_star[None, :], k_y.bandwidth)[:, 0]
    w = kernel_abc_weights(G, k_star, delta)
    return PosteriorEmbedding(ensemble, w)
