"""Joint model selection and parameter estimation for simulators by kernel recursive ABC."""

from .baselines import (
    ABCMCSelector,
    ABCSMCSelector,
    ModelPosterior,
    abc_mc_select,
    abc_smc_select,
    mean_shift_mode,
)
from .estimator import KernelRecursiveABC
from .exceptions import ConfigError, KrselError, NumericalError, SimulationError
from .herding import HerdingConfig, herd_sample, herding_objective, mmd_to_embedding
from .kernel_bayes import PosteriorEmbedding, embed_posterior, kernel_abc_weights
from .kernels import GaussianKernelSpec, ProductStateKernelSpec, gram_matrix, median_heuristic
from .simulators import ModelSpec, ode_model, polynomial_model, simulate_mixture
from .state import MixtureState, ParamVector, ParticleEnsemble, PriorSpec, SimplexWeights

__version__ = "0.1.0"

__all__ = [
    "ABCMCSelector",
    "ABCSMCSelector",
    "ConfigError",
    "GaussianKernelSpec",
    "HerdingConfig",
    "KernelRecursiveABC",
    "KrselError",
    "MixtureState",
    "ModelPosterior",
    "ModelSpec",
    "NumericalError",
    "ParamVector",
    "ParticleEnsemble",
    "PosteriorEmbedding",
    "PriorSpec",
    "ProductStateKernelSpec",
    "SimplexWeights",
    "SimulationError",
    "abc_mc_select",
    "abc_smc_select",
    "embed_posterior",
    "gram_matrix",
    "herd_sample",
    "herding_objective",
    "kernel_abc_weights",
    "mean_shift_mode",
    "median_heuristic",
    "mmd_to_embedding",
    "ode_model",
    "polynomial_model",
    "simulate_mixture",
]
