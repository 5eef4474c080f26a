import numpy as np
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted  # noqa: F401  (re-export)

from .exceptions import ConfigError


def check_observed(y, output_dim=None):
    """Validate an observed summary vector and return it as a 1-D float array."""
    y = check_array(np.asarray(y, dtype=float), ensure_2d=False, dtype=np.float64)
    if y.ndim == 2 and 1 in y.shape:
        y = y.ravel()
    if y.ndim != 1:
        raise ValueError(f"observed data must be a single summary vector, got shape {y.shape}")
    if output_dim is not None and y.size != output_dim:
        raise ValueError(f"observed length {y.size} does not match simulator output {output_dim}")
    return y


def check_models(models, prior=None):
    models = list(models)
    if not models:
        raise ConfigError("at least one candidate model is required")
    L = models[0].output_dim
    for mdl in models:
        if mdl.output_dim != L:
            raise ConfigError(
                f"model {mdl.name} outputs {mdl.output_dim} values, {models[0].name} outputs {L}"
            )
    if prior is not None:
        if prior.K != len(models):
            raise ConfigError(f"prior has {prior.K} boxes for {len(models)} models")
        for m, (mdl, d) in enumerate(zip(models, prior.dims)):
            if mdl.dim != d:
                raise ConfigError(f"prior box {m} has {d} coordinates, model {mdl.name} has {mdl.dim}")
    return models


def check_positive_int(value, name, minimum=1):
    if int(value) != value or int(value) < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
