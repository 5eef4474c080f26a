"""Run configuration: a single JSON document with the RunConfig field names."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import ConfigError
from ..herding import HerdingConfig
from .experiments import build_experiment

DEFAULT_S_GRID = tuple(float(v) for v in np.logspace(-2, 2, 5, base=2))
DEFAULT_DELTA_GRID = (0.01, 0.1, 1.0)


@dataclass(frozen=True)
class RunConfig:
    """Settings for one experiment run.

    ``priors`` holds one entry per model: either a single ``[lower, upper]``
    applied to every coordinate or a list of per-coordinate pairs. ``None``
    selects the experiment's defaults. ``truth_model`` (index of the
    ground-truth candidate) and ``baselines`` (budgets of the comparison
    methods) extend the core fields.
    """

    experiment: str
    models: tuple = ()
    priors: tuple = None
    dirichlet_alpha: float = 0.01
    n_per_iter: int = 100
    n_iters: int = 20
    herding: dict = field(default_factory=dict)
    hyper_grid: dict = field(default_factory=lambda: {"s": list(DEFAULT_S_GRID), "delta": list(DEFAULT_DELTA_GRID)})
    seed: int = 0
    trials: int = 30
    transforms: dict = field(default_factory=dict)
    output_dir: str = "results"
    truth_model: int = 0
    baselines: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("n_per_iter", "n_iters", "trials"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not float(self.dirichlet_alpha) > 0:
            raise ConfigError("dirichlet_alpha must be positive")
        grid = self.hyper_grid
        if not isinstance(grid, dict) or not grid.get("s") or not grid.get("delta"):
            raise ConfigError("hyper_grid needs nonempty 's' and 'delta' lists")
        if any(not float(v) > 0 for v in list(grid["s"]) + list(grid["delta"])):
            raise ConfigError("hyper_grid values must be positive")
        object.__setattr__(self, "models", tuple(self.models))
        exp = self.resolve()
        if not 0 <= int(self.truth_model) < exp.K:
            raise ConfigError(f"truth_model {self.truth_model} out of range for {exp.K} models")
        self.prior()
        self.herding_config()
        unknown = set(self.transforms) - {"arctan"}
        if unknown:
            raise ConfigError(f"unknown transforms {sorted(unknown)}")

    def resolve(self):
        return build_experiment(self.experiment, self.models or None)

    def prior(self):
        exp = self.resolve()
        if self.priors is None:
            return exp.prior(self.dirichlet_alpha)
        if len(self.priors) != exp.K:
            raise ConfigError(f"{len(self.priors)} priors for {exp.K} models")
        boxes = []
        for entry, mdl in zip(self.priors, exp.models):
            arr = np.asarray(entry, dtype=float)
            if arr.shape == (2,):
                arr = np.tile(arr, (mdl.dim, 1))
            if arr.shape != (mdl.dim, 2):
                raise ConfigError(f"prior for {mdl.name} must be [lo, hi] or {mdl.dim} such pairs")
            boxes.append(arr)
        return exp.prior(self.dirichlet_alpha, boxes)

    def herding_config(self):
        try:
            return HerdingConfig(**self.herding)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"invalid herding settings: {err}") from err

    @property
    def arctan(self):
        return bool(self.transforms.get("arctan", self.resolve().arctan))

    @property
    def grid(self):
        return [(float(s), float(d)) for s in self.hyper_grid["s"] for d in self.hyper_grid["delta"]]

    def to_dict(self):
        d = asdict(self)
        d["models"] = list(self.models)
        return d


def load_config(path, **overrides):
    """Read a RunConfig from JSON; ``overrides`` with value ``None`` are ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return config_from_dict(raw, **overrides)


def config_from_dict(raw, **overrides):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("config needs an 'experiment' field")
    if raw.get("priors") is not None:
        raw["priors"] = tuple(raw["priors"])
    try:
        return RunConfig(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
