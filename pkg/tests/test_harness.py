import json
import math

import numpy as np
import pytest

from krsel.exceptions import ConfigError, NumericalError
from krsel.harness import io
from krsel.harness.cli import main
from krsel.harness.config import RunConfig, config_from_dict, load_config
from krsel.harness.experiments import EXPERIMENTS, build_experiment
from krsel.harness.runner import (
    MetricsRecord,
    TrialResult,
    compute_metrics,
    data_error,
    extrapolation_error,
    heldout_error,
    restrict,
    run_experiment,
    run_trial,
    select_hyperparameters,
)
from krsel.simulators import polynomial_model
from krsel.state import MixtureState, SimplexWeights

SMALL = dict(
    experiment="polynomial",
    n_per_iter=15,
    n_iters=2,
    trials=2,
    hyper_grid={"s": [1.0], "delta": [0.1]},
)


def _small(**kw):
    return config_from_dict({**SMALL, **kw})


def _result(m, phi=(0.5, 0.5), d=1.0, x=2.0):
    state = MixtureState(SimplexWeights(phi), (np.zeros(4), np.zeros(5)))
    return TrialResult(m, state, state.weights, data_error=d, extrapolation_error=x)


# -- experiments -----------------------------------------------------------


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_experiments_resolve(name):
    exp = build_experiment(name)
    assert len(exp.truths) == exp.K == len(exp.default_boxes)
    for mdl, hold, th, box in zip(exp.models, exp.holdout_models, exp.truths, exp.default_boxes):
        assert th.size == mdl.dim == hold.dim == box.shape[0]
        assert len({m.output_dim for m in exp.models}) == 1


def test_polynomial_truth_and_observation_streams():
    exp = build_experiment("polynomial")
    assert np.all(exp.truths[0] == 40.0)
    y1, h1 = exp.observe(0, 5)
    y2, h2 = exp.observe(0, 5)
    assert np.array_equal(y1, y2) and np.array_equal(h1, h2)
    assert not np.array_equal(exp.observe(0, 6)[0], y1)


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        build_experiment("weather")


# -- config ----------------------------------------------------------------


def test_config_defaults():
    cfg = RunConfig("polynomial")
    assert (cfg.n_per_iter, cfg.n_iters, cfg.trials, cfg.dirichlet_alpha) == (100, 20, 30, 0.01)
    assert len(cfg.grid) == 15
    assert cfg.grid[0] == (0.25, 0.01) and cfg.grid[-1] == (4.0, 1.0)


def test_load_config_with_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**SMALL, "priors": [[-100, 100], [-100, 100]]}))
    cfg = load_config(p, seed=9, trials=None)
    assert cfg.seed == 9 and cfg.trials == 2
    assert np.all(cfg.prior().boxes[1] == [-100, 100])
    assert config_from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


@pytest.mark.parametrize(
    "bad",
    [
        {"experiment": "nope"},
        {"experiment": "polynomial", "colour": 1},
        {"experiment": "polynomial", "trials": 0},
        {"experiment": "polynomial", "seed": -1},
        {"experiment": "polynomial", "dirichlet_alpha": 0},
        {"experiment": "polynomial", "hyper_grid": {"s": [], "delta": [0.1]}},
        {"experiment": "polynomial", "priors": [[0, 1]]},
        {"experiment": "polynomial", "priors": [[0, 1, 2], [0, 1]]},
        {"experiment": "polynomial", "herding": {"pool_multiplier": 0}},
        {"experiment": "polynomial", "herding": {"colour": 1}},
        {"experiment": "polynomial", "truth_model": 2},
        {"experiment": "polynomial", "transforms": {"log": True}},
        {"n_iters": 3},
        [],
    ],
)
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_load_config_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_arctan_follows_experiment_unless_overridden():
    assert _small(experiment="predator_prey_difficult").arctan
    assert not _small(experiment="predator_prey_difficult", transforms={"arctan": False}).arctan
    assert not _small().arctan


# -- metrics and errors ------------------------------------------------------


def test_compute_metrics():
    trials = [_result(0, d=1.0, x=4.0), _result(1, d=3.0, x=2.0), _result(0, d=2.0, x=3.0), _result(0)]
    m = compute_metrics(trials, 0)
    assert m == MetricsRecord(0.25, 1.75, 2.75, 4)
    with pytest.raises(ValueError):
        compute_metrics([], 0)


def test_data_error_constant_offset():
    # noise-free constant model: error is |c| * sqrt(L)
    mdl = polynomial_model(0, np.zeros(9), noise_sd=0.0)
    state = MixtureState(SimplexWeights([1.0]), (np.array([2.5]),))
    est = TrialResult(0, state, state.weights)
    assert data_error(est, np.zeros(9), [mdl]) == pytest.approx(2.5 * 3.0, rel=1e-15)
    assert extrapolation_error(est, [mdl], np.full(9, 2.5)) == 0.0


def test_data_error_reproduces_noise():
    mdl = polynomial_model(1, np.linspace(0, 1, 6), noise_sd=2.0)
    state = MixtureState(SimplexWeights([1.0]), (np.array([1.0, 1.0]),))
    est = TrialResult(0, state, state.weights)
    y = np.ones(6)
    eps = np.random.default_rng(3).standard_normal(6)
    ref = np.linalg.norm(mdl.noise_free([1.0, 1.0]) + 2.0 * eps - y)
    assert data_error(est, y, [mdl], np.random.default_rng(3)) == pytest.approx(ref, rel=1e-14)


def test_restrict_keeps_coordinates():
    mdl = polynomial_model(1, np.arange(5.0), noise_sd=0.0)
    sub = restrict(mdl, np.array([0, 1, 2, 3]))
    assert sub.output_dim == 4
    assert np.array_equal(sub.noise_free([1.0, 2.0]), mdl.noise_free([1.0, 2.0])[:4])


# -- hyperparameter search ---------------------------------------------------


def _grid_cfg():
    return _small(hyper_grid={"s": [0.5, 1.0, 2.0], "delta": [0.01, 0.1]})


def test_select_hyperparameters_argmin():
    table = {(0.5, 0.01): 3.0, (0.5, 0.1): 2.0, (1.0, 0.01): 1.0, (1.0, 0.1): 4.0, (2.0, 0.01): 5.0, (2.0, 0.1): 6.0}
    s, d, scores = select_hyperparameters(None, _grid_cfg(), 0, error_fn=lambda y, c, s, d, r, **kw: table[(s, d)])
    assert (s, d) == (1.0, 0.01)
    assert len(scores) == 6


def test_select_hyperparameters_tie_break_and_failures():
    def err(y, cfg, s, d, rng, **kw):
        if s == 0.5:
            raise NumericalError("boom")
        return 1.0

    s, d, scores = select_hyperparameters(None, _grid_cfg(), 0, error_fn=err)
    assert (s, d) == (1.0, 0.01)
    assert sum(math.isinf(e) for _, _, e in scores) == 2


def test_select_hyperparameters_same_stream_for_every_pair():
    seen = []

    def err(y, cfg, s, d, rng, **kw):
        seen.append(np.random.default_rng(rng).integers(1 << 30))
        return s

    select_hyperparameters(None, _grid_cfg(), 11, error_fn=err)
    assert len(set(seen)) == 1


def test_single_pair_grid_skips_search():
    s, d, scores = select_hyperparameters(None, _small(), 0, error_fn=lambda *a, **k: pytest.fail("called"))
    assert (s, d) == (1.0, 0.1) and len(scores) == 1


def test_heldout_error_is_finite():
    cfg = _small()
    y, _ = cfg.resolve().observe(0, 0)
    assert np.isfinite(heldout_error(y, cfg, 1.0, 0.1, 0, n_iters=2))


# -- runs, files and the command line ----------------------------------------


@pytest.mark.parametrize("method", ["krsel", "abc-mc", "abc-smc"])
def test_run_trial_deterministic(method):
    cfg = _small()
    a, y, _ = run_trial(cfg, 1, method)
    b, y2, _ = run_trial(cfg, 1, method)
    assert np.array_equal(y, y2)
    assert a.seed == 1 and a.trial == 1 and a.method == method
    assert a.final_state == b.final_state and a.data_error == b.data_error
    assert np.isfinite(a.extrapolation_error)


def test_run_experiment_writes_reproducible_csvs(tmp_path):
    cfg = _small()
    run_experiment(cfg, "krsel", str(tmp_path / "a"))
    run_experiment(cfg, "krsel", str(tmp_path / "b"))
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(
        ["trials.csv", "metrics.csv"] + [f"{k}_{t}.csv" for k in ("observed", "trajectory", "estimate") for t in (0, 1)]
    )
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    raw = (tmp_path / "a" / "trials.csv").read_bytes()
    assert raw.count(b"\r\n") == 3 and b"\n" not in raw.replace(b"\r\n", b"")
    header, rows = io.read_rows(tmp_path / "a" / "trials.csv")
    assert header[:5] == ["trial", "seed", "selected_model", "phi_1", "phi_2"]
    assert [r[0] for r in rows] == ["0", "1"]
    header, rows = io.read_rows(tmp_path / "a" / "trajectory_0.csv")
    assert header == ["iteration", "phi_1", "phi_2"] and len(rows) == 2


def test_write_rows_quotes_and_floats(tmp_path):
    p = tmp_path / "x.csv"
    io.write_rows(p, ["a", "b"], [['say "hi", twice', 0.1], [True, np.int64(3)]])
    assert p.read_bytes() == b'a,b\r\n"say ""hi"", twice",0.1\r\n1,3\r\n'
    assert io.read_rows(p) == (["a", "b"], [['say "hi", twice', "0.1"], ["1", "3"]])


def _cfg_file(tmp_path, **kw):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({**SMALL, "trials": 1, **kw}))
    return str(p)


def test_cli_run_and_compare(tmp_path, capsys):
    cfg = _cfg_file(tmp_path)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r"), "--method", "abc-mc"]) == 0
    assert (tmp_path / "r" / "metrics.csv").exists()
    assert (tmp_path / "r" / "config.json").exists()
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "3"]) == 0
    header, rows = io.read_rows(tmp_path / "c" / "metrics.csv")
    assert [r[0] for r in rows] == ["krsel", "abc-mc", "abc-smc"]
    assert "abc-smc: model_error=" in capsys.readouterr().out


def test_cli_hypersearch(tmp_path):
    cfg = _cfg_file(tmp_path, hyper_grid={"s": [0.5, 1.0], "delta": [0.1]})
    assert main(["hypersearch", "--config", cfg, "--out", str(tmp_path / "h")]) == 0
    header, rows = io.read_rows(tmp_path / "h" / "hyperparameters.csv")
    assert len(rows) == 2 and sum(int(r[-1]) for r in rows) == 1


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["run", "--config", _cfg_file(tmp_path, experiment="nope")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_numerical_failure(tmp_path, monkeypatch):
    import krsel.harness.cli as cli

    def boom(*a, **k):
        raise NumericalError("singular")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert main(["run", "--config", _cfg_file(tmp_path)]) == 3


def test_cli_rejects_unknown_method(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", _cfg_file(tmp_path), "--method", "abc-rf"])
    assert exc.value.code == 2
