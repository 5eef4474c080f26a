"""CSV persistence (RFC 4180, CRLF rows, ``repr`` floats) for reproducible outputs."""

import csv
import json
import os

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_rows(path):
    """Header and rows of a CSV written by :func:`write_rows`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def coefficient_names(K):
    return [f"phi_{m + 1}" for m in range(K)]


def write_trials(path, trials):
    K = trials[0].coefficients.K
    header = ["trial", "seed", "selected_model", *coefficient_names(K), "data_error", "extrapolation_error",
              "bandwidth_scale", "delta"]
    rows = [
        [t.trial, t.seed, t.selected_model, *t.coefficients.phi, t.data_error, t.extrapolation_error,
         t.bandwidth_scale, t.delta]
        for t in trials
    ]
    write_rows(path, header, rows)


def write_trajectory(path, log):
    log = np.atleast_2d(log)
    header = ["iteration", *coefficient_names(log.shape[1])]
    write_rows(path, header, [[i + 1, *row] for i, row in enumerate(log)])


def write_metrics(path, records):
    """``records`` is a list of ``(method, truth_model, MetricsRecord)``."""
    header = ["method", "truth_model", "model_error", "mean_data_error", "mean_extrapolation_error", "n_trials"]
    rows = [
        [method, truth, r.model_error, r.mean_data_error, r.mean_extrapolation_error, r.n_trials]
        for method, truth, r in records
    ]
    write_rows(path, header, rows)


def write_observed(path, observed, holdout):
    rows = [["fit", i, v] for i, v in enumerate(np.ravel(observed))]
    rows += [["holdout", i, v] for i, v in enumerate(np.ravel(holdout))]
    write_rows(path, ["split", "index", "value"], rows)


def write_state(path, state):
    """Final point estimate as one flattened row."""
    names = coefficient_names(state.K) + [
        f"theta_{m + 1}_{j + 1}" for m, d in enumerate(state.dims) for j in range(d)
    ]
    write_rows(path, names, [list(state.flatten())])


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
