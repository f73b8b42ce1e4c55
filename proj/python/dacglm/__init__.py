"""Divide-and-combine regularised GLM estimation with confidence intervals."""

import csv
import io
import json

import numpy as np

from . import _core
from ._core import DataError, PipelineError, SingularMatrixError

__all__ = [
    "DataError",
    "PipelineError",
    "SingularMatrixError",
    "combine",
    "cv_lambda",
    "diagnose",
    "fit",
    "fit_lasso",
    "partition",
    "simulate",
    "summarize",
]


def _arrays(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise ValueError("X must be two-dimensional")
    return X, y


def fit(X, y, *, family="gaussian", method="modac", K=1, lam=None, lambda_mode=None,
        seed=1, intercept=False, names=None, workers=1, level=0.95, omega=-1,
        common_phi=False, allow_partial=False, adaptive=False, shared_lambda=False):
    """Fit, debias and combine over K random batches. Returns the result as a dict.

    `lam` fixes the penalty; otherwise `lambda_mode` ("cv" or "theory") chooses it.
    """
    X, y = _arrays(X, y)
    if lambda_mode is None:
        lambda_mode = "fixed" if lam is not None else "cv"
    out = _core.fit(X, y, list(names or []), family, method, K, lambda_mode,
                    0.0 if lam is None else float(lam), seed, intercept, workers, level,
                    omega, common_phi, allow_partial, adaptive, shared_lambda)
    result = json.loads(out)
    result["beta"] = np.asarray(result["beta"], dtype=np.float64)
    return result


def fit_lasso(X, y, lam, *, family="gaussian", weights=None, tol=1e-7):
    """Single lasso fit at penalty `lam`."""
    X, y = _arrays(X, y)
    w = None if weights is None else np.asarray(weights, dtype=np.float64)
    return _core.fit_lasso(X, y, family, float(lam), w, tol)


def cv_lambda(X, y, *, family="gaussian", seed=1, folds=5, grid_size=100):
    """Cross-validated penalty level."""
    X, y = _arrays(X, y)
    return _core.cv_lambda(X, y, family, seed, folds, grid_size)


def summarize(X, y, lam, *, family="gaussian", names=None, batch_index=0, ridge_tau=0.0):
    """Debiased summary of one batch, as a JSON string suitable for `combine`."""
    X, y = _arrays(X, y)
    return _core.summarize(X, y, list(names or []), family, float(lam), batch_index, ridge_tau)


def combine(summaries, *, method="dac", level=0.95, common_phi=False):
    """Combine batch summaries (JSON strings or dicts). Returns the combined fit as a dict."""
    texts = [s if isinstance(s, str) else json.dumps(s) for s in summaries]
    return json.loads(_core.combine(texts, method, level, common_phi))


def partition(n, K, seed=1):
    """Seeded near-equal split of range(n) into K sorted index arrays."""
    return [np.asarray(p, dtype=np.int64) for p in _core.partition(n, K, seed)]


def simulate(preset="desk", *, family="gaussian", N=0, p=0, K=0, s0=-1, rho=-1.0,
             n_reps=0, seed=1, methods=None, workers=1):
    """Monte Carlo study. Returns {method label: {metric: value}}.

    Zero or negative sizes keep the preset's value.
    """
    text = _core.simulate(preset, family, N, p, K, s0, rho, n_reps, seed,
                          list(methods or []), workers)
    rows = list(csv.reader(io.StringIO(text)))
    labels = rows[0][1:]
    table = {label: {} for label in labels}
    for row in rows[1:]:
        for label, cell in zip(labels, row[1:]):
            if cell != "":
                table[label][row[0]] = float(cell)
    return table


def diagnose(X, y, *, K=1, seed=1):
    """Per-batch conditioning report."""
    X, y = _arrays(X, y)
    return json.loads(_core.diagnose(X, y, K, seed))
