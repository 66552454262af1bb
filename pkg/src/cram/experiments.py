"""Synthetic data, cross-validation over lambda and a risk-scaling study."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import FitConfig, fit, predict_raw, prepare_smoothers
from .data import Dataset, standardize
from .errors import ContractError, DegenerateSmootherError, NumericError

SYNTH_P = 4
SYNTH_Q = 3


@dataclass(frozen=True)
class SyntheticSpec:
    """Four additive components, three identical responses, gaussian noise.

    Covariates are i.i.d. uniform on ``[x_low, x_high]``.
    """

    n: int = 150
    sigma: float = 1.0
    seed: int = 0
    x_low: float = -2.0
    x_high: float = 2.0

    def __post_init__(self):
        if self.n < 10:
            raise ContractError("synthetic n must be at least 10")
        if self.sigma < 0:
            raise ContractError("sigma must be nonnegative")
        if not self.x_low < self.x_high:
            raise ContractError("need x_low < x_high")


def centering_constants(a, b):
    """Means of ``x**2`` and ``exp(-x)`` under uniform[a, b]."""
    c2 = (a * a + a * b + b * b) / 3.0
    c4 = (np.exp(-a) - np.exp(-b)) / (b - a)
    return c2, c4


def true_components(x, spec):
    """True component values, shape (p, n, q), at raw covariates ``x``."""
    c2, c4 = centering_constants(spec.x_low, spec.x_high)
    f = np.stack(
        [np.sin(2 * x[:, 0]), x[:, 1] ** 2 - c2, x[:, 2], np.exp(-x[:, 3]) - c4]
    )
    return np.repeat(f[:, :, None], SYNTH_Q, axis=2)


def regression_function(x, spec):
    return true_components(x, spec).sum(axis=0)


def generate_synthetic(spec):
    """Raw (unstandardized) synthetic dataset."""
    rng = np.random.default_rng(spec.seed)
    x = rng.uniform(spec.x_low, spec.x_high, size=(spec.n, SYNTH_P))
    noise = rng.standard_normal((spec.n, SYNTH_Q))
    y = regression_function(x, spec) + spec.sigma * noise
    return Dataset(x, y)


# ---------------------------------------------------------------------------
# Lambda grids
# ---------------------------------------------------------------------------


def _is_zero_fit(model):
    return all(not np.any(c) for c in model.components)


def lambda_max(data, config, start=1e-3, max_doublings=60):
    """Smallest ``start * 2**k`` whose fit is identically zero."""
    smoothers = prepare_smoothers(data, config)
    lam = start
    for _ in range(max_doublings):
        model = fit(data, config.with_lambda(lam), smoothers=smoothers)
        if _is_zero_fit(model):
            return lam
        lam *= 2.0
    raise NumericError("doubling search did not reach an all-zero fit")


def default_lambda_grid(data, config, size=30, low=1e-3):
    """``size`` log-spaced values from ``low`` to :func:`lambda_max`."""
    top = lambda_max(data, config, start=low)
    return np.geomspace(low, top, size)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvReport:
    lambda_grid: np.ndarray
    cv_error: np.ndarray
    cv_se: np.ndarray
    fold_errors: np.ndarray
    selected: float
    rule: str
    seed: int

    def rows(self):
        return list(zip(self.lambda_grid, self.cv_error, self.cv_se))


def fold_assignments(n, k, seed):
    """Seeded permutation cut into ``k`` contiguous blocks."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def n_threads(default=1):
    try:
        return max(1, int(os.environ.get("CRAM_THREADS", default)))
    except ValueError:
        return default


def _fold_path(data, config, grid, test_rows, fold_index):
    n = data.n
    train_rows = np.setdiff1d(np.arange(n), test_rows)
    train = standardize(data.subset(train_rows))
    test = data.subset(test_rows)
    try:
        smoothers = prepare_smoothers(train, config)
    except DegenerateSmootherError as exc:
        raise NumericError(f"fold {fold_index}: cannot build smoothers ({exc})") from exc
    errors = np.empty(len(grid))
    init = None
    for i, lam in enumerate(grid):
        model = fit(train, config.with_lambda(float(lam)), init=init, smoothers=smoothers)
        init = model.components
        resid = test.y - predict_raw(model, test.x)
        errors[i] = np.mean(resid**2)
    return errors


def kfold_cv(data, config, lambda_grid, k=10, seed=0, rule="min", threads=None):
    """K-fold cross-validation of prediction error over a lambda grid.

    Each fold is fit along the ascending grid with warm starts. Ties in the
    mean error go to the larger lambda. ``rule='1se'`` picks the largest
    lambda within one standard error of the minimum.
    """
    grid = np.sort(np.atleast_1d(np.asarray(lambda_grid, dtype=float)))
    if grid.size == 0:
        raise ContractError("lambda grid is empty")
    if k < 2 or data.n < 2 * k:
        raise ContractError(f"need k >= 2 and n >= 2k (n={data.n}, k={k})")
    if rule not in ("min", "1se"):
        raise ContractError(f"unknown selection rule {rule!r}")
    folds = fold_assignments(data.n, k, seed)
    threads = threads or n_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            futures = [pool.submit(_fold_path, data, config, grid, f, i) for i, f in enumerate(folds)]
            fold_errors = np.array([fu.result() for fu in futures])
    else:
        fold_errors = np.array([_fold_path(data, config, grid, f, i) for i, f in enumerate(folds)])
    mean = fold_errors.mean(axis=0)
    se = fold_errors.std(axis=0, ddof=1) / np.sqrt(k)
    best = np.flatnonzero(mean == mean.min())[-1]
    if rule == "min":
        selected = grid[best]
    else:
        selected = grid[np.flatnonzero(mean <= mean[best] + se[best])[-1]]
    return CvReport(grid, mean, se, fold_errors, float(selected), rule, seed)


# ---------------------------------------------------------------------------
# Risk scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskRow:
    n: int
    mean_risk: float
    se: float
    risks: tuple


def _one_risk(base_spec, n, rep, config, k, grid_size, test_factor):
    seed = int(np.random.SeedSequence([base_spec.seed, n, rep]).generate_state(1)[0])
    spec = replace(base_spec, n=n, seed=seed)
    train = standardize(generate_synthetic(spec))
    test = generate_synthetic(replace(spec, n=test_factor * n, seed=seed + 1))
    grid = default_lambda_grid(train, config, size=grid_size)
    report = kfold_cv(train, config, grid, k=k, seed=seed, threads=1)
    model = fit(train, config.with_lambda(report.selected))
    resid = test.y - predict_raw(model, test.x)
    return float(np.mean(resid**2))


def risk_scaling_study(base_spec, n_list, repetitions, config, k=5, grid_size=15,
                       test_factor=10, threads=None):
    """Held-out risk of the CV-tuned fit as a function of sample size.

    For every ``n`` and repetition a fresh synthetic training set is drawn,
    lambda is chosen by k-fold CV on its default grid and the fit is scored
    on an independent test set of ``test_factor * n`` points. Risk is the
    mean squared prediction error per response entry.
    """
    n_list = [int(v) for v in n_list]
    if n_list != sorted(n_list):
        raise ContractError("n_list must be ascending")
    if repetitions < 5:
        raise ContractError("need at least 5 repetitions")
    jobs = [(n, r) for n in n_list for r in range(repetitions)]
    threads = threads or n_threads()
    run = lambda job: _one_risk(base_spec, job[0], job[1], config, k, grid_size, test_factor)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(run, jobs))
    else:
        values = [run(job) for job in jobs]
    results = dict(zip(jobs, values))
    rows = []
    for n in n_list:
        r = np.array([results[(n, i)] for i in range(repetitions)])
        rows.append(RiskRow(n, float(r.mean()), float(r.std(ddof=1) / np.sqrt(repetitions)), tuple(r)))
    return rows


def synthetic_config(penalty="joint", lam=0.0, bandwidth=0.3, **kw):
    """Default fit settings used for the synthetic example."""
    from .smoothing import SmootherSpec

    return FitConfig(penalty, lam, SmootherSpec("gaussian", bandwidth), **kw)
