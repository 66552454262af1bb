"""Constrained-rank additive models fit by backfitting.

Two penalties are supported:

``per_component``
    ``sum_j lam_j * (1/sqrt(n)) ||M_j||_*``; each component is shrunk
    towards low rank on its own.
``joint``
    ``lam * (1/sqrt(n)) ||[M_1; ...; M_p]||_*``; the stacked np x q matrix of
    all components is shrunk, so every component shares one row space.

Both fits alternate over covariates: form the partial residual, smooth it,
soft-threshold the eigenvalues of its sample second-moment matrix and
re-center.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .errors import ContractError, NumericError
from .linalg import (
    DEFAULT_RANK_TOL,
    numerical_rank,
    scaled_nuclear_norm,
    scaled_spectral_norm,
    shrink_transform,
    sqrt_pinv,
)
from .smoothing import SmootherSpec, build_smoother, weight_rows

PENALTIES = ("per_component", "joint")


@dataclass(frozen=True)
class FitConfig:
    """Fit settings.

    ``lam`` is a scalar for the joint penalty and a length-p sequence for the
    per-component one; a scalar given with ``per_component`` is broadcast.
    ``smoother`` is one :class:`SmootherSpec` for every covariate or a
    sequence with one per covariate.
    """

    penalty: str = "joint"
    lam: float | tuple = 0.0
    smoother: SmootherSpec | tuple = field(default_factory=SmootherSpec)
    max_sweeps: int = 500
    tol: float = 1e-6
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if self.penalty not in PENALTIES:
            raise ContractError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.penalty == "joint":
            if np.ndim(self.lam) != 0:
                raise ContractError("the joint penalty takes a scalar lambda")
            object.__setattr__(self, "lam", float(self.lam))
            lams = [self.lam]
        else:
            if np.ndim(self.lam) == 0:
                lams = [float(self.lam)]
                object.__setattr__(self, "lam", float(self.lam))
            else:
                lams = [float(v) for v in self.lam]
                object.__setattr__(self, "lam", tuple(lams))
        if not all(np.isfinite(v) and v >= 0 for v in lams):
            raise ContractError("lambda values must be finite and nonnegative")
        if not isinstance(self.smoother, SmootherSpec):
            object.__setattr__(self, "smoother", tuple(self.smoother))
        if int(self.max_sweeps) < 1:
            raise ContractError("max_sweeps must be a positive integer")
        if not self.tol > 0 or not self.rank_tol > 0:
            raise ContractError("tol and rank_tol must be positive")

    def lambdas(self, p):
        if self.penalty == "joint":
            return np.full(p, self.lam)
        if isinstance(self.lam, tuple):
            if len(self.lam) != p:
                raise ContractError(
                    f"per_component penalty needs {p} lambda values, got {len(self.lam)}"
                )
            return np.asarray(self.lam)
        return np.full(p, self.lam)

    def smoothers(self, p):
        if isinstance(self.smoother, SmootherSpec):
            return (self.smoother,) * p
        if len(self.smoother) != p:
            raise ContractError(f"need {p} smoother specs, got {len(self.smoother)}")
        return self.smoother

    def with_lambda(self, lam):
        return replace(self, lam=lam)


def config_to_dict(config):
    lam = list(config.lam) if isinstance(config.lam, tuple) else config.lam
    smoother = (
        config.smoother.to_dict()
        if isinstance(config.smoother, SmootherSpec)
        else [s.to_dict() for s in config.smoother]
    )
    return {
        "penalty": config.penalty,
        "lambda": lam,
        "smoother": smoother,
        "max_sweeps": config.max_sweeps,
        "tol": config.tol,
        "rank_tol": config.rank_tol,
    }


def config_from_dict(d):
    sm = d["smoother"]
    smoother = (
        SmootherSpec.from_dict(sm) if isinstance(sm, dict) else tuple(SmootherSpec.from_dict(s) for s in sm)
    )
    lam = tuple(d["lambda"]) if isinstance(d["lambda"], list) else d["lambda"]
    return FitConfig(d["penalty"], lam, smoother, int(d["max_sweeps"]), float(d["tol"]), float(d["rank_tol"]))


@dataclass(frozen=True)
class Shrinkage:
    """How the final fitted values of one component were produced.

    ``M_j = S_j Z_j T post - offset`` with ``T = U diag([1 - lam/sqrt(tau)]_+) U^T``.
    ``post`` is the identity for the per-component penalty; for the joint
    penalty it accumulates the transforms applied by later inner steps.
    """

    basis: np.ndarray
    tau: np.ndarray
    lam: float
    post: np.ndarray
    offset: np.ndarray

    def transform(self, rank_tol):
        return shrink_transform(self.basis, self.tau, self.lam, rank_tol) @ self.post


@dataclass(frozen=True)
class FitDiagnostics:
    sweeps_run: int
    objective_trace: np.ndarray
    component_ranks: tuple
    joint_rank: int
    converged: bool
    last_change: float

    def to_dict(self):
        return {
            "sweeps_run": self.sweeps_run,
            "objective_trace": np.asarray(self.objective_trace).tolist(),
            "component_ranks": list(self.component_ranks),
            "joint_rank": self.joint_rank,
            "converged": self.converged,
            "last_change": self.last_change,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            int(d["sweeps_run"]),
            np.asarray(d["objective_trace"], dtype=float),
            tuple(int(r) for r in d["component_ranks"]),
            int(d["joint_rank"]),
            bool(d["converged"]),
            float(d["last_change"]),
        )


@dataclass(frozen=True)
class FittedModel:
    components: tuple
    train_x: np.ndarray
    residual_targets: tuple
    shrinkage: tuple
    config: FitConfig
    standardization: object
    diagnostics: FitDiagnostics
    x_names: tuple = ()
    y_names: tuple = ()

    def __post_init__(self):
        n, p = self.train_x.shape
        if len(self.components) != p or any(c.shape[0] != n for c in self.components):
            raise ContractError("components and train_x disagree on n or p")

    @property
    def n(self):
        return self.train_x.shape[0]

    @property
    def p(self):
        return self.train_x.shape[1]

    @property
    def q(self):
        return self.components[0].shape[1]

    @property
    def fitted(self):
        return np.sum(self.components, axis=0)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def prepare_smoothers(data, config):
    """Dense smoother stack (p, n, n) and the bandwidth-resolved specs."""
    specs = config.smoothers(data.p)
    mats = [build_smoother(data.x[:, j], specs[j]) for j in range(data.p)]
    return np.stack([m.weights for m in mats]), tuple(m.spec for m in mats)


def _check_data(data):
    if data.p < 1 or data.q < 1:
        raise ContractError("need at least one covariate and one response")
    if not data.is_standardized:
        raise ContractError(
            "data must be standardized (unit covariate second moments, centered responses)"
        )


def fit(data, config, init=None, smoothers=None):
    """Fit a constrained-rank additive model by backfitting.

    Parameters
    ----------
    data : Dataset
        Standardized data (see :func:`cram.data.standardize`).
    config : FitConfig
    init : sequence of (n, q) arrays, optional
        Warm-start components; zeros by default.
    smoothers : tuple, optional
        Output of :func:`prepare_smoothers` for ``data`` to skip rebuilding.
    """
    _check_data(data)
    n, p, q = data.n, data.p, data.q
    lam = config.lambdas(p)
    if smoothers is None:
        smoothers = prepare_smoothers(data, config)
    S, specs = smoothers
    joint = config.penalty == "joint"

    M = np.zeros((p, n, q)) if init is None else np.array(np.stack(init), dtype=float)
    if M.shape != (p, n, q):
        raise ContractError(f"warm start has shape {M.shape}, expected {(p, n, q)}")
    Z = np.zeros((p, n, q))
    U = np.tile(np.eye(q), (p, 1, 1))
    tau = np.zeros((p, q))
    post = np.tile(np.eye(q), (p, 1, 1))
    offset = np.zeros((p, q))
    trace = np.zeros(config.max_sweeps)
    sweeps, flag, change = _backend.run_sweeps(
        np.ascontiguousarray(S), np.ascontiguousarray(data.y), M, np.ascontiguousarray(lam, dtype=float),
        int(joint), float(config.rank_tol), float(config.tol), int(config.max_sweeps),
        Z, U, tau, post, offset, trace,
    )
    if sweeps < 0:
        raise NumericError(
            f"non-finite residual at sweep {-sweeps}, coordinate {flag + 1}"
        )

    components = tuple(M[j].copy() for j in range(p))
    shrink = tuple(
        Shrinkage(U[j].copy(), tau[j].copy(), float(lam[j]), post[j].copy(), offset[j].copy())
        for j in range(p)
    )
    diag = FitDiagnostics(
        sweeps_run=int(sweeps),
        objective_trace=trace[:sweeps].copy(),
        component_ranks=tuple(numerical_rank(c, config.rank_tol) for c in components),
        joint_rank=numerical_rank(M.reshape(-1, q), config.rank_tol),
        converged=bool(flag),
        last_change=float(change),
    )
    resolved = replace(config, smoother=tuple(specs))
    return FittedModel(
        components=components,
        train_x=data.x.copy(),
        residual_targets=tuple(Z[j].copy() for j in range(p)),
        shrinkage=shrink,
        config=resolved,
        standardization=data.standardization,
        diagnostics=diag,
        x_names=tuple(data.x_names),
        y_names=tuple(data.y_names),
    )


def backfit_per_component(data, config, init=None, smoothers=None):
    """Backfitting with a separate nuclear-norm penalty on each component."""
    if config.penalty != "per_component":
        raise ContractError("backfit_per_component needs penalty='per_component'")
    return fit(data, config, init, smoothers)


def backfit_joint(data, config, init=None, smoothers=None):
    """Backfitting with one nuclear-norm penalty on the stacked components."""
    if config.penalty != "joint":
        raise ContractError("backfit_joint needs penalty='joint'")
    return fit(data, config, init, smoothers)


# ---------------------------------------------------------------------------
# Penalties and objective
# ---------------------------------------------------------------------------


def penalty_value(components, penalty, lam):
    """Sample penalty of a list of (n, q) component matrices."""
    comps = [np.asarray(c, dtype=float) for c in components]
    if not comps:
        return 0.0
    if penalty == "joint":
        stacked = np.vstack(comps)
        return float(lam) * float(np.linalg.svd(stacked, compute_uv=False).sum()) / np.sqrt(comps[0].shape[0])
    if penalty == "per_component":
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (len(comps),))
        return float(sum(l * scaled_nuclear_norm(c) for l, c in zip(lam, comps)))
    raise ContractError(f"unknown penalty {penalty!r}")


def objective(data, model):
    """Empirical penalized risk ``(1/2n)||Y - sum_j M_j||_F^2 + penalty``."""
    if data.n != model.n or data.q != model.q:
        raise ContractError("model and data dimensions disagree")
    resid = data.y - model.fitted
    lam = model.config.lam if model.config.penalty == "joint" else model.config.lambdas(model.p)
    return float(0.5 * np.sum(resid**2) / data.n + penalty_value(model.components, model.config.penalty, lam))


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def predict_component(model, j, x_j):
    """Fitted component ``j`` at standardized covariate values ``x_j``."""
    spec = model.config.smoothers(model.p)[j]
    W = weight_rows(model.train_x[:, j], spec, x_j)
    sh = model.shrinkage[j]
    return W @ model.residual_targets[j] @ sh.transform(model.config.rank_tol) - sh.offset


def predict(model, x_new):
    """Centered-scale predictions ``sum_j m_j(x_j)``.

    ``x_new`` is either a standardized array or a :class:`Dataset`; a dataset
    must carry the model's own standardization record.
    """
    from .data import Dataset

    if isinstance(x_new, Dataset):
        st = x_new.standardization
        if st is None or not (
            np.array_equal(st.x_scale, model.standardization.x_scale)
        ):
            raise ContractError("x_new is not standardized with the model's record")
        x_new = x_new.x
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    if x_new.shape[1] != model.p:
        raise ContractError(f"x_new must have {model.p} columns, got {x_new.shape[1]}")
    out = np.zeros((x_new.shape[0], model.q))
    for j in range(model.p):
        out += predict_component(model, j, x_new[:, j])
    return out


def predict_raw(model, x_raw):
    """Predictions on the original response scale from raw covariates."""
    st = model.standardization
    return predict(model, st.apply_x(x_raw)) + st.y_offset


# ---------------------------------------------------------------------------
# Stationarity certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    name: str
    value: float
    bound: float

    @property
    def passed(self):
        return bool(self.value <= self.bound)


@dataclass(frozen=True)
class CertificateReport:
    conditions: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def __str__(self):
        return "\n".join(
            f"{c.name}: value={c.value:.6e} bound={c.bound:.6e} {'pass' if c.passed else 'FAIL'}"
            for c in self.conditions
        )


def stationarity_certificate(P, M, lam, tol=1e-6, rank_tol=DEFAULT_RANK_TOL):
    """Check that ``P = M + lam * V`` with ``V`` a subgradient of the penalty at ``M``.

    The candidate subgradient is split as ``V = M G + H`` where
    ``G = ((1/n) M^T M)^{1/2 +}``; ``H`` must satisfy, in sample moments,

    * spectral: ``(1/sqrt n) ||H||_2 <= 1``
    * cross-moment: ``(1/n) M^T H = 0``
    * row space: ``H ((1/n) M^T M) = 0``

    Failures are reported, not raised.
    """
    P = np.asarray(P, dtype=float)
    M = np.asarray(M, dtype=float)
    if P.shape != M.shape:
        raise ContractError(f"P and M shapes differ: {P.shape} vs {M.shape}")
    if not lam > 0:
        raise ContractError("lambda must be positive")
    n = P.shape[0]
    sigma = M.T @ M / n
    H = (P - M - lam * M @ sqrt_pinv(sigma, rank_tol)) / lam
    spectral = scaled_spectral_norm(H)
    cross = float(np.max(np.abs(M.T @ H / n)))
    rowspace = float(np.linalg.norm(H @ sigma) / np.sqrt(n))
    return CertificateReport(
        (
            Condition("spectral_norm", spectral, 1.0 + tol),
            Condition("cross_moment", cross, tol),
            Condition("row_space", rowspace, tol),
        )
    )


# ---------------------------------------------------------------------------
# Regularization paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathPoint:
    lam: float
    rank: int
    objective: float
    model: FittedModel = field(repr=False, compare=False)


def model_rank(model):
    if model.config.penalty == "joint":
        return model.diagnostics.joint_rank
    return max(model.diagnostics.component_ranks)


def rank_path(data, config, lambda_grid):
    """Fit along an ascending grid of scalar lambdas with warm starts."""
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ContractError("lambda grid needs at least two points")
    if np.any(np.diff(grid) < 0):
        raise ContractError("lambda grid must be ascending")
    smoothers = prepare_smoothers(data, config)
    out = []
    init = None
    for i, lam in enumerate(grid):
        try:
            model = fit(data, config.with_lambda(float(lam)), init=init, smoothers=smoothers)
        except NumericError as exc:
            raise NumericError(f"grid index {i} (lambda={lam:g}): {exc}") from exc
        except ContractError as exc:
            raise ContractError(f"grid index {i} (lambda={lam:g}): {exc}") from exc
        init = model.components
        out.append(PathPoint(float(lam), model_rank(model), objective(data, model), model))
    return out
