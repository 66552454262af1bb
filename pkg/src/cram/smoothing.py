"""Local-linear kernel smoothers.

A smoother for covariate ``j`` is the dense n x n matrix whose row ``i``
holds the local-linear weights anchored at ``x[i]``. The same formula,
anchored at an arbitrary point, gives the out-of-sample weight rows used
for prediction.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._fallback import EPANECHNIKOV, GAUSSIAN
from .errors import ContractError, DegenerateSmootherError

KERNELS = {"gaussian": GAUSSIAN, "epanechnikov": EPANECHNIKOV}


def default_bandwidth(x):
    """Rule-of-thumb bandwidth ``1.06 * sd(x) * n**(-1/5)``."""
    x = np.asarray(x, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * len(x) ** (-0.2)


@dataclass(frozen=True)
class SmootherSpec:
    """Kernel and bandwidth for one covariate.

    ``bandwidth=None`` means the rule-of-thumb default, resolved against the
    training covariate when the smoother is built (see :meth:`resolve`).
    """

    kernel: str = "gaussian"
    bandwidth: float | None = None
    method: str = "local_linear"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ContractError(f"unknown kernel {self.kernel!r}")
        if self.method != "local_linear":
            raise ContractError(f"unknown smoothing method {self.method!r}")
        if self.bandwidth is not None and not (
            np.isfinite(self.bandwidth) and self.bandwidth > 0
        ):
            raise ContractError(f"bandwidth must be positive, got {self.bandwidth}")

    def resolve(self, x):
        if self.bandwidth is not None:
            return self
        h = default_bandwidth(x)
        if not h > 0:
            raise ContractError("cannot pick a default bandwidth for a constant covariate")
        return SmootherSpec(self.kernel, h, self.method)

    def to_dict(self):
        return {"kernel": self.kernel, "bandwidth": self.bandwidth, "method": self.method}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kernel"], d["bandwidth"], d.get("method", "local_linear"))


@dataclass(frozen=True)
class SmootherMatrix:
    weights: np.ndarray
    anchor: np.ndarray
    spec: SmootherSpec

    def __matmul__(self, other):
        return self.weights @ other


def _weights(x, x_eval, spec):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 3:
        raise ContractError("need a 1-d covariate with at least 3 points")
    if not np.all(np.isfinite(x)):
        raise ContractError("covariate contains non-finite values")
    spec = spec.resolve(x)
    w, bad = _backend.local_linear_weights(
        np.ascontiguousarray(x), np.ascontiguousarray(x_eval, dtype=float), float(spec.bandwidth), KERNELS[spec.kernel]
    )
    if bad >= 0:
        raise DegenerateSmootherError(
            bad, f"no kernel mass at evaluation row {bad} (bandwidth {spec.bandwidth:g})"
        )
    return np.asarray(w), spec


def build_smoother(x, spec=None):
    """Local-linear smoother matrix evaluated at the sample points themselves."""
    spec = spec or SmootherSpec()
    x = np.asarray(x, dtype=float)
    w, spec = _weights(x, x, spec)
    return SmootherMatrix(weights=w, anchor=x.copy(), spec=spec)


def weight_rows(x, spec, x0):
    """Weight rows anchored at each point of ``x0``; shape (len(x0), len(x))."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.all(np.isfinite(x0)):
        raise ContractError("evaluation points contain non-finite values")
    return _weights(x, x0, spec)[0]


def weight_row_at(x, spec, x0):
    """Single local-linear weight row anchored at the scalar ``x0``."""
    return weight_rows(x, spec, [float(x0)])[0]
