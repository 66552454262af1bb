"""Datasets, standardization, CSV ingestion and model persistence."""

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, FormatVersionError, InputError, PersistenceError

FORMAT_VERSION = 1
MISSING_TOKENS = {"", "na", "nan", "null", "none"}
STANDARDIZED_TOL = 1e-10


@dataclass(frozen=True)
class Standardization:
    """Covariate scales and response offsets.

    Standardized values are ``x / x_scale`` and ``y - y_offset``.
    """

    x_scale: np.ndarray
    y_offset: np.ndarray

    def apply_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != len(self.x_scale):
            raise ContractError(
                f"expected {len(self.x_scale)} covariate columns, got shape {x.shape}"
            )
        return x / self.x_scale

    def invert_x(self, x):
        return np.asarray(x, dtype=float) * self.x_scale

    def to_dict(self):
        return {"x_scale": self.x_scale.tolist(), "y_offset": self.y_offset.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["x_scale"], dtype=float), np.asarray(d["y_offset"], dtype=float))


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    x_names: list = field(default_factory=list)
    y_names: list = field(default_factory=list)
    standardization: Standardization | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if x.shape[0] != y.shape[0]:
            raise ContractError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not self.x_names:
            object.__setattr__(self, "x_names", [f"x{j + 1}" for j in range(x.shape[1])])
        if not self.y_names:
            object.__setattr__(self, "y_names", [f"y{k + 1}" for k in range(y.shape[1])])

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def q(self):
        return self.y.shape[1]

    @property
    def is_standardized(self):
        if self.standardization is None:
            return False
        second = np.mean(self.x**2, axis=0)
        ymean = np.mean(self.y, axis=0)
        yscale = max(1.0, float(np.max(np.abs(self.y)))) if self.y.size else 1.0
        return bool(
            np.all(np.abs(second - 1.0) <= STANDARDIZED_TOL)
            and np.all(np.abs(ymean) <= STANDARDIZED_TOL * yscale)
        )

    def raw(self):
        """Undo the recorded standardization."""
        if self.standardization is None:
            return self
        st = self.standardization
        return Dataset(st.invert_x(self.x), self.y + st.y_offset, self.x_names, self.y_names)

    def subset(self, rows):
        """Rows of the raw data; the result carries no standardization."""
        raw = self.raw()
        rows = np.asarray(rows)
        return Dataset(raw.x[rows], raw.y[rows], raw.x_names, raw.y_names)


def standardize(data):
    """Scale covariates to unit second moment and center the responses.

    The second moment uses the divisor n. Applying this to an already
    standardized dataset composes the records, so it is idempotent.
    """
    second = np.mean(data.x**2, axis=0)
    zero = np.flatnonzero(~(second > 0))
    if zero.size:
        raise ContractError(
            f"covariate {data.x_names[zero[0]]!r} has zero second moment"
        )
    scale = np.sqrt(second)
    offset = data.y.mean(axis=0)
    x = data.x / scale
    y = data.y - offset
    if data.standardization is not None:
        scale = scale * data.standardization.x_scale
        offset = offset + data.standardization.y_offset
    return Dataset(x, y, data.x_names, data.y_names, Standardization(scale, offset))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _parse_columns(path, columns):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise InputError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not valid UTF-8") from exc
    index = {}
    for c in columns:
        if c not in header:
            raise InputError(f"{path}: missing column {c!r}")
        index[c] = header.index(c)
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    values = np.empty((len(rows), len(columns)))
    missing = []
    for i, row in enumerate(rows, start=1):
        row_missing = False
        for k, c in enumerate(columns):
            pos = index[c]
            cell = row[pos].strip() if pos < len(row) else ""
            if cell.lower() in MISSING_TOKENS:
                row_missing = True
                continue
            try:
                values[i - 1, k] = float(cell)
            except ValueError:
                raise InputError(
                    f"{path}: non-numeric value {cell!r} at row {i}, column {c!r}"
                ) from None
            if not np.isfinite(values[i - 1, k]):
                raise InputError(f"{path}: non-finite value at row {i}, column {c!r}")
        if row_missing:
            missing.append(i)
    if missing:
        raise InputError(
            f"{path}: {len(missing)} row(s) with missing values (first at row {missing[0]})"
        )
    return values


def load_csv(path, x_columns, y_columns):
    """Read the selected columns of a headed CSV into a raw :class:`Dataset`."""
    x_columns, y_columns = list(x_columns), list(y_columns)
    if not x_columns or not y_columns:
        raise InputError("need at least one covariate and one response column")
    values = _parse_columns(path, x_columns + y_columns)
    p = len(x_columns)
    return Dataset(values[:, :p], values[:, p:], x_columns, y_columns)


def load_matrix(path, columns):
    return _parse_columns(path, list(columns))


def csv_header(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return [h.strip() for h in next(csv.reader(fh))]
    except (OSError, StopIteration) as exc:
        raise PersistenceError(f"cannot read header of {path}") from exc


def format_float(v):
    return format(float(v), ".17g")


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


def write_table(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else format_float(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def write_dataset(path, data):
    raw = data.raw()
    write_table(path, raw.x_names + raw.y_names, np.hstack([raw.x, raw.y]))


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(model):
    from .core import config_to_dict

    if model.p == 0:
        raise ContractError("refusing to save a model with no components")
    return {
        "format_version": FORMAT_VERSION,
        "config": config_to_dict(model.config),
        "standardization": model.standardization.to_dict(),
        "names": {"x": list(model.x_names), "y": list(model.y_names)},
        "train_x": _arr(model.train_x),
        "components": [_arr(c) for c in model.components],
        "residual_targets": [_arr(z) for z in model.residual_targets],
        "shrinkage": [
            {"U": _arr(s.basis), "tau": _arr(s.tau), "lambda": s.lam, "post": _arr(s.post)}
            for s in model.shrinkage
        ],
        "offsets": [_arr(s.offset) for s in model.shrinkage],
        "diagnostics": model.diagnostics.to_dict(),
    }


def model_from_dict(d):
    from .core import FittedModel, FitDiagnostics, Shrinkage, config_from_dict

    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})"
        )
    try:
        shrinkage = tuple(
            Shrinkage(
                basis=np.asarray(s["U"], dtype=float),
                tau=np.asarray(s["tau"], dtype=float),
                lam=float(s["lambda"]),
                post=np.asarray(s["post"], dtype=float),
                offset=np.asarray(off, dtype=float),
            )
            for s, off in zip(d["shrinkage"], d["offsets"])
        )
        return FittedModel(
            components=tuple(np.asarray(c, dtype=float) for c in d["components"]),
            train_x=np.asarray(d["train_x"], dtype=float),
            residual_targets=tuple(np.asarray(z, dtype=float) for z in d["residual_targets"]),
            shrinkage=shrinkage,
            config=config_from_dict(d["config"]),
            standardization=Standardization.from_dict(d["standardization"]),
            diagnostics=FitDiagnostics.from_dict(d["diagnostics"]),
            x_names=tuple(d["names"]["x"]),
            y_names=tuple(d["names"]["y"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"malformed model file: {exc}") from exc


def save_model(model, path):
    """Write a model as a JSON document.

    Floats are written with Python's shortest round-trip repr, so loading
    recovers every array bit for bit.
    """
    atomic_write(path, json.dumps(model_to_dict(model)))


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"{path}: truncated or invalid model file ({exc})") from exc
    if not isinstance(d, dict):
        raise PersistenceError(f"{path}: model file must hold a JSON object")
    return model_from_dict(d)


def export_curves(model, grid_size, directory):
    """Write one ``curves_<name>.csv`` per covariate.

    Columns are ``x`` on the raw covariate scale and ``m1..mq``, the fitted
    component functions (without the response offset) over an even grid
    spanning the training range.
    """
    from .core import predict_component

    if grid_size < 2:
        raise ContractError("grid_size must be at least 2")
    os.makedirs(directory, exist_ok=True)
    paths = []
    for j in range(model.p):
        lo, hi = model.train_x[:, j].min(), model.train_x[:, j].max()
        grid = np.linspace(lo, hi, grid_size)
        values = predict_component(model, j, grid)
        raw_grid = grid * model.standardization.x_scale[j]
        header = ["x"] + [f"m{k + 1}" for k in range(model.q)]
        path = os.path.join(directory, f"curves_{model.x_names[j]}.csv")
        write_table(path, header, np.column_stack([raw_grid, values]))
        paths.append(path)
    return paths
