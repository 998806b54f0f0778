"""Datasets, the synthetic pressure-compensated temperature (PCT) benchmark,
normalization, train/test splits, RMSE, CSV ingestion and JSON reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

# Gas constant actually used by the generator. The nominal 8.3 does not
# reproduce the PCT bounds 635.3 K / 1151.4 K of the operating region; 8.314 does.
R_GAS = 8.314
R_GAS_NOMINAL = 8.3
HV = 55940.6
P_REF = 145.3
T_RANGE = (523.2, 573.2)
P_RANGE = (0.4, 15.0)
PCT_RANGE = (635.3, 1151.4)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizationState:
    """Per-column affine maps ``v_norm = (v - shift) / scale``.

    For ``unit_interval`` the shift is the column minimum and the scale is the
    column range; for ``zscore`` they are the mean and standard deviation.
    """

    mode: str
    columns: tuple
    shift: tuple
    scale: tuple

    def index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise DatasetError(f"normalization state has no column {column!r}") from None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "columns": list(self.columns),
            "shift": list(self.shift),
            "scale": list(self.scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationState":
        return cls(d["mode"], tuple(d["columns"]), tuple(map(float, d["shift"])), tuple(map(float, d["scale"])))


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    output: np.ndarray
    input_names: tuple
    output_name: str = "y"
    normalization: Optional[NormalizationState] = None

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.output, dtype=float).ravel()
        if X.ndim != 2 or X.shape[1] < 1:
            raise DatasetError("inputs must be a matrix with at least one column")
        if X.shape[0] != y.shape[0] or y.shape[0] < 1:
            raise DatasetError(f"{X.shape[0]} input rows but {y.shape[0]} outputs")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DatasetError("dataset contains non-finite values")
        names = tuple(self.input_names) if self.input_names is not None else ()
        if not names:
            names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DatasetError("one name per input column is required")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "output", y)
        object.__setattr__(self, "input_names", names)

    @property
    def n(self) -> int:
        return self.output.shape[0]

    @property
    def n_p(self) -> int:
        return self.inputs.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return replace(self, inputs=self.inputs[idx], output=self.output[idx])

    def select(self, names: Sequence[str]) -> "Dataset":
        cols = [self.input_names.index(nm) for nm in names]
        return replace(self, inputs=self.inputs[:, cols], input_names=tuple(names))


@dataclass(frozen=True)
class PctParams:
    R: float = R_GAS
    Hv: float = HV
    p_ref: float = P_REF
    T_range: tuple = T_RANGE
    p_range: tuple = P_RANGE
    noise_sigma: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.Hv <= 0 or self.p_ref <= 0 or self.R <= 0:
            raise DatasetError("Hv, p_ref and R must be positive")
        if self.T_range[0] > self.T_range[1] or self.p_range[0] > self.p_range[1]:
            raise DatasetError("empty operating range")
        if self.noise_sigma < 0:
            raise DatasetError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class Regime:
    """Rectangle in (T [K], p [Pa]) sampled uniformly ``count`` times."""

    T: tuple
    p: tuple
    count: int


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        tr = np.asarray(self.train, dtype=int)
        te = np.asarray(self.test, dtype=int)
        if tr.size == 0:
            raise DatasetError("training set is empty")
        if np.intersect1d(tr, te).size:
            raise DatasetError("training and testing sets overlap")
        object.__setattr__(self, "train", tr)
        object.__setattr__(self, "test", te)


def pct_value(T, p, R=R_GAS, Hv=HV, p_ref=P_REF):
    """Noiseless pressure-compensated temperature [K]."""
    T = np.asarray(T, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(T <= 0) or np.any(p <= 0):
        raise DatasetError("temperature and pressure must be positive")
    return 1.0 / (R / Hv * np.log(p / p_ref) + 1.0 / T)


def generate_pct_dataset(params: PctParams, regimes: Iterable[Regime]) -> tuple[Dataset, np.ndarray]:
    """Sample (T, p) uniformly in each regime and compute noisy PCT.

    Returns the dataset (inputs ``T``, ``p``; output ``PCT``, physical units)
    and the 1-based regime label of every row. Noise is added in Kelvin.
    """
    regimes = list(regimes)
    if not regimes:
        raise DatasetError("at least one regime is required")
    rng = np.random.default_rng(params.seed)
    Ts, ps, labels = [], [], []
    lo_T, hi_T = params.T_range
    lo_p, hi_p = params.p_range
    for k, reg in enumerate(regimes, start=1):
        if reg.count < 1:
            raise DatasetError("regime sample counts must be >= 1")
        if min(reg.T) <= 0 or min(reg.p) <= 0:
            raise DatasetError("temperature and pressure must be positive")
        if reg.T[0] < lo_T - 1e-9 or reg.T[1] > hi_T + 1e-9 or reg.p[0] < lo_p - 1e-9 or reg.p[1] > hi_p + 1e-9:
            raise DatasetError(f"regime {k} leaves the operating region")
        Ts.append(rng.uniform(reg.T[0], reg.T[1], reg.count))
        ps.append(rng.uniform(reg.p[0], reg.p[1], reg.count))
        labels.append(np.full(reg.count, k))
    T = np.concatenate(Ts)
    p = np.concatenate(ps)
    y = pct_value(T, p, params.R, params.Hv, params.p_ref)
    if params.noise_sigma > 0:
        y = y + rng.normal(0.0, params.noise_sigma, y.shape[0])
    ds = Dataset(np.column_stack([T, p]), y, ("T", "p"), "PCT")
    return ds, np.concatenate(labels)


def _column_params(v, mode, name):
    if mode == "unit_interval":
        lo, hi = float(np.min(v)), float(np.max(v))
        if not hi > lo:
            raise DatasetError(f"constant column {name!r} cannot be normalized")
        return lo, hi - lo
    if mode == "zscore":
        mu, sd = float(np.mean(v)), float(np.std(v))
        if not sd > 0:
            raise DatasetError(f"constant column {name!r} cannot be normalized")
        return mu, sd
    raise DatasetError(f"unknown normalization mode {mode!r}")


def fit_normalization(ds: Dataset, mode: str = "unit_interval") -> NormalizationState:
    cols = list(ds.input_names) + [ds.output_name]
    data = np.column_stack([ds.inputs, ds.output])
    shift, scale = zip(*(_column_params(data[:, j], mode, cols[j]) for j in range(len(cols))))
    return NormalizationState(mode, tuple(cols), tuple(shift), tuple(scale))


def apply_normalization(ds: Dataset, state: NormalizationState) -> Dataset:
    """Map ``ds`` with an already fitted state (e.g. test rows with train-time ranges)."""
    if ds.normalization is not None:
        raise DatasetError("dataset is already normalized")
    X = np.column_stack([
        (ds.inputs[:, j] - state.shift[state.index(nm)]) / state.scale[state.index(nm)]
        for j, nm in enumerate(ds.input_names)
    ])
    k = state.index(ds.output_name)
    y = (ds.output - state.shift[k]) / state.scale[k]
    return replace(ds, inputs=X, output=y, normalization=state)


def normalize(ds: Dataset, mode: str = "unit_interval") -> tuple[Dataset, NormalizationState]:
    if ds.normalization is not None:
        raise DatasetError("dataset is already normalized")
    state = fit_normalization(ds, mode)
    return apply_normalization(ds, state), state


def bounds_normalization(columns, lower, upper) -> NormalizationState:
    """Unit-interval state from known physical bounds instead of sample extremes.

    Useful when every dataset of a study should share one scale, e.g. the PCT
    operating region, so that RMSE values are comparable across sub-regions.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != (len(columns),) or upper.shape != lower.shape:
        raise DatasetError("one lower and one upper bound per column are required")
    if np.any(upper <= lower):
        raise DatasetError("every upper bound must exceed its lower bound")
    return NormalizationState("unit_interval", tuple(columns), tuple(lower.tolist()), tuple((upper - lower).tolist()))


def pct_box_normalization(params: "PctParams | None" = None) -> NormalizationState:
    """Map the whole PCT operating region (inputs and output) onto [0, 1]."""
    params = params or PctParams()
    lo = pct_value(params.T_range[0], params.p_range[1], params.R, params.Hv, params.p_ref)
    hi = pct_value(params.T_range[1], params.p_range[0], params.R, params.Hv, params.p_ref)
    return bounds_normalization(
        ("T", "p", "PCT"),
        (params.T_range[0], params.p_range[0], lo),
        (params.T_range[1], params.p_range[1], hi),
    )


def denormalize(v, state: NormalizationState, column: str) -> np.ndarray:
    k = state.index(column)
    return np.asarray(v, dtype=float) * state.scale[k] + state.shift[k]


def denormalize_dataset(ds: Dataset) -> Dataset:
    st = ds.normalization
    if st is None:
        return ds
    X = np.column_stack([denormalize(ds.inputs[:, j], st, nm) for j, nm in enumerate(ds.input_names)])
    y = denormalize(ds.output, st, ds.output_name)
    return replace(ds, inputs=X, output=y, normalization=None)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_random(ds: Dataset, train_fraction: float = 0.5, seed: int = 0) -> Split:
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError("train_fraction must lie in (0, 1)")
    n_train = _round_half_up(train_fraction * ds.n)
    if n_train < 2:
        raise DatasetError("training set would have fewer than 2 rows")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return Split(np.sort(perm[:n_train]), np.sort(perm[n_train:]))


def split_by_regime(ds: Dataset, regime_labels, train_regimes) -> Split:
    labels = np.asarray(regime_labels)
    if labels.shape[0] != ds.n:
        raise DatasetError("one regime label per row is required")
    mask = np.isin(labels, list(train_regimes))
    train, test = np.flatnonzero(mask), np.flatnonzero(~mask)
    if train.size == 0 or test.size == 0:
        raise DatasetError("regime split leaves the training or testing set empty")
    return Split(train, test)


def rmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape[0]} vs {y_hat.shape[0]}")
    if y.size == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


@dataclass(frozen=True)
class LoadReport:
    rows_read: int
    drop_count: int
    dropped_rows: tuple = field(default_factory=tuple)


def ingest_csv(path, output_column: str, timestamp_column: Optional[str] = None) -> tuple[Dataset, LoadReport]:
    """Read a comma-separated file with a header row.

    Every column other than the output and the timestamp becomes an input.
    Rows with a missing or non-numeric cell are dropped and counted.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = list(reader)
    if output_column not in header:
        raise DatasetError(f"{path}: output column {output_column!r} not found")
    if timestamp_column is not None and timestamp_column not in header:
        raise DatasetError(f"{path}: timestamp column {timestamp_column!r} not found")
    inputs = [h for h in header if h not in (output_column, timestamp_column)]
    if not inputs:
        raise DatasetError(f"{path}: no input columns")
    in_idx = [header.index(h) for h in inputs]
    out_idx = header.index(output_column)
    X, y, dropped = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            if len(row) != len(header):
                raise ValueError
            vals = [float(row[j]) for j in in_idx]
            out = float(row[out_idx])
            if not all(math.isfinite(v) for v in vals + [out]):
                raise ValueError
        except ValueError:
            dropped.append(lineno)
            continue
        X.append(vals)
        y.append(out)
    if not y:
        raise DatasetError(f"{path}: no usable rows")
    report = LoadReport(len(y) + len(dropped), len(dropped), tuple(dropped))
    return Dataset(np.array(X), np.array(y), tuple(inputs), output_column), report


def write_csv(ds: Dataset, path, extra: Optional[dict] = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.input_names) + [ds.output_name] + list(extra))
        cols = [ds.inputs[:, j] for j in range(ds.n_p)] + [ds.output] + [np.asarray(v) for v in extra.values()]
        for row in zip(*cols):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


SENSOR_FIELDS = ("method", "n_p_star", "n_pc_star", "rmse_train", "rmse_test", "config", "seed")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def emit_report(sensors, series=None, meta=None, path=None) -> str:
    """Serialize evaluation records to the JSON report document.

    Each sensor record carries ``method``, ``n_p_star``, ``n_pc_star`` (None
    when not applicable), ``rmse_train``, ``rmse_test``, ``config`` and
    ``seed``; extra keys are kept. Keys are sorted so equal inputs give equal
    bytes.
    """
    sensors = list(sensors)
    if not sensors:
        raise DatasetError("cannot emit a report without results")
    for rec in sensors:
        missing = [f for f in SENSOR_FIELDS if f not in rec]
        if missing:
            raise DatasetError(f"sensor record lacks {missing}")
    from . import __version__

    doc = {
        "sensors": _jsonable(sensors),
        "series": _jsonable(series or {}),
        "meta": _jsonable({"seed": None, "timestamp": None, "version": __version__, **(meta or {})}),
    }
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise DatasetError(f"cannot write report to {path}: {exc}") from exc
    return text


def read_report(source) -> dict:
    text = Path(source).read_text(encoding="utf-8") if not str(source).lstrip().startswith("{") else source
    return json.loads(text)
