"""Seeded studies on the PCT benchmark and a CSV workflow for plant data.

Every study derives one integer seed per replicate from the master seed with
``numpy.random.SeedSequence``, runs replicates sequentially in index order and
aggregates in that order, so a fixed master seed gives identical reports.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dataset import (
    Dataset,
    PctParams,
    Regime,
    apply_normalization,
    fit_normalization,
    generate_pct_dataset,
    ingest_csv,
    pct_box_normalization,
    rmse,
    split_by_regime,
    split_random,
)
from .labeling import kmeans_label
from .mis import (
    MisConfig,
    MultiModel,
    continuity_gap,
    predict_mis,
    train_mis_con,
    train_mis_con_lab,
    train_mis_sota,
)
from .sis import (
    ComponentConfig,
    LassoConfig,
    SubsetConfig,
    cross_validate,
    lasso_threshold,
    predict_linear,
    train_lasso,
    train_olsr,
    train_pcr,
    train_subset_selection,
)

KINDS = ("illustrative", "scenario_study", "noise_sweep", "csv_workflow")
PCT_METHODS = ("olsr", "sota", "con", "con_lab")
MIS_METHODS = ("sota", "con", "con_lab")
SIGMAS = (0.1, 2.5, 5.0, 10.0, 25.0, 50.0)

T_FULL = (523.2, 573.2)


def _regimes(rects, count):
    return tuple(Regime(T, p, count) for T, p in rects)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a study needs; serialized verbatim into the report.

    ``regimes`` holds the (T, p) rectangles of the two operating regimes used
    by the scenario study and the noise sweep, ``n_per_regime`` their sample
    count. The illustrative study has its own, smaller datasets.
    """

    kind: str = "scenario_study"
    replicates: int = 100
    sigmas: tuple = SIGMAS
    methods: tuple = PCT_METHODS
    seed: int = 0
    out: Optional[str] = None
    noise_sigma: float = 5.0
    regimes: tuple = ((T_FULL, (0.4, 4.5)), (T_FULL, (11.0, 15.0)))
    n_per_regime: int = 310
    train_fraction: float = 0.5
    undesirable_train: int = 1
    illustrative_one: tuple = ((T_FULL, (0.4, 2.0)),)
    illustrative_two: tuple = ((T_FULL, (0.4, 4.5)), (T_FULL, (11.0, 15.0)))
    illustrative_indistinct: tuple = ((T_FULL, (0.4, 15.0)),)
    illustrative_n: int = 40
    box_normalization: bool = True
    mis: MisConfig = field(default_factory=MisConfig)
    illustrative_mis: Optional[MisConfig] = field(default_factory=lambda: MisConfig(beta=0.04, node_limit=2000, time_limit=120.0))
    # csv workflow
    output_column: Optional[str] = None
    ref_column: Optional[str] = None
    timestamp_column: Optional[str] = None
    cv_folds: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.sigmas or any(s < 0 for s in self.sigmas):
            raise ValueError("sigma values must be a nonempty set of nonnegative numbers")
        bad = [m for m in self.methods if m not in PCT_METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; expected a subset of {PCT_METHODS}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "methods", tuple(self.methods))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        for key in ("mis", "illustrative_mis"):
            if isinstance(d.get(key), dict):
                d[key] = MisConfig(**d[key])
        for key in ("regimes", "illustrative_one", "illustrative_two", "illustrative_indistinct"):
            if key in d and d[key] is not None:
                d[key] = tuple((tuple(T), tuple(p)) for T, p in d[key])
        for key in ("sigmas", "methods"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def replicate_seeds(master: int, count: int) -> list[int]:
    """Independent 32-bit seeds, one per replicate, fixed by the master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master).spawn(count)]


# ---------------------------------------------------------------- box statistics


@dataclass(frozen=True)
class BoxStats:
    median: float
    q25: float
    q75: float
    whiskers: tuple
    outliers: tuple
    count: int

    def to_dict(self) -> dict:
        return asdict(self)


def box_stats(values) -> BoxStats:
    """Quartiles by linear interpolation; whiskers reach the most extreme
    values within 1.5 IQR of the box, everything beyond is an outlier."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size < 4:
        raise ValueError(f"box statistics need at least 4 values, got {v.size}")
    q25, med, q75 = (float(q) for q in np.quantile(v, [0.25, 0.5, 0.75]))
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outl = v[(v < lo_fence) | (v > hi_fence)]
    return BoxStats(med, q25, q75, (float(inside.min()), float(inside.max())), tuple(outl.tolist()), int(v.size))


# ---------------------------------------------------------------- shared training


def _continuity(mm: MultiModel) -> dict:
    dv, d0 = mm.continuity_residual()
    return {"coef_residual": dv, "offset_residual": d0, "gap": continuity_gap(mm, 1000)}


def fit_pct_methods(X, y, methods, cfg: MisConfig):
    """Train the requested PCT sensors on one training set.

    The MIS chain shares work: k-means labels feed SotA and the continuous
    model, which in turn warm-starts the optimized labeling.
    """
    out = {}
    if "olsr" in methods:
        m = train_olsr(X, y)
        out["olsr"] = (lambda M, m=m: predict_linear(m, M), m, {})
    need = [k for k in MIS_METHODS if k in methods]
    if not need:
        return out
    labels = kmeans_label(X, 2, cfg.seed, cfg.kmeans_restarts, cfg.kmeans_max_iter)
    if "sota" in methods:
        s = train_mis_sota(X, y, cfg=cfg, labels=labels)
        out["sota"] = (lambda M, s=s: predict_mis(s, M), s, {"continuity_gap": continuity_gap(s, 1000)})
    con = None
    if "con" in methods or "con_lab" in methods:
        con = train_mis_con(X, y, labels, cfg)
    if "con" in methods:
        out["con"] = (lambda M, c=con: predict_mis(c, M), con, _continuity(con))
    if "con_lab" in methods:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cl = train_mis_con_lab(X, y, cfg, warm=con)
        info = _continuity(cl)
        info["milp_status"] = cl.meta.get("milp_status")
        info["fallback"] = bool(cl.meta.get("fallback", False))
        info["warnings"] = [str(w.message) for w in caught]
        out["con_lab"] = (lambda M, c=cl: predict_mis(c, M), cl, info)
    return out


def _pct_normalizer(ds: Dataset, spec: ExperimentSpec, params: PctParams):
    return pct_box_normalization(params) if spec.box_normalization else fit_normalization(ds)


def _pct_data(spec: ExperimentSpec, rects, count, seed, sigma):
    params = PctParams(noise_sigma=sigma, seed=seed)
    ds, labels = generate_pct_dataset(params, _regimes(rects, count))
    return ds, labels, params


def _record(method, mm_or_model, rmse_train, rmse_test, cfg, seed, extra=None):
    rec = {
        "method": method,
        "n_p_star": int(getattr(mm_or_model, "n_p", 0)),
        "n_pc_star": None,
        "rmse_train": rmse_train,
        "rmse_test": rmse_test,
        "config": cfg,
        "seed": seed,
    }
    rec.update(extra or {})
    return rec


# ---------------------------------------------------------------- illustrative


def illustrative_replicate(spec: ExperimentSpec, seed: int) -> dict:
    """RMSE on the training set for the one-, two- and indistinct-cluster sets."""
    cfg = replace(spec.illustrative_mis or spec.mis, seed=seed)
    out = {"seed": seed}
    sets = {
        "one_cluster": (spec.illustrative_one, ("olsr",)),
        "two_cluster": (spec.illustrative_two, spec.methods),
        "indistinct": (spec.illustrative_indistinct, ("olsr", "con_lab")),
    }
    for name, (rects, methods) in sets.items():
        count = spec.illustrative_n // len(rects)
        ds, _, params = _pct_data(spec, rects, count, seed, spec.noise_sigma)
        nd = apply_normalization(ds, _pct_normalizer(ds, spec, params))
        X, y = nd.inputs, nd.output
        fits = fit_pct_methods(X, y, [m for m in methods if m in spec.methods or name != "two_cluster"], cfg)
        out[name] = {m: {"rmse_train": rmse(y, f(X)), **info} for m, (f, _, info) in fits.items()}
    return out


def run_illustrative(spec: ExperimentSpec = ExperimentSpec(kind="illustrative", replicates=20)) -> dict:
    seeds = replicate_seeds(spec.seed, spec.replicates)
    reps, failed = [], []
    for i, s in enumerate(seeds):
        try:
            reps.append(illustrative_replicate(spec, s))
        except Exception as exc:  # recorded and excluded, see report meta
            failed.append({"replicate": i, "seed": s, "error": f"{type(exc).__name__}: {exc}"})
    medians = {}
    for name in ("one_cluster", "two_cluster", "indistinct"):
        methods = sorted({m for r in reps for m in r[name]})
        medians[name] = {m: float(np.median([r[name][m]["rmse_train"] for r in reps if m in r[name]])) for m in methods}
    return {
        "kind": "illustrative",
        "medians": medians,
        "replicates": reps,
        "failed": failed,
    }


# ---------------------------------------------------------------- scenario study


def scenario_replicate(spec: ExperimentSpec, seed: int, sigma: Optional[float] = None, scenarios=("desirable", "undesirable")) -> dict:
    """Test RMSE of every method for the random and the regime-held-out split."""
    sigma = spec.noise_sigma if sigma is None else sigma
    cfg = replace(spec.mis, seed=seed)
    ds, regime, params = _pct_data(spec, spec.regimes, spec.n_per_regime, seed, sigma)
    splits = {}
    if "desirable" in scenarios:
        splits["desirable"] = split_random(ds, spec.train_fraction, seed)
    if "undesirable" in scenarios:
        splits["undesirable"] = split_by_regime(ds, regime, {spec.undesirable_train})
    out = {"seed": seed, "sigma": sigma}
    for name, sp in splits.items():
        train, test = ds.subset(sp.train), ds.subset(sp.test)
        state = pct_box_normalization(params) if spec.box_normalization else fit_normalization(train)
        tr, te = apply_normalization(train, state), apply_normalization(test, state)
        fits = fit_pct_methods(tr.inputs, tr.output, spec.methods, cfg)
        out[name] = {
            m: {"rmse_train": rmse(tr.output, f(tr.inputs)), "rmse_test": rmse(te.output, f(te.inputs)), **info}
            for m, (f, _, info) in fits.items()
        }
    return out


def _aggregate(reps, scenario, methods):
    table = {}
    for m in methods:
        vals = [r[scenario][m]["rmse_test"] for r in reps if scenario in r and m in r[scenario]]
        table[m] = box_stats(vals).to_dict() if len(vals) >= 4 else {"median": float(np.median(vals)) if vals else None, "count": len(vals)}
    return table


def run_scenario_study(spec: ExperimentSpec) -> dict:
    if spec.replicates < 10:
        warnings.warn("fewer than 10 replicates: box statistics will be unstable", RuntimeWarning)
    seeds = replicate_seeds(spec.seed, spec.replicates)
    reps, failed = [], []
    for i, s in enumerate(seeds):
        try:
            reps.append(scenario_replicate(spec, s))
        except Exception as exc:
            failed.append({"replicate": i, "seed": s, "error": f"{type(exc).__name__}: {exc}"})
    return {
        "kind": "scenario_study",
        "box": {sc: _aggregate(reps, sc, spec.methods) for sc in ("desirable", "undesirable")},
        "replicates": reps,
        "failed": failed,
    }


# ---------------------------------------------------------------- noise sweep


def run_noise_sweep(spec: ExperimentSpec) -> dict:
    """Median test RMSE per (method, sigma) on desirable splits."""
    seeds = replicate_seeds(spec.seed, spec.replicates)
    medians = {m: [] for m in spec.methods}
    per_sigma, failed = {}, []
    for sigma in spec.sigmas:
        reps = []
        for i, s in enumerate(seeds):
            try:
                reps.append(scenario_replicate(spec, s, sigma, scenarios=("desirable",)))
            except Exception as exc:
                failed.append({"sigma": sigma, "replicate": i, "seed": s, "error": f"{type(exc).__name__}: {exc}"})
        per_sigma[repr(sigma)] = reps
        for m in spec.methods:
            vals = [r["desirable"][m]["rmse_test"] for r in reps if m in r["desirable"]]
            medians[m].append(float(np.median(vals)) if vals else None)
    return {
        "kind": "noise_sweep",
        "sigmas": list(spec.sigmas),
        "medians": medians,
        "replicates": per_sigma,
        "failed": failed,
    }


# ---------------------------------------------------------------- CSV workflow


def _lasso_grid(X, y, count=20):
    top = lasso_threshold(X, y)
    if top <= 0:
        return [0.0]
    return [0.0] + list(np.geomspace(top * 1e-4, top, count - 1))


def planted_two_piece(n: int = 300, n_p: int = 5, seed: int = 0, noise: float = 0.02) -> Dataset:
    """Synthetic plant data whose output switches between two linear laws.

    ``x1`` is drawn from two operating windows and the output follows a
    different slope in each; ``x2`` is a weak secondary input and the other
    columns are decoys. One linear sensor cannot follow the kink.
    """
    if n_p < 2:
        raise ValueError("need at least two inputs")
    rng = np.random.default_rng(seed)
    low = rng.uniform(0.0, 0.4, n // 2)
    high = rng.uniform(0.6, 1.0, n - n // 2)
    x1 = rng.permutation(np.concatenate([low, high]))
    X = rng.uniform(size=(n, n_p))
    X[:, 0] = x1
    # convex kink at x1 = 0.5, the shape a continuous two-model sensor can express
    y = np.maximum(0.8 - 1.2 * x1, 0.2 + 0.8 * (x1 - 0.5)) + 0.1 * X[:, 1]
    y = y + noise * rng.normal(size=n)
    return Dataset(X, y, tuple(f"x{j + 1}" for j in range(n_p)), "y")


def run_csv_workflow(path, output_column: str, spec: ExperimentSpec = ExperimentSpec(kind="csv_workflow")) -> dict:
    """Ingest, normalize on the training half, train the SIS and MIS sets.

    The reference structure is OLSR on ``spec.ref_column`` (the first input
    when unset). MIS models are trained on the reference input and on the
    subset-selection structures.
    """
    raw, load = ingest_csv(path, output_column, spec.timestamp_column)
    seed = spec.seed
    sp = split_random(raw, spec.train_fraction, seed)
    state = fit_normalization(raw.subset(sp.train))
    train = apply_normalization(raw.subset(sp.train), state)
    test = apply_normalization(raw.subset(sp.test), state)
    X, y, Xs, ys = train.inputs, train.output, test.inputs, test.output
    n_p = train.n_p
    ref = spec.ref_column or train.input_names[0]
    if ref not in train.input_names:
        raise ValueError(f"reference column {ref!r} is not an input")
    ref_idx = [train.input_names.index(ref)]
    sensors = []

    def add(method, predict, train_cols, cfg, n_pc=None, extra=None):
        rec = _record(method, None, rmse(y, predict(X)), rmse(ys, predict(Xs)), cfg, seed, extra)
        rec["n_p_star"] = len(train_cols)
        rec["n_pc_star"] = n_pc
        rec["inputs"] = [train.input_names[j] for j in train_cols]
        sensors.append(rec)

    ols = train_olsr(X, y)
    add("sis_olsr", lambda M: predict_linear(ols, M), list(range(n_p)), {})

    if n_p > 1:
        cv = cross_validate(lambda a, b, k: train_pcr(a, b, ComponentConfig(k)), X, y, range(1, n_p + 1), spec.cv_folds, seed)
        pcr = train_pcr(X, y, ComponentConfig(cv.best))
        add("sis_pcr", lambda M: predict_linear(pcr, M), list(range(n_p)), {"cv": cv.table}, n_pc=int(cv.best))

    grid = _lasso_grid(X, y)
    cv = cross_validate(lambda a, b, lam: train_lasso(a, b, LassoConfig(lam)), X, y, grid, spec.cv_folds, seed, simpler="larger")
    las = train_lasso(X, y, LassoConfig(cv.best))
    add("sis_lasso", lambda M: predict_linear(las, M), [int(j) for j in las.support], {"lambda": cv.best, "cv": cv.table})

    ref_model = train_olsr(X[:, ref_idx], y)
    add("sis_ref", lambda M: predict_linear(ref_model, M[:, ref_idx]), ref_idx, {"column": ref})

    structures = {"ref": ref_idx}
    for k in (1, 2):
        if k > n_p:
            continue
        ss = train_subset_selection(X, y, SubsetConfig(k))
        cols = [int(j) for j in ss.support]
        structures[f"ss{k}"] = cols
        add(f"sis_ss{k}", lambda M, m=ss: predict_linear(m, M), cols, {"n_p_tilde": k})

    cfg = replace(spec.mis, seed=seed)
    models = {}
    for sname, cols in structures.items():
        fits = fit_pct_methods(X[:, cols], y, MIS_METHODS, cfg)
        for m, (f, mm, info) in fits.items():
            add(f"mis_{m}_{sname}", lambda M, f=f, c=cols: f(M[:, c]), cols, {"mis": asdict(cfg)}, extra={"continuity": info})
            models[f"mis_{m}_{sname}"] = mm.to_dict()
    return {
        "kind": "csv_workflow",
        "sensors": sensors,
        "load": {"rows_read": load.rows_read, "drop_count": load.drop_count, "dropped_rows": list(load.dropped_rows)},
        "split": {"train": len(sp.train), "test": len(sp.test)},
        "models": models,
    }


# ---------------------------------------------------------------- reports


def study_sensors(result: dict, spec: ExperimentSpec) -> list[dict]:
    """Flatten a study result into report sensor records (medians)."""
    kind = result["kind"]
    cfg = {"spec_kind": kind}
    recs = []
    if kind == "illustrative":
        for name, table in result["medians"].items():
            for m, v in table.items():
                recs.append(_record(m, None, v, None, {**cfg, "dataset": name}, spec.seed))
    elif kind == "scenario_study":
        for sc, table in result["box"].items():
            for m, b in table.items():
                recs.append(_record(m, None, None, b.get("median"), {**cfg, "scenario": sc}, spec.seed))
    elif kind == "noise_sweep":
        for m, vals in result["medians"].items():
            for sigma, v in zip(result["sigmas"], vals):
                recs.append(_record(m, None, None, v, {**cfg, "sigma": sigma}, spec.seed))
    elif kind == "csv_workflow":
        recs = result["sensors"]
    for r in recs:
        if r["n_p_star"] == 0:
            r["n_p_star"] = 2 if kind != "csv_workflow" else r["n_p_star"]
    return recs


def report_meta(spec: ExperimentSpec, result: dict, timestamp: Optional[str] = None) -> dict:
    # the destination path does not influence the results, so reports written
    # to different files from the same settings stay byte-identical
    settings = spec.to_dict()
    settings.pop("out", None)
    return {
        "seed": spec.seed,
        "timestamp": timestamp,
        "version": __version__,
        "spec": settings,
        "failed_replicates": len(result.get("failed", [])),
    }
