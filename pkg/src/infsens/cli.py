"""Command line entry point: ``infsens <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np
import yaml

from .dataset import (
    DatasetError,
    NormalizationState,
    PctParams,
    apply_normalization,
    denormalize,
    emit_report,
    fit_normalization,
    generate_pct_dataset,
    ingest_csv,
    write_csv,
)
from .experiments import (
    PCT_METHODS,
    ExperimentSpec,
    _regimes,
    report_meta,
    run_csv_workflow,
    run_illustrative,
    run_noise_sweep,
    run_scenario_study,
    study_sensors,
)
from .labeling import kmeans_label
from .mis import MisConfig, MultiModel, predict_mis, train_mis_con, train_mis_con_lab, train_mis_sota
from .sis import LinearModel, predict_linear, train_olsr


class CliError(Exception):
    pass


def load_config(path) -> dict:
    """YAML mapping whose keys are ExperimentSpec fields; ``mis`` is a nested MisConfig section."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise CliError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"config {path} must be a mapping")
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise CliError(f"unknown config keys {unknown}")
    for key in ("mis", "illustrative_mis"):
        if isinstance(data.get(key), dict):
            bad = sorted(set(data[key]) - {f.name for f in fields(MisConfig)})
            if bad:
                raise CliError(f"unknown keys in [{key}]: {bad}")
    return data


def build_spec(kind: str, args) -> ExperimentSpec:
    data = load_config(args.config) if getattr(args, "config", None) else {}
    data["kind"] = kind
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "replicates", None) is not None:
        data["replicates"] = args.replicates
    if getattr(args, "methods", None):
        data["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if getattr(args, "out", None):
        data["out"] = str(args.out)
    for key in ("output_column", "ref_column", "timestamp_column"):
        if getattr(args, key, None):
            data[key] = getattr(args, key)
    try:
        return ExperimentSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid experiment settings: {exc}") from exc


def _write(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _series_rows(result: dict):
    kind = result["kind"]
    if kind == "illustrative":
        header = ["replicate", "seed", "dataset", "method", "rmse_train"]
        rows = [
            [i, rep["seed"], name, m, rec["rmse_train"]]
            for i, rep in enumerate(result["replicates"])
            for name in ("one_cluster", "two_cluster", "indistinct")
            for m, rec in rep[name].items()
        ]
    elif kind == "scenario_study":
        header = ["replicate", "seed", "scenario", "method", "rmse_train", "rmse_test"]
        rows = [
            [i, rep["seed"], sc, m, rec["rmse_train"], rec["rmse_test"]]
            for i, rep in enumerate(result["replicates"])
            for sc in ("desirable", "undesirable")
            for m, rec in rep[sc].items()
        ]
    elif kind == "noise_sweep":
        header = ["sigma", "method", "median_rmse_test"]
        rows = [[s, m, v] for m, vals in result["medians"].items() for s, v in zip(result["sigmas"], vals)]
    else:
        header = ["method", "inputs", "rmse_train", "rmse_test"]
        rows = [[r["method"], " ".join(r["inputs"]), r["rmse_train"], r["rmse_test"]] for r in result["sensors"]]
    return header, rows


def write_series(result: dict, path) -> None:
    header, rows = _series_rows(result)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _study(kind, args):
    spec = build_spec(kind, args)
    if kind == "illustrative":
        result = run_illustrative(spec)
    elif kind == "scenario_study":
        result = run_scenario_study(spec)
    elif kind == "noise_sweep":
        result = run_noise_sweep(spec)
    else:
        if not spec.output_column:
            raise CliError("csv-workflow needs --output-column")
        result = run_csv_workflow(args.data, spec.output_column, spec)
    text = emit_report(study_sensors(result, spec), result, report_meta(spec, result, args.timestamp))
    _write(text, args.out)
    if args.out is not None:
        out = Path(args.out)
        write_series(result, out.with_name(out.stem + "_series.csv"))
    return 0


# ---------------------------------------------------------------- single-model commands


def cmd_generate(args):
    spec = build_spec("scenario_study", args)
    params = PctParams(noise_sigma=args.noise_sigma if args.noise_sigma is not None else spec.noise_sigma, seed=spec.seed)
    ds, labels = generate_pct_dataset(params, _regimes(spec.regimes, spec.n_per_regime))
    if args.out is None:
        raise CliError("generate needs --out")
    write_csv(ds, args.out, {"regime": labels} if args.with_regime else None)
    return 0


def cmd_train(args):
    ds, load = ingest_csv(args.data, args.output_column, args.timestamp_column)
    if args.inputs:
        names = [c.strip() for c in args.inputs.split(",")]
        try:
            ds = ds.select(names)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    state = fit_normalization(ds)
    nd = apply_normalization(ds, state)
    X, y = nd.inputs, nd.output
    cfg = MisConfig(**(load_config(args.config).get("mis") or {})) if args.config else MisConfig()
    cfg = replace(cfg, seed=args.seed if args.seed is not None else cfg.seed)
    method = args.method
    doc = {"inputs": list(ds.input_names), "output": ds.output_name, "dropped_rows": load.drop_count}
    if method == "olsr":
        m = train_olsr(X, y)
        doc.update({"kind": "sis", "model": m.to_dict(), "normalization": state.to_dict()})
    else:
        labels = kmeans_label(X, 2, cfg.seed, cfg.kmeans_restarts, cfg.kmeans_max_iter)
        if method == "sota":
            mm = train_mis_sota(X, y, cfg=cfg, labels=labels)
        elif method == "con":
            mm = train_mis_con(X, y, labels, cfg)
        else:
            mm = train_mis_con_lab(X, y, cfg, warm=train_mis_con(X, y, labels, cfg))
        mm = replace(mm, normalization=state)
        doc.update({"kind": "mis", **mm.to_dict()})
    from .dataset import _jsonable

    _write(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_predict(args):
    try:
        doc = json.loads(Path(args.model).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load model {args.model}: {exc}") from exc
    state = NormalizationState.from_dict(doc["normalization"])
    names = doc["inputs"]
    with open(args.data, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in names if c not in (reader.fieldnames or [])]
        if missing:
            raise CliError(f"{args.data}: missing input columns {missing}")
        rows = list(reader)
    try:
        M = np.array([[float(r[c]) for c in names] for r in rows])
    except ValueError as exc:
        raise CliError(f"{args.data}: non-numeric input value ({exc})") from exc
    Mn = np.column_stack([(M[:, j] - state.shift[state.index(c)]) / state.scale[state.index(c)] for j, c in enumerate(names)])
    if doc["kind"] == "sis":
        yn = predict_linear(LinearModel(**{k: doc["model"][k] for k in ("a", "a0", "method")}), Mn)
    else:
        yn = predict_mis(MultiModel.from_dict(doc), Mn)
    y = denormalize(yn, state, doc["output"])
    lines = [doc["output"]] + [repr(float(v)) for v in y]
    _write("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- parser


def _common(p, study=True):
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--config", help="YAML file mirroring ExperimentSpec / MisConfig fields")
    p.add_argument("--out", help="output file (stdout when omitted)")
    if study:
        p.add_argument("--replicates", type=int, default=None)
        p.add_argument("--methods", help=f"comma-separated subset of {','.join(PCT_METHODS)}")
        p.add_argument(
            "--timestamp",
            default=None,
            help="string stored in meta.timestamp; omitted by default so reruns are byte-identical",
        )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infsens", description="single- and multi-model inferential sensors")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic PCT dataset as CSV")
    _common(p, study=False)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--with-regime", action="store_true", help="append the regime index column")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one sensor on a CSV file and save it as JSON")
    _common(p, study=False)
    p.add_argument("--data", required=True)
    p.add_argument("--output-column", required=True)
    p.add_argument("--timestamp-column")
    p.add_argument("--inputs", help="comma-separated input columns (default: all)")
    p.add_argument("--method", choices=PCT_METHODS, default="olsr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a saved sensor to a CSV file")
    _common(p, study=False)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_predict)

    for name, kind in (("illustrative", "illustrative"), ("scenario-study", "scenario_study"), ("noise-sweep", "noise_sweep")):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')}")
        _common(p)
        p.set_defaults(func=lambda a, k=kind: _study(k, a))

    p = sub.add_parser("csv-workflow", help="SIS and MIS comparison on a plant CSV file")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--output-column")
    p.add_argument("--ref-column")
    p.add_argument("--timestamp-column")
    p.set_defaults(func=lambda a: _study("csv_workflow", a))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DatasetError, FileNotFoundError) as exc:
        print(f"infsens: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
