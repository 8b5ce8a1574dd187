"""Command-line front end.

Subcommands: ``fit`` (fit and serialize one model), ``forecast`` (extend a
fitted model and score it against measured data), ``experiment`` (run the
full-factorial sweep), and ``modes`` (mode tables and cross-model statistics).

Every run writes exactly one ``manifest.json`` into its output directory with
the full parameter snapshot needed to reproduce the outputs byte for byte.
Exit codes: 0 ok, 2 usage or malformed input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .augmentation import AugmentationSpec, build_snapshots
from .dmd import DmdModel, fit_model, forecast, load_model, save_model, stabilize
from .errors import (
    ConfigInfeasibleError,
    CsvFormatError,
    DimensionMismatchError,
    ModelFormatError,
    WavedmdError,
)
from .experiment import ExperimentConfig, ExperimentReport, run
from .metrics import evaluate
from .modal import aggregate, component_rows, mode_table_rows, sort_modes, statistics_rows
from .tables import write_rows
from .timeseries import TimeSeries, read_csv, standardize

USAGE_ERROR = 2
NUMERICAL_ERROR = 3


class ConfigFileError(WavedmdError):
    """A config file line could not be parsed."""


def _write_manifest(outdir: Path, command: str, inputs: list[str], config: dict,
                    seed, outputs: list[str], started: float) -> None:
    doc = {
        "command": command,
        "inputs": [str(Path(p).resolve()) for p in inputs],
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "outputs": outputs,
        "duration_s": time.perf_counter() - started,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_record(path: str) -> TimeSeries:
    try:
        return read_csv(path)
    except FileNotFoundError:
        raise CsvFormatError(f"no such file: {path}") from None


def cmd_fit(args) -> int:
    started = time.perf_counter()
    ts = _load_record(args.csv)
    ts = TimeSeries(ts.values, ts.dt, ts.names, steps_per_wave=args.steps_per_wave)
    spec = AugmentationSpec(nde=args.nde, nts=args.nts)
    start = spec.lead_required if args.start is None else args.start
    train_steps = args.niw * ts.steps_per_wave
    if start - spec.lead_required < 0 or start + train_steps > ts.m:
        raise CsvFormatError(
            f"training window [{start}, {start + train_steps}) with lead "
            f"{spec.lead_required} does not fit the {ts.m}-step record"
        )
    std_ts, record = standardize(ts, (start, start + train_steps))
    train = std_ts.slice_steps(start, start + train_steps)
    history = std_ts.slice_steps(start - spec.lead_required, start)
    pair = build_snapshots(train, history, spec)
    model = fit_model(
        pair, ts.dt, record, ts.names,
        steps_per_wave=ts.steps_per_wave, train_end=start + train_steps,
    )
    if not args.no_stabilize:
        model = stabilize(model)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_model(model, outdir / "model.json")
    _write_manifest(
        outdir, "fit", [args.csv],
        {
            "niw": args.niw, "nde": args.nde, "nts": args.nts,
            "steps_per_wave": args.steps_per_wave, "start": start,
            "stabilize": not args.no_stabilize,
        },
        None, ["model.json"], started,
    )
    print(f"model written to {outdir / 'model.json'} (p={model.dim}, "
          f"{model.n_excluded} zero-eigenvalue modes excluded)")
    return 0


def cmd_forecast(args) -> int:
    started = time.perf_counter()
    try:
        model = load_model(args.model)
    except FileNotFoundError:
        raise ModelFormatError(f"no such file: {args.model}") from None
    ts = _load_record(args.csv)
    if tuple(ts.names) != tuple(model.names):
        raise DimensionMismatchError(
            f"variable names differ: model {model.names} vs record {ts.names}"
        )
    horizon = args.horizon_waves * model.steps_per_wave
    pred = forecast(model, horizon=horizon)
    overlap = max(0, min(horizon, ts.m - model.train_end))
    meas = None
    if horizon > 0 and overlap == horizon:
        meas = model.standardization.apply(
            ts.values[:, model.train_end:model.train_end + horizon]
        )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for j in range(horizon):
        t_over_te = (j + 1) / model.steps_per_wave
        for i, name in enumerate(model.names):
            rows.append(
                {
                    "t_over_te": float(t_over_te),
                    "variable": name,
                    "predicted": float(pred[i, j]),
                    "measured": float(meas[i, j]) if meas is not None else "",
                }
            )
    write_rows(outdir / "forecast.csv", rows,
               ["t_over_te", "variable", "predicted", "measured"])
    outputs = ["forecast.csv"]
    if meas is not None:
        report = evaluate(pred, meas)
        with open(outdir / "metrics.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        outputs.append("metrics.json")
        print(f"nrmse={report.nrmse:.6g} pearson_r={report.pearson_r:.6g} "
              f"aam={report.aam:.6g} nammae={report.nammae:.6g}")
    else:
        print("no full measured test segment available; metrics not computed")
    _write_manifest(
        outdir, "forecast", [args.model, args.csv],
        {"horizon_waves": args.horizon_waves}, None, outputs, started,
    )
    return 0


_LIST_KEYS = {"niw_set", "now_set", "nde_set", "nts_set"}
_INT_KEYS = {"samples", "seed", "steps_per_wave"}
_BOOL_KEYS = {"stabilize"}


def parse_config_file(path) -> ExperimentConfig:
    """Flat key-value format: ``key = value`` lines, ``#`` comments, integer
    lists comma-separated."""
    fields: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigFileError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key in _LIST_KEYS:
                try:
                    fields[key] = tuple(int(v.strip()) for v in value.split(",") if v.strip())
                except ValueError:
                    raise ConfigFileError(f"{path}:{lineno}: field {key}: not an integer list: {value!r}") from None
            elif key in _INT_KEYS:
                try:
                    fields[key] = int(value)
                except ValueError:
                    raise ConfigFileError(f"{path}:{lineno}: field {key}: not an integer: {value!r}") from None
            elif key in _BOOL_KEYS:
                if value not in ("true", "false"):
                    raise ConfigFileError(f"{path}:{lineno}: field {key}: expected true or false, got {value!r}")
                fields[key] = value == "true"
            else:
                raise ConfigFileError(f"{path}:{lineno}: unknown field {key!r}")
    try:
        return ExperimentConfig(**fields)
    except ValueError as exc:
        raise ConfigFileError(f"{path}: {exc}") from None


def write_report_files(report: ExperimentReport, outdir: Path) -> list[str]:
    outputs = ["report.json"]
    with open(outdir / "report.json", "wb") as fh:
        fh.write(report.to_json_bytes())

    box_rows = []
    for key in sorted(report.cells):
        cell = report.cells[key]
        for metric, summary in cell.metrics.items():
            for stat in ("lo_whisker", "q1", "median", "q3", "hi_whisker"):
                box_rows.append(
                    {
                        "niw": cell.niw, "now": cell.now, "nde": cell.nde, "nts": cell.nts,
                        "metric": metric, "stat": stat, "value": getattr(summary, stat),
                        "evaluated": cell.evaluated, "failed": cell.failed,
                    }
                )
    write_rows(outdir / "boxstats.csv", box_rows,
               ["niw", "now", "nde", "nts", "metric", "stat", "value", "evaluated", "failed"])
    outputs.append("boxstats.csv")

    best_rows = [
        {
            "niw": niw, "now": now,
            "nde": v[0] if v else "", "nts": v[1] if v else "",
        }
        for (niw, now), v in sorted(report.best.items())
    ]
    write_rows(outdir / "best.csv", best_rows, ["niw", "now", "nde", "nts"])
    outputs.append("best.csv")

    for label, sel in sorted(report.modal.items()):
        fname = f"modal_{label}.csv"
        write_rows(outdir / fname, statistics_rows(sel.stats))
        outputs.append(fname)
        fname = f"modal_components_{label}.csv"
        write_rows(
            outdir / fname,
            component_rows(sel.stats, sel.layout, tuple(report.record_info["names"])),
        )
        outputs.append(fname)
    return outputs


def cmd_experiment(args) -> int:
    started = time.perf_counter()
    ts = _load_record(args.csv)
    if args.config_file is not None:
        try:
            cfg = parse_config_file(args.config_file)
        except FileNotFoundError:
            raise ConfigFileError(f"no such file: {args.config_file}") from None
    else:
        cfg = ExperimentConfig()
    report = run(ts, cfg, jobs=args.jobs)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = write_report_files(report, outdir)
    _write_manifest(
        outdir, "experiment", [args.csv],
        {**cfg.to_dict(), "jobs": args.jobs}, cfg.seed, outputs, started,
    )
    n_cells = len(report.cells)
    n_failed = sum(c.failed for c in report.cells.values())
    print(f"{n_cells} cells x {cfg.samples} windows evaluated "
          f"({n_failed} window failures); report in {outdir}")
    return 0


def cmd_modes(args) -> int:
    started = time.perf_counter()
    models: list[DmdModel] = []
    for path in args.models:
        try:
            models.append(load_model(path))
        except FileNotFoundError:
            raise ModelFormatError(f"no such file: {path}") from None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if len(models) == 1:
        write_rows(outdir / "modes.csv", mode_table_rows(models[0]))
        outputs.append("modes.csv")
    else:
        stats = aggregate([sort_modes(m) for m in models])
        write_rows(outdir / "mode_stats.csv", statistics_rows(stats))
        write_rows(
            outdir / "mode_components.csv",
            component_rows(stats, models[0].layout, models[0].names),
        )
        outputs += ["mode_stats.csv", "mode_components.csv"]
    _write_manifest(outdir, "modes", list(args.models), {"count": len(models)},
                    None, outputs, started)
    print(f"mode tables for {len(models)} model(s) written to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavedmd",
        description="Equation-free forecasting of multivariate wave-encounter "
                    "records by dynamic mode decomposition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model on one training window")
    p_fit.add_argument("csv")
    p_fit.add_argument("--niw", type=int, required=True, help="training length in encounter waves")
    p_fit.add_argument("--nde", type=int, default=0, choices=range(0, 5),
                       help="number of derivative blocks (0..4)")
    p_fit.add_argument("--nts", type=int, default=0, help="number of time-shifted copies")
    p_fit.add_argument("--steps-per-wave", type=int, default=32)
    p_fit.add_argument("--start", type=int, default=None,
                       help="training start step (default: first feasible)")
    p_fit.add_argument("--no-stabilize", action="store_true",
                       help="keep growing modes instead of clamping them")
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.set_defaults(func=cmd_fit)

    p_fc = sub.add_parser("forecast", help="forecast from a fitted model")
    p_fc.add_argument("model")
    p_fc.add_argument("csv")
    p_fc.add_argument("--horizon-waves", type=int, default=1)
    p_fc.add_argument("--out", required=True)
    p_fc.set_defaults(func=cmd_forecast)

    p_ex = sub.add_parser("experiment", help="run the full-factorial sweep")
    p_ex.add_argument("csv")
    p_ex.add_argument("--config-file", default=None)
    p_ex.add_argument("--out-dir", required=True)
    p_ex.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_ex.set_defaults(func=cmd_experiment)

    p_md = sub.add_parser("modes", help="mode tables and cross-model statistics")
    p_md.add_argument("models", nargs="+")
    p_md.add_argument("--out", required=True)
    p_md.set_defaults(func=cmd_modes)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CsvFormatError, ConfigFileError, ModelFormatError, ConfigInfeasibleError, ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except WavedmdError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
