"""Command-line front end: ``assr solve|sweep|demo|validate``.

Exit codes: 0 ok, 1 validate found a rule violation, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__, harness
from ._backend import BACKEND
from .auxiliary import AuxiliaryConfig, energy
from .errors import ASSRError, ConfigError, NumericalError
from .harness import ExperimentSpec, Method
from .oracle import kkt_residual
from .outputs import (codes_csv, csv_text, curve_csv, slug, trajectory_csv, write_json,
                      write_text)
from .penalty import Penalty, validate_rules
from .spiking import SpikingConfig

EXIT_OK, EXIT_RULES, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

TOP_KEYS = {"m", "n", "sparsity", "snr_db", "lambda", "methods", "trials", "seed",
            "threshold_db", "truth", "spiking", "auxiliary", "output_dir"}
SPIKING_KEYS = {"tau", "t_ref", "dt", "horizon", "sample_every"}
AUX_KEYS = {"dt", "horizon", "sample_every", "stop_tol", "energy_tol"}

DEMO_CONFIG = {
    "m": 3,
    "truth": [0.4792, 0.0, 0.9754],
    "snr_db": None,
    "lambda": 0.05,
    "trials": 20,
    "seed": 0,
    "methods": [{"solver": "spiking", "penalty": "l1"},
                {"solver": "spiking", "penalty": "exp", "param": 1.0}],
    "spiking": {"tau": 1.0, "t_ref": 0.01, "dt": 0.001, "horizon": 1000.0},
}


@dataclass(frozen=True)
class RunConfig:
    spec: ExperimentSpec
    output_dir: str = "runs"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(d, TOP_KEYS, "config")
        sp = d.get("spiking") or {}
        ax = d.get("auxiliary") or {}
        _reject_unknown(sp, SPIKING_KEYS, "spiking")
        _reject_unknown(ax, AUX_KEYS, "auxiliary")
        kw = {}
        for key, name in (("m", "m"), ("n", "n"), ("trials", "trials"), ("seed", "seed_base")):
            if key in d:
                kw[name] = _as_int(d[key], key)
        for key, name in (("sparsity", "sparsity"), ("lambda", "lam"),
                          ("threshold_db", "threshold_db")):
            if key in d:
                kw[name] = _as_float(d[key], key)
        if "snr_db" in d:
            kw["snr_db"] = None if d["snr_db"] is None else _as_float(d["snr_db"], "snr_db")
        if d.get("truth") is not None:
            truth = d["truth"]
            if not isinstance(truth, list) or not truth:
                raise ConfigError("truth must be a non-empty list of numbers")
            kw["truth"] = tuple(_as_float(x, "truth") for x in truth)
            if "n" not in d:
                kw["n"] = len(truth)
        if "methods" in d:
            if not isinstance(d["methods"], list):
                raise ConfigError("methods must be a list")
            kw["methods"] = tuple(Method.from_dict(m) for m in d["methods"])
        kw["spiking"] = SpikingConfig(**{k: _as_float(v, k) for k, v in sp.items()
                                         if v is not None})
        aux = {k: _as_float(v, k) for k, v in ax.items() if v is not None}
        if "sample_every" in aux:
            aux["sample_every"] = int(aux["sample_every"])
        kw["auxiliary"] = AuxiliaryConfig(**aux)
        spec = ExperimentSpec(**kw).resolved()
        out = d.get("output_dir", "runs")
        if not isinstance(out, str):
            raise ConfigError("output_dir must be a string")
        return cls(spec, out)

    def to_dict(self) -> dict:
        return {**self.spec.to_dict(), "output_dir": self.output_dir}


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def _as_float(v, key) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def _as_int(v, key) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def load_config(path: Optional[str], default: Optional[dict] = None):
    """Read a config file, unwrapping a previous run's meta.json.

    Returns (raw config dict, extra meta fields such as sweep axis/values).
    """
    if path is None:
        return dict(default or {}), {}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if isinstance(raw, dict) and "config" in raw and "command" in raw:
        return raw["config"], raw
    return raw, {}


def _meta(command: str, cfg: RunConfig, **extra) -> dict:
    spec = cfg.spec
    return {
        "command": command,
        "config": cfg.to_dict(),
        "seeds": {str(spec.seed_base + t): harness.trial_seeds(spec.seed_base + t)
                  for t in range(spec.trials)},
        "version": __version__,
        "backend": BACKEND,
        **extra,
    }


def _out_dir(args, command: str, cfg: RunConfig, extra: str = "") -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.output_dir) / f"{command}-{cfg.spec.digest()}{extra}"


def _write_solve_outputs(out: Path, problem, outcomes, spec):
    write_text(out / "problem.json", problem.to_json() + "\n")
    write_text(out / "codes.csv", codes_csv({o.method.label: o.code for o in outcomes}))
    summary = {}
    for o in outcomes:
        pen = o.method.penalty
        summary[o.method.label] = {
            "nmse_db": None if np.isnan(o.nmse) else o.nmse,
            "energy": energy(o.code, problem, pen, spec.lam).total,
            "kkt_residual": kkt_residual(o.code, problem, pen, spec.lam),
        }
        name = slug(o.method.label)
        if o.method.solver == "spiking":
            trace = o.detail
            write_text(out / f"raster_{name}.csv", trace.raster.to_csv(spec.spiking.tau))
            write_text(out / f"trace_{name}.csv", trace.to_csv())
        elif o.method.solver == "auxiliary":
            write_text(out / f"trajectory_{name}.csv", trajectory_csv(o.detail))
    write_json(out / "summary.json", summary)
    return summary


def cmd_solve(args) -> int:
    raw, _ = load_config(args.config)
    cfg = RunConfig.from_dict(raw)
    spec = cfg.spec
    problem = harness.make_problem(spec, 0)
    outcomes = [harness.solve_method(problem, m, spec) for m in spec.methods]
    out = _out_dir(args, "solve", cfg)
    summary = _write_solve_outputs(out, problem, outcomes, spec)
    write_json(out / "meta.json", _meta("solve", cfg))
    for label, s in summary.items():
        print(f"{label}: nmse={s['nmse_db']} dB")
    print(f"wrote {out}")
    return EXIT_OK


def parse_values(text: str) -> List[float]:
    """``start:stop:step`` (stop inclusive) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] == 0:
                raise ValueError
            start, stop, step = parts
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            if count < 1:
                raise ValueError
            return [round(start + k * step, 12) for k in range(count)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"bad --values {text!r}; use start:stop:step or a,b,c") from None


def _trial_rows(result):
    rows = []
    for value, res in zip(result.values, result.results):
        for rec in res.records:
            for t, (score, ct) in enumerate(zip(rec.nmse, rec.convergence_times)):
                rows.append((value, res.spec.seed_base + t, rec.method, score, ct))
    return rows


STAT_COLUMNS = ("median_nmse", "q25_nmse", "q75_nmse", "success_probability",
                "median_convergence_time")


def cmd_sweep(args) -> int:
    raw, meta = load_config(args.config)
    axis = args.axis or meta.get("axis")
    values = parse_values(args.values) if args.values else meta.get("values")
    if axis is None or values is None:
        raise ConfigError("sweep needs --axis and --values")
    if axis not in harness.AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(harness.AXES)}")
    cfg = RunConfig.from_dict(raw)
    result = harness.sweep(cfg.spec, axis, values, jobs=args.jobs)
    out = _out_dir(args, "sweep", cfg, f"-{harness.AXES[axis]}")
    rows = [(r["axis"], r["value"], r["method"], *[r[c] for c in STAT_COLUMNS])
            for r in result.rows()]
    write_text(out / "sweep.csv", csv_text(["axis", "value", "method", *STAT_COLUMNS], rows))
    write_text(out / "trials.csv", csv_text(
        ["value", "seed", "method", "nmse", "convergence_time"], _trial_rows(result)))
    write_json(out / "summary.json", {"axis": result.axis, "values": list(result.values),
                                      "records": result.rows()})
    write_json(out / "meta.json", _meta("sweep", cfg, axis=result.axis,
                                        values=list(result.values)))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_demo(args) -> int:
    raw, _ = load_config(args.config, DEMO_CONFIG)
    cfg = RunConfig.from_dict(raw)
    spec = cfg.spec
    res = harness.run_trials(spec, jobs=args.jobs)
    out = _out_dir(args, "demo", cfg)
    rows = []
    for rec in res.records:
        for t, score in enumerate(rec.nmse):
            rows.append((spec.seed_base + t, rec.method, score))
    write_text(out / "trials.csv", csv_text(["seed", "method", "nmse"], rows))
    problem = harness.make_problem(spec, 0)
    outcomes = [harness.solve_method(problem, m, spec) for m in spec.methods]
    _write_solve_outputs(out, problem, outcomes, spec)
    times = np.linspace(0.0, spec.spiking.horizon, 101)
    table = harness.convergence_curve(problem, spec.methods, times, spec)
    write_text(out / "convergence.csv", curve_csv(table))
    medians = {r.method: r.stats() for r in res.records}
    write_json(out / "medians.json", medians)
    write_json(out / "meta.json", _meta("demo", cfg))
    for label, s in medians.items():
        print(f"{label}: median nmse={s['median_nmse']:.4f} dB")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        pen = Penalty(args.penalty, args.param)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not args.lam > 0:
        raise ConfigError("--lambda must be positive")
    report = validate_rules(pen, args.lam)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if report.baseline_exempt:
        print(f"warning: {pen.label} is the convex baseline and exempt from the rules",
              file=sys.stderr)
        return EXIT_OK
    if not report.passed:
        print(report.summary(), file=sys.stderr)
        return EXIT_RULES
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="assr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config, or a previous run's meta.json")
        sp.add_argument("--out", help="output directory (default: <output_dir>/<cmd>-<hash>)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for trials")

    common(sub.add_parser("solve", help="run one problem through every configured method"))
    sw = sub.add_parser("sweep", help="aggregate trials across a sparsity/snr/measurement axis")
    common(sw)
    sw.add_argument("--axis", help="sparsity, snr or measurement")
    sw.add_argument("--values", help="start:stop:step (inclusive) or comma list")
    common(sub.add_parser("demo", help="3-neuron l1 vs exp comparison over 20 dictionaries"))
    va = sub.add_parser("validate", help="check a penalty against the admissibility rules")
    va.add_argument("--penalty", required=True)
    va.add_argument("--param", type=float, default=1.0)
    va.add_argument("--lambda", dest="lam", type=float, required=True)
    return p


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "demo": cmd_demo,
            "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ASSRError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
