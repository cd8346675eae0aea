"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest

from assr import spiking
from assr.auxiliary import AuxiliaryConfig, integrate, output_map
from assr.cli import DEMO_CONFIG, RunConfig, main
from assr.harness import DEFAULT_METHODS, ExperimentSpec, make_problem, run_trials, solve_method
from assr.oracle import ista_l1, kkt_residual, prox_grad_nonconvex
from assr.penalty import Penalty, check_derivatives, validate_rules
from assr.spiking import SpikingConfig, current_bounds

L1 = Penalty.l1()
EXP = Penalty.exponential(1.0)


@pytest.fixture
def verdict(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
        assert ok, detail
    return emit


# shared runs -------------------------------------------------------------------

def crit2_problems():
    spec = ExperimentSpec(m=20, n=40, sparsity=0.1, snr_db=None, lam=0.1, trials=20)
    return [make_problem(spec, t) for t in range(20)]


@pytest.fixture(scope="module")
def crit3_runs():
    """10 instances of 10x20 with Exp(1), rates at 20 tau and 200 tau.

    Same 10% sparsity as criterion 2. Denser supports make the restricted Gram
    ill-conditioned and the O(1/t) rate average settles too slowly.
    """
    spec = ExperimentSpec(m=10, n=20, sparsity=0.1, snr_db=None, lam=0.1, trials=10)
    cfg = SpikingConfig(tau=1.0, lam=0.1, t_ref=0.01, dt=0.001, horizon=200.0,
                        sample_every=20.0).resolved()
    start = time.perf_counter()
    runs = []
    for t in range(spec.trials):
        p = make_problem(spec, t)
        trace = spiking.run(p, EXP, cfg)
        aux = integrate(p, EXP, AuxiliaryConfig(tau=1.0, lam=0.1))
        runs.append((p, trace, aux))
    return runs, cfg, time.perf_counter() - start


@pytest.fixture(scope="module")
def crit7_runs():
    """Default experiment: four spiking variants on 20 trials of 100x200."""
    spec = ExperimentSpec().resolved()
    start = time.perf_counter()
    traces = {m.label: [] for m in spec.methods}
    problems = []
    for t in range(spec.trials):
        p = make_problem(spec, t)
        problems.append(p)
        for m in spec.methods:
            traces[m.label].append(solve_method(p, m, spec, keep_path=False))
    return spec, problems, traces, time.perf_counter() - start


# criteria ----------------------------------------------------------------------

def test_criterion_1_soft_threshold(verdict):
    start = time.perf_counter()
    u = np.linspace(0, 5, 1000)
    err = max(np.max(np.abs(output_map(u, L1, lam) - np.maximum(u - lam, 0)))
              for lam in (0.1, 0.3, 1.0))
    elapsed = time.perf_counter() - start
    verdict(1, err <= 1e-12 and elapsed < 1.0,
            f"max |output_map - soft threshold| = {err:.3g} (<= 1e-12), {elapsed:.3f} s (< 1 s)")


def test_criterion_2_critical_points(verdict):
    start = time.perf_counter()
    worst_kkt = {"l1": 0.0, "exp(1)": 0.0}
    worst_gap = 0.0
    for p in crit2_problems():
        for pen in (L1, EXP):
            aux = integrate(p, pen, AuxiliaryConfig(lam=0.1))
            worst_kkt[pen.label] = max(worst_kkt[pen.label],
                                       kkt_residual(aux.final.a, p, pen, 0.1))
            if pen is L1:
                worst_gap = max(worst_gap,
                                float(np.max(np.abs(ista_l1(p, 0.1).a - aux.final.a))))
    elapsed = time.perf_counter() - start
    ok = max(worst_kkt.values()) < 1e-6 and worst_gap <= 1e-4 and elapsed < 30
    verdict(2, ok, f"kkt l1={worst_kkt['l1']:.3g}, exp={worst_kkt['exp(1)']:.3g} (< 1e-6); "
                   f"|ista - aux| = {worst_gap:.3g} (<= 1e-4); {elapsed:.1f} s (< 30 s)")


def test_criterion_3_spiking_tracks_auxiliary(verdict, crit3_runs):
    runs, cfg, elapsed = crit3_runs
    early, late = [], []
    for p, trace, aux in runs:
        assert aux.converged
        k20 = int(np.argmin(np.abs(trace.times - 20.0)))
        early.append(float(np.max(np.abs(trace.rates[k20] - aux.final.a))))
        late.append(float(np.max(np.abs(trace.final_rates - aux.final.a))))
    improved = sum(l < e for e, l in zip(early, late))
    ok = max(late) <= 0.05 and improved >= 9 and elapsed < 120
    verdict(3, ok, f"max err at 200 tau = {max(late):.4f} (<= 0.05); smaller than at 20 tau "
                   f"in {improved}/10 (>= 9); {elapsed:.1f} s (< 120 s)")


def test_criterion_4_energy_descent(verdict):
    aux_rise = ista_rise = pg_rise = 0.0
    for p in crit2_problems():
        for pen in (L1, EXP):
            aux_rise = max(aux_rise, integrate(p, pen, AuxiliaryConfig(lam=0.1)).max_energy_rise)
        ista_rise = max(ista_rise, float(np.max(np.diff(ista_l1(p, 0.1).energies))))
        pg_rise = max(pg_rise, float(np.max(np.diff(prox_grad_nonconvex(p, EXP, 0.1).energies))))
    # iterative energies are compared at round-off level
    ok = aux_rise <= 1e-9 and ista_rise <= 1e-12 and pg_rise <= 1e-12
    verdict(4, ok, f"largest step rise: auxiliary {aux_rise:.3g} (<= 1e-9), "
                   f"ista {ista_rise:.3g}, proxgrad {pg_rise:.3g} (<= 0 up to 1e-12)")


def test_criterion_5_current_bounds(verdict, crit3_runs, crit7_runs):
    runs, cfg3, _ = crit3_runs
    checks = [(p, trace, cfg3) for p, trace, _ in runs]
    spec, problems, traces, _ = crit7_runs
    for label, outs in traces.items():
        checks.extend((p, o.detail, spec.spiking) for p, o in zip(problems, outs))
    bound_viol = isi_viol = 0
    min_isi = np.inf
    for p, trace, cfg in checks:
        bound_viol += trace.bounds_violations(current_bounds(p, cfg))
        isi = trace.raster.min_interval()
        min_isi = min(min_isi, isi / cfg.t_ref)
        isi_viol += isi < cfg.t_ref
    ok = bound_viol == 0 and isi_viol == 0
    verdict(5, ok, f"{len(checks)} runs: {bound_viol} bound violations, {isi_viol} ISI "
                   f"violations (min ISI = {min_isi:.3f} t_ref)")


def test_criterion_6_rule_validator(verdict):
    outcomes = [
        validate_rules(Penalty.exponential(1.0), 0.5).passed,
        not validate_rules(Penalty.exponential(1.0), 2.0).passed,
        not validate_rules(Penalty.logarithmic(1.0), 2.0).passed,
        validate_rules(Penalty.logarithmic(1.0), 0.5).passed,
    ]
    xs = np.linspace(0.01, 10, 500)
    dev = max(check_derivatives(p, xs) for p in (L1, EXP, Penalty.logarithmic(1.0),
                                                 Penalty.arctangent(1.0)))
    ok = all(outcomes) and dev < 1e-6
    verdict(6, ok, f"validator verdicts {outcomes}; max derivative deviation {dev:.3g} (< 1e-6)")


def test_criterion_7_accuracy_ordering(verdict, crit7_runs):
    spec, _, traces, elapsed = crit7_runs
    med = {label: float(np.median([o.nmse for o in outs])) for label, outs in traces.items()}
    # the shared runs must agree with the harness aggregation
    assert med == pytest.approx(run_trials(spec).medians(), abs=1e-12)
    l1 = med["spiking-l1"]
    variants = ["spiking-exp(1)", "spiking-log(1)", "spiking-arctan(1)"]
    ok = (all(med[v] < l1 for v in variants) and min(med, key=med.get) == "spiking-exp(1)"
          and elapsed < 900)
    detail = ", ".join(f"{k} {v:.2f}" for k, v in med.items())
    verdict(7, ok, f"median NMSE dB: {detail}; {elapsed:.1f} s (< 900 s)")


def test_criterion_8_three_neuron_demo(verdict):
    start = time.perf_counter()
    spec = RunConfig.from_dict(DEMO_CONFIG).spec
    med = run_trials(spec).medians()
    elapsed = time.perf_counter() - start
    gap = med["spiking-l1"] - med["spiking-exp(1)"]
    ok = gap >= 5.0 and elapsed < 60
    verdict(8, ok, f"median l1 {med['spiking-l1']:.2f} dB, exp {med['spiking-exp(1)']:.2f} dB, "
                   f"gap {gap:.2f} dB (>= 5); {elapsed:.1f} s (< 60 s)")


def test_criterion_9_cli_determinism(verdict, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"m": 20, "n": 40, "trials": 3, "spiking": {"horizon": 20.0},
                               "methods": [{"solver": "spiking", "penalty": "exp"},
                                           {"solver": "auxiliary", "penalty": "l1"},
                                           {"solver": "ista"}]}))
    first = {
        "solve": ["solve", "--config", str(cfg)],
        "sweep": ["sweep", "--config", str(cfg), "--axis", "snr", "--values", "0:20:10"],
        "demo": ["demo"],
    }
    mismatches = []
    csv_count = 0
    for name, args in first.items():
        a, b = tmp_path / f"{name}-a", tmp_path / f"{name}-b"
        assert main(args + ["--out", str(a)]) == 0
        assert main([name, "--config", str(a / "meta.json"), "--out", str(b)]) == 0
        for f in sorted(a.glob("*.csv")):
            csv_count += 1
            if f.read_bytes() != (b / f.name).read_bytes():
                mismatches.append(f"{name}/{f.name}")
    ok = not mismatches and csv_count > 0
    verdict(9, ok, f"{csv_count} CSV files re-run from meta.json; mismatches: {mismatches or 'none'}")
