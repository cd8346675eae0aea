import math

import numpy as np
import pytest

from assr.auxiliary import output_map
from assr.errors import ConfigError, MetricError
from assr.harness import (ExperimentSpec, Method, convergence_curve, make_problem,
                          run_trials, sweep, time_to_level)
from assr.penalty import Penalty
from assr.problem import Dictionary, nmse, synthesize
from assr.spiking import SpikingConfig

ISTA = Method("ista", Penalty.l1())
AUX_EXP = Method("auxiliary", Penalty.exponential(1.0))
PG_EXP = Method("proxgrad", Penalty.exponential(1.0))


def small_spec(**kw):
    base = dict(m=20, n=40, sparsity=0.1, snr_db=None, lam=0.01, trials=6,
                methods=(ISTA, AUX_EXP))
    base.update(kw)
    return ExperimentSpec(**base)


def test_single_trial_by_hand():
    spec = ExperimentSpec(m=1, n=1, truth=(0.8,), snr_db=None, lam=0.3, trials=1,
                          methods=(ISTA,))
    res = run_trials(spec)
    (rec,) = res.records
    assert rec.method == "ista-l1"
    assert rec.nmse[0] == pytest.approx(10 * math.log10(0.3**2 / 0.8**2), abs=1e-9)
    assert rec.success_probability == 0.0


def test_methods_validated_before_running():
    with pytest.raises(ConfigError):
        run_trials(small_spec(lam=2.0, methods=(AUX_EXP,)))
    with pytest.raises(ConfigError):
        Method("ista", Penalty.exponential(1.0))
    with pytest.raises(ConfigError):
        Method("fista", Penalty.l1())
    with pytest.raises(ConfigError):
        run_trials(small_spec(trials=0))


def test_deterministic_and_schedule_independent():
    spec = small_spec()
    a, b, c = run_trials(spec), run_trials(spec), run_trials(spec, jobs=2)
    assert a.records == b.records == c.records


def test_trials_share_one_problem():
    spec = small_spec(trials=1, methods=(ISTA, Method("proxgrad", Penalty.l1())))
    res = run_trials(spec)
    codes = res.codes
    assert np.allclose(codes["ista-l1"], codes["proxgrad-l1"], atol=1e-8)


def test_seed_streams_are_independent():
    p = make_problem(ExperimentSpec(m=5, n=5, snr_db=10.0, sparsity=0.4), 0)
    noise = p.stimulus - p.dictionary.atoms @ p.truth
    # noise must not be a rescaled dictionary column
    for col in p.dictionary.atoms.T:
        assert abs(abs(col @ noise) / np.linalg.norm(noise) - 1) > 1e-6


def test_sparsity_sweep_success_non_increasing():
    res = sweep(small_spec(trials=8), "sparsity", [0.05, 0.1, 0.2, 0.3, 0.4])
    assert len(res.rows()) == 2 * 5
    for label in ("ista-l1", "auxiliary-exp(1)"):
        p = res.series(label, "success_probability")
        assert np.all((p >= 0) & (p <= 1))
        # one-step slack: any rise is undone by the next value
        assert all(p[k + 1] <= p[k] or (k + 2 < p.size and p[k + 2] <= p[k])
                   for k in range(p.size - 1))
        assert p[0] >= p[-1]


def test_snr_sweep_nmse_improves():
    spec = small_spec(trials=6, lam=0.05)
    res = sweep(spec, "snr", [0.0, 10.0, 20.0, 40.0])
    for label in ("ista-l1", "auxiliary-exp(1)"):
        med = res.series(label, "median_nmse")
        assert all(med[k + 1] <= med[k] + 0.5 for k in range(med.size - 1))
        assert med[-1] < med[0]


def test_square_measurement_recovers():
    spec = small_spec(trials=6, n=30, sparsity=0.15)
    res = sweep(spec, "measurement_ratio", [0.5, 1.0])
    assert res.results[1].spec.m == 30 and res.results[0].spec.m == 15
    for label in ("ista-l1", "auxiliary-exp(1)"):
        assert res.series(label, "success_probability")[-1] == 1.0


def test_sweep_rejects_bad_input():
    with pytest.raises(ConfigError):
        sweep(small_spec(), "noise", [1.0])
    with pytest.raises(ConfigError):
        sweep(small_spec(), "sparsity", [0.2, 0.1, 0.3])


def test_convergence_curve_start_and_flattening(small_problem):
    spk = Method("spiking", Penalty.exponential(1.0))
    spec = ExperimentSpec(m=10, n=20, lam=0.1, methods=(ISTA, AUX_EXP, PG_EXP, spk),
                          spiking=SpikingConfig(tau=1.0, horizon=20.0))
    times = np.linspace(0, 500, 11)
    table = convergence_curve(small_problem, spec.methods, times, spec)
    for label in ("ista-l1", "proxgrad-exp(1)", "spiking-exp(1)"):
        assert table[label][0] == pytest.approx(0.0)
    # the auxiliary system starts from u(0) = b, so a(0) is the thresholded bias
    a0 = output_map(small_problem.bias, Penalty.exponential(1.0), 0.1)
    assert table["auxiliary-exp(1)"][0] == pytest.approx(nmse(a0, small_problem.truth))
    for label in ("ista-l1", "auxiliary-exp(1)", "proxgrad-exp(1)"):
        # the last two samples have flattened out
        assert abs(table[label][-1] - table[label][-2]) < 1e-6


def test_convergence_curve_needs_truth():
    p = synthesize(Dictionary(np.eye(2)), np.zeros(2))
    with pytest.raises(MetricError):
        convergence_curve(p, [ISTA], [0.0])


def test_exp_reaches_levels_no_later_than_l1_on_demo():
    spec = ExperimentSpec(
        m=3, truth=(0.4792, 0.0, 0.9754), snr_db=None, lam=0.05, trials=8,
        methods=(Method("spiking", Penalty.l1()), Method("spiking", Penalty.exponential(1.0))),
        spiking=SpikingConfig(tau=1.0, t_ref=0.01, dt=0.001, horizon=300.0)).resolved()
    times = np.linspace(0, 300, 301)
    levels = [-5.0, -10.0, -15.0]
    hits = {lab: [] for lab in ("spiking-l1", "spiking-exp(1)")}
    for t in range(spec.trials):
        table = convergence_curve(make_problem(spec, t), spec.methods, times, spec)
        for lab in hits:
            hits[lab].append([time_to_level(times, table[lab], lv) for lv in levels])
    med = {lab: np.median(np.array(v), axis=0) for lab, v in hits.items()}
    assert np.all(med["spiking-exp(1)"] <= med["spiking-l1"])


def test_spec_digest_changes_with_content():
    assert small_spec().digest() == small_spec().digest()
    assert small_spec().digest() != small_spec(lam=0.02).digest()
