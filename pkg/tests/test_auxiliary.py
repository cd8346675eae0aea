import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from assr import _kernels_py
from assr._backend import BACKEND, kernels
from assr.auxiliary import (AuxiliaryConfig, AuxiliaryState, case_split_residual, energy,
                            integrate, output_map)
from assr.errors import ConfigError, DomainError, NumericalError
from assr.oracle import kkt_residual
from assr.penalty import Penalty

EXP = Penalty.exponential(1.0)

# roots frozen from an independent 200-step bisection
FROZEN_ROOTS = [
    (Penalty.exponential(1.0), 0.5, 1.0, 0.7680390470134657),
    (Penalty.logarithmic(1.0), 0.5, 2.0, (1 + math.sqrt(7)) / 2),
    (Penalty.arctangent(1.0), 0.5, 1.0, 0.6477988712610425),
]


@pytest.mark.parametrize("pen,lam,u,root", FROZEN_ROOTS, ids=lambda v: str(v))
def test_output_map_frozen_roots(pen, lam, u, root):
    assert output_map(u, pen, lam) == pytest.approx(root, rel=1e-12)


def test_output_map_below_threshold_is_zero():
    # u <= lam g'(0): inactive
    assert output_map(0.3, EXP, 0.3) == 0.0
    assert output_map(np.array([-1.0, 0.0, 0.2]), Penalty.logarithmic(1.0), 0.5).tolist() == [0, 0, 0]


@pytest.mark.parametrize("lam", [0.1, 0.3, 1.0])
def test_l1_is_soft_threshold(lam):
    u = np.linspace(0, 5, 1000)
    assert np.max(np.abs(output_map(u, Penalty.l1(), lam) - np.maximum(u - lam, 0))) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["exp", "log", "arctan"]), st.floats(0.5, 3), st.floats(0.01, 0.4),
       st.floats(0, 20))
def test_output_map_solves_fixed_point(kind, param, lam, u):
    pen = Penalty(kind, param)
    a = output_map(u, pen, lam)
    assert a >= 0
    if a > 0:
        assert a + lam * pen.g_prime(a) == pytest.approx(u, rel=1e-11, abs=1e-12)
    else:
        assert u <= lam * pen.g_prime(0.0) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([0, 1, 2, 3]), st.floats(-2, 20), st.floats(0.01, 0.5))
def test_backends_agree_on_shrink(kind, z, c):
    x_c, ok_c = kernels.shrink(np.array([z]), c, kind, 1.0)
    x_p, ok_p = _kernels_py.shrink(np.array([z]), c, kind, 1.0)
    assert ok_c and ok_p
    assert x_c[0] == pytest.approx(x_p[0], rel=1e-12, abs=1e-14)


def test_energy_and_domain(small_problem):
    a = np.zeros(small_problem.n)
    e = energy(a, small_problem, EXP, 0.1)
    assert e.total == pytest.approx(small_problem.half_signal_energy)
    with pytest.raises(DomainError):
        energy(-a - 1, small_problem, EXP, 0.1)


def test_config_defaults_and_limits():
    cfg = AuxiliaryConfig(tau=2.0).resolved()
    assert cfg.dt == pytest.approx(0.02) and cfg.horizon == pytest.approx(2000)
    with pytest.raises(ConfigError):
        AuxiliaryConfig(tau=1.0, dt=0.05).resolved()
    with pytest.raises(ConfigError):
        AuxiliaryConfig(lam=0.0).resolved()


def test_horizon_zero_returns_initial_state(small_problem):
    traj = integrate(small_problem, EXP, AuxiliaryConfig(lam=0.1, horizon=0.0))
    assert traj.steps == 0
    assert np.array_equal(traj.final.u, small_problem.bias)
    assert np.allclose(traj.final.a, output_map(small_problem.bias, EXP, 0.1))


@pytest.mark.parametrize("pen", [Penalty.l1(), EXP, Penalty.logarithmic(1.0),
                                 Penalty.arctangent(1.0)], ids=str)
def test_converges_to_critical_point(small_problem, pen):
    traj = integrate(small_problem, pen, AuxiliaryConfig(lam=0.1))
    assert traj.converged
    assert kkt_residual(traj.final.a, small_problem, pen, 0.1) < 1e-8
    assert case_split_residual(traj.final, pen, 0.1) < 1e-12
    assert np.all(np.diff(traj.energy) <= 1e-9)
    assert traj.max_energy_rise <= 1e-9


def test_inadmissible_penalty_rejected(small_problem):
    with pytest.raises(ConfigError):
        integrate(small_problem, EXP, AuxiliaryConfig(lam=2.0))


def test_energy_rise_raises(small_problem, monkeypatch):
    # a negative tolerance makes any non-decrease count as a rise
    with pytest.raises(NumericalError):
        integrate(small_problem, EXP, AuxiliaryConfig(lam=0.1, energy_tol=-1.0))


def test_backends_agree_on_trajectory(small_problem):
    cfg = AuxiliaryConfig(lam=0.1, horizon=20.0).resolved()
    args = (np.ascontiguousarray(small_problem.bias), np.ascontiguousarray(small_problem.lateral),
            np.ascontiguousarray(np.diag(small_problem.gram)), small_problem.half_signal_energy,
            0.1, EXP.code, EXP.kernel_param, cfg.dt / cfg.tau, 2000, 100, 1e-10, 1e-9)
    out_c = kernels.auxiliary_steps(*args, small_problem.bias.copy())
    out_p = _kernels_py.auxiliary_steps(*args, small_problem.bias.copy())
    assert out_c[0] == out_p[0] and out_c[1] == out_p[1]
    assert np.allclose(out_c[3], out_p[3], rtol=1e-10, atol=1e-12)
    assert np.allclose(out_c[6], out_p[6], rtol=1e-10, atol=1e-12)


def test_case_split_flags_bad_state():
    st_ = AuxiliaryState(np.array([1.0, 0.5]), np.array([0.0, 0.4]), 0.0)
    assert case_split_residual(st_, Penalty.l1(), 0.1) == pytest.approx(0.9)


def test_backend_name():
    assert BACKEND in {"cython", "python"}
