"""Continuous auxiliary dynamics and the energy they descend.

    tau du/dt = b - u - Omega a,    a_i = max(u_i - lam g'(a_i), 0)

The output map is implicit in ``a``; it is solved per coordinate by a
bracketed Newton iteration (see :func:`output_map`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from ._backend import kernels
from .errors import ConfigError, DomainError, NumericalError
from .penalty import Penalty, g, validate_rules
from .problem import Problem

STOP_TOL = 1e-10
ENERGY_TOL = 1e-9


@dataclass(frozen=True)
class EnergyValue:
    data_term: float
    penalty_term: float

    @property
    def total(self) -> float:
        return self.data_term + self.penalty_term


def energy(a, problem: Problem, penalty: Penalty, lam: float) -> EnergyValue:
    """E(a) = 1/2 ||s - Phi a||^2 + lam sum g(a_i), for a >= 0."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("energy is defined on the non-negative orthant only")
    r = problem.stimulus - problem.dictionary.atoms @ a
    return EnergyValue(0.5 * float(r @ r), lam * float(np.sum(g(penalty, a))))


def energy_path(codes, problem: Problem, penalty: Penalty, lam: float) -> np.ndarray:
    """Total energy for each row of ``codes``."""
    codes = np.atleast_2d(np.asarray(codes, dtype=float))
    r = problem.stimulus[None, :] - codes @ problem.dictionary.atoms.T
    return 0.5 * np.sum(r * r, axis=1) + lam * np.sum(g(penalty, codes), axis=1)


def output_map(u, penalty: Penalty, lam: float):
    """Non-negative solution a of a = max(u - lam g'(a), 0).

    Returns 0 whenever u <= lam g'(0). Otherwise the root of
    a + lam g'(a) = u on (0, u], unique when lam sup|g''| < 1.
    """
    scalar = np.ndim(u) == 0
    x, ok = kernels.shrink(np.atleast_1d(np.asarray(u, dtype=float)), float(lam),
                           penalty.code, penalty.kernel_param)
    if not ok:
        raise NumericalError("output map root solve did not converge in 200 iterations")
    return float(x[0]) if scalar else x


@dataclass(frozen=True)
class AuxiliaryConfig:
    """Integration settings. ``dt``, ``horizon`` default to tau/100, 1000 tau."""

    tau: float = 1.0
    lam: float = 0.1
    dt: Optional[float] = None
    horizon: Optional[float] = None
    sample_every: int = 100
    stop_tol: float = STOP_TOL
    energy_tol: float = ENERGY_TOL

    def resolved(self) -> "AuxiliaryConfig":
        dt = self.tau / 100 if self.dt is None else self.dt
        horizon = 1000 * self.tau if self.horizon is None else self.horizon
        cfg = AuxiliaryConfig(self.tau, self.lam, dt, horizon, self.sample_every,
                              self.stop_tol, self.energy_tol)
        cfg.validate()
        return cfg

    def validate(self):
        if not (self.tau > 0 and self.lam > 0):
            raise ConfigError("tau and lambda must be positive")
        if self.dt is not None and not (0 < self.dt <= self.tau / 100 * (1 + 1e-12)):
            raise ConfigError("auxiliary dt must lie in (0, tau/100]")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError("horizon must be non-negative")
        if self.sample_every < 0:
            raise ConfigError("sample_every must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class AuxiliaryState:
    u: np.ndarray
    a: np.ndarray
    time: float


@dataclass(frozen=True, eq=False)
class AuxiliaryTrajectory:
    """Samples of the auxiliary system plus its end state.

    ``energy`` holds E(a) at each sample time. ``converged`` is True when the
    stop criterion ||tau du/dt||_inf < stop_tol was met before the horizon.
    """

    times: np.ndarray
    u: np.ndarray
    a: np.ndarray
    energy: np.ndarray
    final: AuxiliaryState
    steps: int
    converged: bool
    max_energy_rise: float
    config: AuxiliaryConfig

    def state(self, k: int) -> AuxiliaryState:
        return AuxiliaryState(self.u[k], self.a[k], float(self.times[k]))


def integrate(problem: Problem, penalty: Penalty, config: AuxiliaryConfig = AuxiliaryConfig()
              ) -> AuxiliaryTrajectory:
    """Forward-Euler run of the auxiliary system from u(0) = b.

    Raises :class:`NumericalError` if E(a) rises by more than
    ``config.energy_tol`` between consecutive steps.
    """
    cfg = config.resolved()
    report = validate_rules(penalty, cfg.lam)
    if not report.usable:
        raise ConfigError(report.summary())
    u = np.array(problem.bias, dtype=float)
    max_steps = int(math.ceil(cfg.horizon / cfg.dt - 1e-9))
    out = kernels.auxiliary_steps(
        np.ascontiguousarray(problem.bias), np.ascontiguousarray(problem.lateral),
        np.ascontiguousarray(np.diag(problem.gram)), problem.half_signal_energy,
        float(cfg.lam), penalty.code, penalty.kernel_param, cfg.dt / cfg.tau,
        max_steps, int(cfg.sample_every), float(cfg.stop_tol), float(cfg.energy_tol), u)
    steps, status, samples, s_u, s_a, s_e, a_final, rise = out
    if status == kernels.STATUS_ENERGY_INCREASE:
        raise NumericalError(
            f"energy rose by more than {cfg.energy_tol:g} at step {steps}; "
            "dt too large or penalty violates the admissibility rules")
    if status == kernels.STATUS_ROOT_FAILURE:
        raise NumericalError(f"output map root solve failed at step {steps}")
    return AuxiliaryTrajectory(
        times=samples * cfg.dt,
        u=s_u,
        a=s_a,
        energy=s_e,
        final=AuxiliaryState(u, np.asarray(a_final), steps * cfg.dt),
        steps=int(steps),
        converged=status == kernels.STATUS_CONVERGED,
        max_energy_rise=float(rise),
        config=cfg,
    )


def case_split_residual(state: AuxiliaryState, penalty: Penalty, lam: float) -> float:
    """Largest violation of the output-map case split at ``state``.

    Active coordinates need a = u - lam g'(a); inactive ones need u <= lam g'(0).
    """
    a, u = np.asarray(state.a), np.asarray(state.u)
    if np.any(a < 0):
        return math.inf
    act = a > 0
    res = 0.0
    if np.any(act):
        res = float(np.max(np.abs(a[act] - (u[act] - lam * penalty.g_prime(a[act])))))
    if np.any(~act):
        res = max(res, float(np.max(u[~act] - lam * penalty.g_prime(0.0), initial=0.0)))
    return res
