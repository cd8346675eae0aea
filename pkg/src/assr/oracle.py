"""Classical iterative solvers and optimality residuals, used as references."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._backend import kernels
from .auxiliary import EnergyValue, energy
from .errors import ConfigError, DomainError, NumericalError
from .penalty import Penalty, g, g_prime, validate_rules
from .problem import Problem


@dataclass(frozen=True, eq=False)
class SolverResult:
    a: np.ndarray
    iterations: int
    final_energy: EnergyValue
    kkt: float
    converged: bool
    energies: np.ndarray = field(repr=False)
    path: Optional[np.ndarray] = field(default=None, repr=False)
    path_iterations: Optional[np.ndarray] = field(default=None, repr=False)


def lipschitz_constant(gram, iters: int = 100) -> float:
    """Largest eigenvalue of the Gram matrix by power iteration."""
    gram = np.asarray(gram, dtype=float)
    v = np.ones(gram.shape[0]) / math.sqrt(gram.shape[0])
    lam_max = 0.0
    for _ in range(iters):
        w = gram @ v
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        lam_max = float(v @ (gram @ v))
    return lam_max


def default_step(problem: Problem) -> float:
    return 0.9 / lipschitz_constant(problem.gram)


def kkt_residual(a, problem: Problem, penalty: Penalty, lam: float) -> float:
    """Stationarity violation of ``a`` on the non-negative orthant.

    With r = G a - b: active coordinates need r_i + lam g'(a_i) = 0, inactive
    ones need r_i + lam g'(0) >= 0.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("kkt residual needs a >= 0")
    r = problem.gram @ a - problem.bias
    act = a > 0
    res = np.empty_like(a)
    res[act] = np.abs(r[act] + lam * g_prime(penalty, a[act]))
    res[~act] = np.maximum(0.0, -r[~act] - lam * g_prime(penalty, 0.0))
    return float(res.max(initial=0.0))


def _check_step(problem: Problem, step_size):
    if step_size is None:
        return default_step(problem)
    lmax = lipschitz_constant(problem.gram)
    if not (0 < step_size <= 1.0 / lmax * (1 + 1e-9)):
        raise ConfigError(f"step size must lie in (0, 1/L], L={lmax:.6g}")
    return float(step_size)


def _run(problem, penalty, lam, step, max_iters, tol, update, keep_path, path_every):
    if path_every < 1:
        raise ConfigError("path_every must be >= 1")
    a = np.zeros(problem.n)
    energies = [energy(a, problem, penalty, lam).total]
    path = [a.copy()] if keep_path else None
    path_its = [0]
    converged = False
    it = 0
    best, best_e = a, energies[0]
    for it in range(1, max_iters + 1):
        z = a - step * (problem.gram @ a - problem.bias)
        a_new = update(z)
        e = energy(a_new, problem, penalty, lam).total
        delta = float(np.max(np.abs(a_new - a), initial=0.0))
        a = a_new
        energies.append(e)
        if keep_path and it % path_every == 0:
            path.append(a.copy())
            path_its.append(it)
        if e <= best_e:
            best, best_e = a, e
        if delta < tol:
            converged = True
            break
    if not converged:
        a = best
    if keep_path and path_its[-1] != it:
        path.append(a.copy())
        path_its.append(it)
    return SolverResult(
        a=a,
        iterations=it,
        final_energy=energy(a, problem, penalty, lam),
        kkt=kkt_residual(a, problem, penalty, lam),
        converged=converged,
        energies=np.array(energies),
        path=None if path is None else np.array(path),
        path_iterations=None if path is None else np.array(path_its),
    )


def ista_l1(problem: Problem, lam: float, step_size: Optional[float] = None,
            max_iters: int = 100_000, tol: float = 1e-12, keep_path: bool = False,
            path_every: int = 1) -> SolverResult:
    """Non-negative ISTA for min_{a>=0} 1/2||s - Phi a||^2 + lam ||a||_1.

    If ``max_iters`` runs out the lowest-energy iterate is returned with
    ``converged=False``. With ``keep_path`` every ``path_every``-th iterate
    (and the last) is kept, with its index in ``path_iterations``.
    """
    if lam <= 0:
        raise ConfigError("lambda must be positive")
    step = _check_step(problem, step_size)
    thr = step * lam
    return _run(problem, Penalty.l1(), lam, step, max_iters, tol,
                lambda z: np.maximum(z - thr, 0.0), keep_path, path_every)


def prox_nonneg(z, c: float, penalty: Penalty):
    """argmin_{x >= 0} 1/2 (x - z)^2 + c g(x), coordinate-wise.

    The stationary root is compared against x = 0 explicitly so a concave
    penalty cannot pull the iterate onto the wrong branch.
    """
    z = np.asarray(z, dtype=float)
    x, ok = kernels.shrink(z, float(c), penalty.code, penalty.kernel_param)
    if not ok:
        raise NumericalError("proximal root solve did not converge")
    if penalty.is_baseline:
        return x
    act = x > 0
    if np.any(act):
        za, xa = z[act], x[act]
        phi_x = 0.5 * (xa - za) ** 2 + c * g(penalty, xa)
        phi_0 = 0.5 * za**2 + c * g(penalty, 0.0)
        x[act] = np.where(phi_x <= phi_0, xa, 0.0)
    return x


def prox_grad_nonconvex(problem: Problem, penalty: Penalty, lam: float,
                        step_size: Optional[float] = None, max_iters: int = 100_000,
                        tol: float = 1e-12, keep_path: bool = False,
                        path_every: int = 1) -> SolverResult:
    """Proximal gradient for min_{a>=0} 1/2||s - Phi a||^2 + lam sum g(a_i)."""
    if lam <= 0:
        raise ConfigError("lambda must be positive")
    report = validate_rules(penalty, lam)
    if not report.usable:
        raise ConfigError(report.summary())
    step = _check_step(problem, step_size)
    c = step * lam
    return _run(problem, penalty, lam, step, max_iters, tol,
                lambda z: prox_nonneg(z, c, penalty), keep_path, path_every)
