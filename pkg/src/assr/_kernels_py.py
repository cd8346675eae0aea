"""Pure numpy kernels. Reference semantics for ``_kernels.pyx``.

Penalty kinds are passed as integer codes (0 l1, 1 exp, 2 log, 3 arctan) so
that both backends share one calling convention. Every function that takes
state arrays updates them in place.
"""

import math

import numpy as np

STATUS_CONVERGED = 0
STATUS_HORIZON = 1
STATUS_ENERGY_INCREASE = 2
STATUS_ROOT_FAILURE = 3

ROOT_MAX_ITER = 200
ROOT_RTOL = 1e-13


def gprime(x, kind, param):
    if kind == 0:
        return np.ones_like(x)
    if kind == 1:
        return param * np.exp(-param * x)
    if kind == 2:
        return 1.0 / (x + param)
    return param / (param * param + x * x)


def gsecond(x, kind, param):
    if kind == 0:
        return np.zeros_like(x)
    if kind == 1:
        return -param * param * np.exp(-param * x)
    if kind == 2:
        return -1.0 / ((x + param) * (x + param))
    d = param * param + x * x
    return -2.0 * param * x / (d * d)


def gvalue(x, kind, param):
    if kind == 0:
        return x.copy()
    if kind == 1:
        return -np.expm1(-param * x)
    if kind == 2:
        return np.log(x + param)
    return np.arctan(x / param)


def gprime0(kind, param):
    if kind == 0:
        return 1.0
    if kind == 1:
        return param
    if kind == 2:
        return 1.0 / param
    return 1.0 / param


def shrink(z, c, kind, param):
    """Solve x + c g'(x) = z for x > 0, or return 0 when z <= c g'(0).

    Vectorised safeguarded Newton. The root is bracketed by (0, z]. Returns
    ``(x, ok)`` where ``ok`` is False if any coordinate failed to converge.
    """
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    active = z > c * gprime0(kind, param)
    if not np.any(active):
        return out, True
    if kind == 0:
        out[active] = z[active] - c
        return out, True
    zz = z[active]
    lo = np.zeros_like(zz)
    hi = zz.copy()
    # x* <= z - c g'(z) because g' is non-increasing; a tight start
    x = zz - c * gprime(zz, kind, param)
    x = np.where((x > 0) & (x <= hi), x, 0.5 * hi)
    todo = np.ones(zz.shape, dtype=bool)
    for _ in range(ROOT_MAX_ITER):
        idx = np.flatnonzero(todo)
        if idx.size == 0:
            break
        xi = x[idx]
        h = xi + c * gprime(xi, kind, param) - zz[idx]
        hi[idx] = np.where(h > 0, xi, hi[idx])
        lo[idx] = np.where(h < 0, xi, lo[idx])
        dh = 1.0 + c * gsecond(xi, kind, param)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xi - h / dh
        bad = ~((dh > 0) & (xn > lo[idx]) & (xn < hi[idx]))
        xn = np.where(bad, 0.5 * (lo[idx] + hi[idx]), xn)
        done = (h == 0) | (np.abs(xn - xi) <= ROOT_RTOL * np.maximum(1.0, xi))
        xn = np.where(h == 0, xi, xn)
        x[idx] = xn
        todo[idx[done]] = False
    out[active] = x
    return out, not np.any(todo)


def spiking_steps(b, omega, lam, kind, param, decay, gain, dt, inv_tau,
                  ref_steps, n_steps, sample_every, step0,
                  mu, nu, ref, counts, mu_int):
    """Advance the integrate-and-fire network by ``n_steps`` clock ticks.

    State arrays (``mu``, ``nu``, ``ref``, ``counts``, ``mu_int``) are
    updated in place; ``step0`` is the number of ticks already taken.
    ``decay`` is exp(-dt/tau) and ``gain`` is tau (1 - decay), the integral
    of a unit current deviation over one tick.

    Returns ``(spike_steps, spike_neurons, sample_steps, rates, u, mu, nu,
    extrema)`` where ``extrema`` is ``[min mu, max mu, min u, max u]`` over
    every completed tick.
    """
    n = b.shape[0]
    spike_steps = []
    spike_neurons = []
    samples = []
    s_rates, s_u, s_mu, s_nu = [], [], [], []
    ext = [math.inf, -math.inf, math.inf, -math.inf]
    for k in range(n_steps):
        step = step0 + k
        t_prev = step * dt
        rates = counts / t_prev if step > 0 else np.zeros(n)
        leak = lam * gprime(rates, kind, param)

        dev = mu - b
        charge = b * dt + dev * gain
        mu[:] = b + dev * decay
        mu_int += charge

        free = ref == 0
        ref[~free] -= 1
        nu[free] = np.maximum(nu[free] + charge[free] - dt * leak[free], 0.0)

        fired = np.flatnonzero(nu >= 1.0)
        if fired.size:
            nu[fired] = 0.0
            ref[fired] = ref_steps
            counts[fired] += 1
            for j in fired:
                spike_steps.append(step + 1)
                spike_neurons.append(int(j))
                mu -= omega[j] * inv_tau

        t = (step + 1) * dt
        u = mu_int / t
        ext[0] = min(ext[0], float(mu.min()))
        ext[1] = max(ext[1], float(mu.max()))
        ext[2] = min(ext[2], float(u.min()))
        ext[3] = max(ext[3], float(u.max()))
        if sample_every > 0 and (step + 1) % sample_every == 0:
            samples.append(step + 1)
            s_rates.append(counts / t)
            s_u.append(u)
            s_mu.append(mu.copy())
            s_nu.append(nu.copy())

    def stack(rows):
        return np.array(rows, dtype=float).reshape(len(rows), n)

    return (
        np.array(spike_steps, dtype=np.int64),
        np.array(spike_neurons, dtype=np.int64),
        np.array(samples, dtype=np.int64),
        stack(s_rates), stack(s_u), stack(s_mu), stack(s_nu),
        np.array(ext, dtype=float),
    )


def auxiliary_steps(b, omega, gdiag, half_s2, lam, kind, param, h, max_steps,
                    sample_every, stop_tol, energy_tol, u):
    """Forward-Euler integration of the auxiliary system.

    ``h`` is dt/tau. ``u`` is updated in place. Integration stops when
    ``max |b - u - omega a| < stop_tol`` (that is ``tau |du/dt|``), after
    ``max_steps`` ticks, on an energy increase above ``energy_tol`` or on a
    root-solve failure.

    Returns ``(steps, status, sample_steps, u, a, energy, a_final,
    max_energy_rise)``.
    """
    n = b.shape[0]
    a, ok = shrink(u, lam, kind, param)
    if not ok:
        return (0, STATUS_ROOT_FAILURE, np.zeros(0, np.int64), np.zeros((0, n)),
                np.zeros((0, n)), np.zeros(0), a, 0.0)
    samples, s_u, s_a, s_e = [], [], [], []
    e_prev = math.inf
    rise = -math.inf
    status = STATUS_HORIZON
    step = 0
    while True:
        w = omega @ a
        energy = (half_s2 - b @ a + 0.5 * (gdiag @ (a * a) + a @ w)
                  + lam * np.sum(gvalue(a, kind, param)))
        if step > 0:
            rise = max(rise, energy - e_prev)
        if sample_every > 0 and step % sample_every == 0:
            samples.append(step)
            s_u.append(u.copy())
            s_a.append(a.copy())
            s_e.append(energy)
        if energy > e_prev + energy_tol:
            status = STATUS_ENERGY_INCREASE
            break
        e_prev = energy
        du = b - u - w
        if np.max(np.abs(du), initial=0.0) < stop_tol:
            status = STATUS_CONVERGED
            break
        if step >= max_steps:
            break
        u += h * du
        a, ok = shrink(u, lam, kind, param)
        step += 1
        if not ok:
            status = STATUS_ROOT_FAILURE
            break
    if not samples or samples[-1] != step:
        samples.append(step)
        s_u.append(u.copy())
        s_a.append(a.copy())
        s_e.append(energy if status != STATUS_ROOT_FAILURE else math.nan)
    return (step, status, np.array(samples, dtype=np.int64),
            np.array(s_u).reshape(-1, n), np.array(s_a).reshape(-1, n),
            np.array(s_e, dtype=float), a, max(rise, 0.0) if step > 0 else 0.0)
