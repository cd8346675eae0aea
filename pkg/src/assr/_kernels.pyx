# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same signatures and semantics as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, log, atan, fabs, INFINITY, NAN

cnp.import_array()

cdef enum:
    ROOT_MAX_ITER = 200

cdef double ROOT_RTOL = 1e-13

STATUS_CONVERGED = 0
STATUS_HORIZON = 1
STATUS_ENERGY_INCREASE = 2
STATUS_ROOT_FAILURE = 3


cdef inline double _gp(double x, int kind, double p) nogil:
    if kind == 0:
        return 1.0
    elif kind == 1:
        return p * exp(-p * x)
    elif kind == 2:
        return 1.0 / (x + p)
    return p / (p * p + x * x)


cdef inline double _gpp(double x, int kind, double p) nogil:
    cdef double d
    if kind == 0:
        return 0.0
    elif kind == 1:
        return -p * p * exp(-p * x)
    elif kind == 2:
        return -1.0 / ((x + p) * (x + p))
    d = p * p + x * x
    return -2.0 * p * x / (d * d)


cdef inline double _g(double x, int kind, double p) nogil:
    if kind == 0:
        return x
    elif kind == 1:
        return -expm1(-p * x)
    elif kind == 2:
        return log(x + p)
    return atan(x / p)


cdef inline double _gp0(int kind, double p) nogil:
    if kind == 0:
        return 1.0
    elif kind == 1:
        return p
    return 1.0 / p


cdef inline double _shrink1(double z, double c, int kind, double p, int* ok) nogil:
    cdef double lo, hi, x, h, dh, xn, scale
    cdef int it
    if z <= c * _gp0(kind, p):
        return 0.0
    if kind == 0:
        return z - c
    lo = 0.0
    hi = z
    x = z - c * _gp(z, kind, p)
    if not (x > 0.0 and x <= hi):
        x = 0.5 * hi
    for it in range(ROOT_MAX_ITER):
        h = x + c * _gp(x, kind, p) - z
        if h == 0.0:
            return x
        if h > 0.0:
            hi = x
        else:
            lo = x
        dh = 1.0 + c * _gpp(x, kind, p)
        if dh > 0.0:
            xn = x - h / dh
        else:
            xn = NAN
        if not (dh > 0.0 and xn > lo and xn < hi):
            xn = 0.5 * (lo + hi)
        scale = x if x > 1.0 else 1.0
        if fabs(xn - x) <= ROOT_RTOL * scale:
            return xn
        x = xn
    ok[0] = 0
    return x


def shrink(z, double c, int kind, double param):
    """Solve x + c g'(x) = z for x > 0 (0 when z <= c g'(0)); returns (x, ok)."""
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64).ravel()
    out = np.empty(zv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef int ok = 1
    cdef Py_ssize_t i
    for i in range(zv.shape[0]):
        ov[i] = _shrink1(zv[i], c, kind, param, &ok)
    return out.reshape(np.shape(z)), bool(ok)


def spiking_steps(const double[::1] b, const double[:, ::1] omega, double lam,
                  int kind, double param, double decay, double gain, double dt,
                  double inv_tau, long ref_steps, long n_steps, long sample_every,
                  long step0, double[::1] mu, double[::1] nu, long[::1] ref,
                  long[::1] counts, double[::1] mu_int):
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, j, k, k2
    cdef long step, n_fired
    cdef double t_prev, t, rate, leak, dev, charge, v, uu
    cdef double mu_lo = INFINITY, mu_hi = -INFINITY, u_lo = INFINITY, u_hi = -INFINITY

    cdef Py_ssize_t cap = 1024, n_spk = 0
    spk_step = np.empty(cap, dtype=np.int64)
    spk_neur = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] ss = spk_step
    cdef cnp.int64_t[::1] sn = spk_neur

    cdef Py_ssize_t n_samp = 0, s = 0
    if sample_every > 0:
        n_samp = (step0 + n_steps) // sample_every - step0 // sample_every
    samp = np.empty(n_samp, dtype=np.int64)
    s_rates = np.empty((n_samp, n), dtype=np.float64)
    s_u = np.empty((n_samp, n), dtype=np.float64)
    s_mu = np.empty((n_samp, n), dtype=np.float64)
    s_nu = np.empty((n_samp, n), dtype=np.float64)
    cdef cnp.int64_t[::1] sv = samp
    cdef double[:, ::1] srv = s_rates
    cdef double[:, ::1] suv = s_u
    cdef double[:, ::1] smv = s_mu
    cdef double[:, ::1] snv = s_nu

    fired_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] fired = fired_arr

    for k in range(n_steps):
        step = step0 + k
        t_prev = step * dt
        n_fired = 0
        for i in range(n):
            if step > 0:
                rate = counts[i] / t_prev
            else:
                rate = 0.0
            leak = lam * _gp(rate, kind, param)
            dev = mu[i] - b[i]
            charge = b[i] * dt + dev * gain
            mu[i] = b[i] + dev * decay
            mu_int[i] += charge
            if ref[i] == 0:
                v = nu[i] + charge - dt * leak
                if v < 0.0:
                    v = 0.0
                nu[i] = v
            else:
                ref[i] -= 1
            if nu[i] >= 1.0:
                fired[n_fired] = i
                n_fired += 1
        for k2 in range(n_fired):
            j = fired[k2]
            nu[j] = 0.0
            ref[j] = ref_steps
            counts[j] += 1
            if n_spk == cap:
                cap *= 2
                spk_step = np.resize(spk_step, cap)
                spk_neur = np.resize(spk_neur, cap)
                ss = spk_step
                sn = spk_neur
            ss[n_spk] = step + 1
            sn[n_spk] = j
            n_spk += 1
            for i in range(n):
                mu[i] -= omega[j, i] * inv_tau

        t = (step + 1) * dt
        for i in range(n):
            uu = mu_int[i] / t
            if mu[i] < mu_lo:
                mu_lo = mu[i]
            if mu[i] > mu_hi:
                mu_hi = mu[i]
            if uu < u_lo:
                u_lo = uu
            if uu > u_hi:
                u_hi = uu
        if sample_every > 0 and (step + 1) % sample_every == 0:
            sv[s] = step + 1
            for i in range(n):
                srv[s, i] = counts[i] / t
                suv[s, i] = mu_int[i] / t
                smv[s, i] = mu[i]
                snv[s, i] = nu[i]
            s += 1

    return (spk_step[:n_spk].copy(), spk_neur[:n_spk].copy(), samp, s_rates,
            s_u, s_mu, s_nu, np.array([mu_lo, mu_hi, u_lo, u_hi]))


def auxiliary_steps(const double[::1] b, const double[:, ::1] omega,
                    const double[::1] gdiag, double half_s2, double lam, int kind,
                    double param, double h, long max_steps, long sample_every,
                    double stop_tol, double energy_tol, double[::1] u):
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, j
    cdef long step = 0
    cdef int ok = 1
    cdef int status = STATUS_HORIZON
    cdef double energy = 0.0, e_prev = INFINITY, rise = -INFINITY
    cdef double acc, quad, pen, lin, dmax, d

    a_arr = np.empty(n, dtype=np.float64)
    w_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] a = a_arr
    cdef double[::1] w = w_arr
    for i in range(n):
        a[i] = _shrink1(u[i], lam, kind, param, &ok)
    if not ok:
        return (0, STATUS_ROOT_FAILURE, np.zeros(0, np.int64), np.zeros((0, n)),
                np.zeros((0, n)), np.zeros(0), a_arr, 0.0)

    samples = []
    s_u = []
    s_a = []
    s_e = []
    while True:
        lin = 0.0
        quad = 0.0
        pen = 0.0
        for i in range(n):
            w[i] = 0.0
        # omega is symmetric; walk only the active columns
        for j in range(n):
            if a[j] != 0.0:
                acc = a[j]
                for i in range(n):
                    w[i] += omega[j, i] * acc
        for i in range(n):
            lin += b[i] * a[i]
            quad += gdiag[i] * a[i] * a[i] + a[i] * w[i]
            pen += _g(a[i], kind, param)
        energy = half_s2 - lin + 0.5 * quad + lam * pen
        if step > 0 and energy - e_prev > rise:
            rise = energy - e_prev
        if sample_every > 0 and step % sample_every == 0:
            samples.append(step)
            s_u.append(np.asarray(u).copy())
            s_a.append(a_arr.copy())
            s_e.append(energy)
        if energy > e_prev + energy_tol:
            status = STATUS_ENERGY_INCREASE
            break
        e_prev = energy
        dmax = 0.0
        for i in range(n):
            d = b[i] - u[i] - w[i]
            w[i] = d
            if fabs(d) > dmax:
                dmax = fabs(d)
        if dmax < stop_tol:
            status = STATUS_CONVERGED
            break
        if step >= max_steps:
            break
        for i in range(n):
            u[i] += h * w[i]
            a[i] = _shrink1(u[i], lam, kind, param, &ok)
        step += 1
        if not ok:
            status = STATUS_ROOT_FAILURE
            break
    if not samples or samples[len(samples) - 1] != step:
        samples.append(step)
        s_u.append(np.asarray(u).copy())
        s_a.append(a_arr.copy())
        s_e.append(energy if status != STATUS_ROOT_FAILURE else NAN)
    if step == 0:
        rise = 0.0
    elif rise < 0.0:
        rise = 0.0
    return (step, status, np.array(samples, dtype=np.int64),
            np.array(s_u).reshape(-1, n), np.array(s_a).reshape(-1, n),
            np.array(s_e, dtype=np.float64), a_arr, rise)
