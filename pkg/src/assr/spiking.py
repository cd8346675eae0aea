"""Clock-driven simulation of the adaptive integrate-and-fire network.

Each neuron i carries a soma current mu_i, a potential nu_i, a spike count
and a refractory counter. One tick of length dt does, in order:

1. mu_i relaxes exactly toward b_i (factor exp(-dt/tau)); the exact integral
   of mu_i over the tick is the charge delivered in that tick.
2. The leak lam g'(a_i) is evaluated at the current firing rate a_i.
3. Non-refractory neurons integrate charge minus leak; the potential is
   floored at 0.
4. Neurons at or above threshold 1 fire, reset to 0 and become refractory.
5. Every spike of neuron j kicks mu_i by -Omega_ij / tau for all i != j.
   Threshold tests use pre-kick potentials, so same-tick spikes are
   order independent.
6. Rates a_i = count_i / t and average currents u_i = (1/t) int mu_i.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, asdict, field
from typing import List, Optional, Tuple

import numpy as np

from ._backend import kernels
from .auxiliary import energy_path
from .errors import ConfigError, NumericalError
from .penalty import Penalty, validate_rules
from .problem import Problem, nmse

NU_SPIKE = 1.0
NU_REST = 0.0
NU_FLOOR = 0.0


@dataclass(frozen=True)
class SpikingConfig:
    """Network constants. ``None`` fields take defaults relative to ``tau``:
    t_ref = tau/10, dt = t_ref/10, horizon = 100 tau, sample_every = tau."""

    tau: float = 0.5
    lam: float = 0.1
    t_ref: Optional[float] = None
    dt: Optional[float] = None
    horizon: Optional[float] = None
    sample_every: Optional[float] = None
    nu_spike: float = NU_SPIKE
    nu_rest: float = NU_REST
    nu_floor: float = NU_FLOOR

    def resolved(self) -> "SpikingConfig":
        t_ref = self.tau / 10 if self.t_ref is None else self.t_ref
        dt = t_ref / 10 if self.dt is None else self.dt
        cfg = SpikingConfig(
            tau=self.tau,
            lam=self.lam,
            t_ref=t_ref,
            dt=dt,
            horizon=100 * self.tau if self.horizon is None else self.horizon,
            sample_every=self.tau if self.sample_every is None else self.sample_every,
            nu_spike=self.nu_spike,
            nu_rest=self.nu_rest,
            nu_floor=self.nu_floor,
        )
        cfg.validate()
        return cfg

    def validate(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError("tau must be positive")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if (self.nu_spike, self.nu_rest, self.nu_floor) != (NU_SPIKE, NU_REST, NU_FLOOR):
            raise ConfigError("threshold, reset and floor are fixed at 1, 0, 0")
        if self.t_ref is not None and not self.t_ref > 0:
            raise ConfigError("t_ref must be positive")
        if self.dt is not None:
            if not self.dt > 0:
                raise ConfigError("dt must be positive")
            if self.t_ref is not None and self.dt > self.t_ref / 10 * (1 + 1e-9):
                raise ConfigError("dt must be at most t_ref/10")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError("horizon must be non-negative")
        if self.sample_every is not None and not self.sample_every > 0:
            raise ConfigError("sample_every must be positive")

    @property
    def ref_steps(self) -> int:
        return int(math.ceil(self.t_ref / self.dt - 1e-9))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def sample_steps(self) -> int:
        return max(1, int(round(self.sample_every / self.dt)))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NeuronState:
    potential: float
    soma_current: float
    spike_count: int
    refractory_until: float
    rate: float


@dataclass(frozen=True, eq=False)
class SpikeRaster:
    """Spike events as parallel arrays, ordered by time then neuron index."""

    neurons: np.ndarray
    times: np.ndarray

    @property
    def events(self) -> List[Tuple[int, float]]:
        return list(zip(self.neurons.tolist(), self.times.tolist()))

    def __len__(self):
        return int(self.neurons.size)

    def for_neuron(self, i: int) -> np.ndarray:
        return self.times[self.neurons == i]

    def min_interval(self) -> float:
        """Shortest gap between consecutive spikes of one neuron (inf if none)."""
        best = math.inf
        for i in np.unique(self.neurons):
            t = self.for_neuron(int(i))
            if t.size > 1:
                best = min(best, float(np.min(np.diff(t))))
        return best

    def to_csv(self, tau: float) -> str:
        """``neuron,time`` rows with time in units of tau."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["neuron", "time"])
        for i, t in zip(self.neurons.tolist(), self.times.tolist()):
            w.writerow([i, repr(t / tau)])
        return buf.getvalue()


def firing_rates(raster: SpikeRaster, t: float, n: int) -> np.ndarray:
    """Spike count of each neuron in [0, t] divided by t (zeros at t = 0)."""
    if t <= 0:
        return np.zeros(n)
    mask = raster.times <= t
    return np.bincount(raster.neurons[mask], minlength=n)[:n] / t


def current_bounds(problem: Problem, config: SpikingConfig) -> Tuple[float, float]:
    """Bounds [B-, B+] that contain every soma and average current.

    B+ = b_max + (N - 1) Omega_max beta with beta = 1 / (tau (1 - exp(-t_ref/tau))),
    the largest possible value of the filtered spike train.
    """
    cfg = config.resolved()
    b_max = float(np.max(np.abs(problem.bias)))
    om = np.abs(problem.lateral)
    omega_max = float(om.max()) if problem.n > 1 else 0.0
    beta = 1.0 / (cfg.tau * -math.expm1(-cfg.t_ref / cfg.tau))
    spread = (problem.n - 1) * omega_max * beta
    return -b_max - spread, b_max + spread


class SpikingNetwork:
    """Mutable network state. Use :meth:`step` for single ticks or
    :meth:`advance` to run many ticks through the compiled kernel."""

    def __init__(self, problem: Problem, penalty: Penalty, config: SpikingConfig):
        self.config = config.resolved()
        report = validate_rules(penalty, self.config.lam)
        if not report.usable:
            raise ConfigError(report.summary())
        self.problem = problem
        self.penalty = penalty
        self.rule_report = report
        n = problem.n
        self._b = np.ascontiguousarray(problem.bias, dtype=float)
        self._omega = np.ascontiguousarray(problem.lateral, dtype=float)
        self.mu = self._b.copy()
        self.nu = np.zeros(n)
        self.ref = np.zeros(n, dtype=np.int64)
        self.counts = np.zeros(n, dtype=np.int64)
        self.mu_int = np.zeros(n)
        self.steps = 0
        self._spike_steps: List[np.ndarray] = []
        self._spike_neurons: List[np.ndarray] = []
        self.extrema = np.array([np.inf, -np.inf, np.inf, -np.inf])

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def time(self) -> float:
        return self.steps * self.config.dt

    @property
    def rates(self) -> np.ndarray:
        if self.steps == 0:
            return np.zeros(self.n)
        return self.counts / self.time

    @property
    def average_current(self) -> np.ndarray:
        if self.steps == 0:
            return self._b.copy()
        return self.mu_int / self.time

    def neuron_states(self) -> List[NeuronState]:
        cfg = self.config
        rates = self.rates
        return [
            NeuronState(
                potential=float(self.nu[i]),
                soma_current=float(self.mu[i]),
                spike_count=int(self.counts[i]),
                refractory_until=self.time + int(self.ref[i]) * cfg.dt,
                rate=float(rates[i]),
            )
            for i in range(self.n)
        ]

    def _kernel_args(self):
        cfg = self.config
        decay = math.exp(-cfg.dt / cfg.tau)
        gain = cfg.tau * -math.expm1(-cfg.dt / cfg.tau)
        return (self._b, self._omega, float(cfg.lam), self.penalty.code,
                self.penalty.kernel_param, decay, gain, float(cfg.dt), 1.0 / cfg.tau,
                cfg.ref_steps)

    def advance(self, n_steps: int, sample_steps: int = 0, backend=None):
        """Run ``n_steps`` ticks. Returns the kernel's sample arrays."""
        k = kernels if backend is None else backend
        out = k.spiking_steps(*self._kernel_args(), int(n_steps), int(sample_steps),
                              self.steps, self.mu, self.nu, self.ref, self.counts,
                              self.mu_int)
        spk_steps, spk_neurons, samples, s_rates, s_u, s_mu, s_nu, ext = out
        self.steps += int(n_steps)
        if spk_steps.size:
            self._spike_steps.append(spk_steps)
            self._spike_neurons.append(spk_neurons)
        self.extrema = np.array([min(self.extrema[0], ext[0]), max(self.extrema[1], ext[1]),
                                 min(self.extrema[2], ext[2]), max(self.extrema[3], ext[3])])
        return samples, s_rates, s_u, s_mu, s_nu

    def step(self) -> List[Tuple[int, float]]:
        """One tick; returns the ``(neuron, time)`` spikes it emitted."""
        before = sum(s.size for s in self._spike_steps)
        self.advance(1)
        steps = np.concatenate(self._spike_steps) if self._spike_steps else np.zeros(0, int)
        neurons = np.concatenate(self._spike_neurons) if self._spike_neurons else np.zeros(0, int)
        return [(int(i), float(s) * self.config.dt)
                for i, s in zip(neurons[before:], steps[before:])]

    def raster(self) -> SpikeRaster:
        if not self._spike_steps:
            return SpikeRaster(np.zeros(0, dtype=np.int64), np.zeros(0))
        steps = np.concatenate(self._spike_steps)
        neurons = np.concatenate(self._spike_neurons)
        return SpikeRaster(neurons, steps * self.config.dt)


@dataclass(frozen=True, eq=False)
class Trace:
    """Sampled trajectory of one spiking run.

    Row k of ``rates``, ``average_currents``, ``soma_currents`` and
    ``potentials`` is the network state at ``times[k]``; row 0 is t = 0.
    ``current_extrema`` is (min mu, max mu, min u, max u) over every tick.
    """

    times: np.ndarray
    rates: np.ndarray
    average_currents: np.ndarray
    soma_currents: np.ndarray
    potentials: np.ndarray
    energy: np.ndarray
    nmse: Optional[np.ndarray]
    raster: SpikeRaster
    current_extrema: np.ndarray
    config: SpikingConfig
    penalty: Penalty = field(default=None)

    @property
    def final_rates(self) -> np.ndarray:
        return self.rates[-1]

    def bounds_violations(self, bounds: Tuple[float, float]) -> int:
        """Number of extrema (of 4) lying outside ``bounds``."""
        lo, hi = bounds
        ext = self.current_extrema
        if not np.all(np.isfinite(ext)):
            return 0
        return int(np.sum((ext < lo) | (ext > hi)))

    def to_csv(self) -> str:
        """``time,neuron,rate,potential,current,energy,nmse``; current is u."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "neuron", "rate", "potential", "current", "energy", "nmse"])
        for k, t in enumerate(self.times.tolist()):
            e = repr(float(self.energy[k]))
            score = "" if self.nmse is None else repr(float(self.nmse[k]))
            for i in range(self.rates.shape[1]):
                w.writerow([repr(t), i, repr(float(self.rates[k, i])),
                            repr(float(self.potentials[k, i])),
                            repr(float(self.average_currents[k, i])), e, score])
        return buf.getvalue()


def init_network(problem: Problem, penalty: Penalty, config: SpikingConfig) -> SpikingNetwork:
    """Network at rest: nu = 0, mu = b, no spikes."""
    return SpikingNetwork(problem, penalty, config)


def run(problem: Problem, penalty: Penalty, config: SpikingConfig = SpikingConfig(),
        check_bounds: bool = False, backend=None) -> Trace:
    """Simulate from t = 0 to the horizon and sample every ``sample_every``.

    With ``check_bounds`` any soma or average current outside
    :func:`current_bounds` raises :class:`NumericalError`.
    """
    net = init_network(problem, penalty, config)
    cfg = net.config
    n = problem.n
    samples, s_rates, s_u, s_mu, s_nu = net.advance(cfg.n_steps, cfg.sample_steps, backend)
    if cfg.n_steps and (samples.size == 0 or samples[-1] != cfg.n_steps):
        samples = np.append(samples, cfg.n_steps)
        s_rates = np.vstack([s_rates, net.rates])
        s_u = np.vstack([s_u, net.average_current])
        s_mu = np.vstack([s_mu, net.mu])
        s_nu = np.vstack([s_nu, net.nu])
    times = np.concatenate([[0.0], samples * cfg.dt])
    rates = np.vstack([np.zeros((1, n)), s_rates])
    u = np.vstack([problem.bias[None, :], s_u])
    mu = np.vstack([problem.bias[None, :], s_mu])
    nu = np.vstack([np.zeros((1, n)), s_nu])
    energies = energy_path(rates, problem, penalty, cfg.lam)
    scores = None
    if problem.truth is not None and np.any(problem.truth > 0):
        scores = np.array([nmse(r, problem.truth) for r in rates])
    trace = Trace(times, rates, u, mu, nu, energies, scores, net.raster(),
                  net.extrema.copy(), cfg, penalty)
    if check_bounds and trace.bounds_violations(current_bounds(problem, cfg)):
        raise NumericalError(
            f"soma/average current left the bounds {current_bounds(problem, cfg)}: "
            f"extrema {trace.current_extrema}")
    return trace


__all__ = [
    "NeuronState", "SpikeRaster", "SpikingConfig", "SpikingNetwork",
    "Trace", "current_bounds", "firing_rates", "init_network", "run",
]
