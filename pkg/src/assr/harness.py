"""Multi-trial experiments: method comparisons, sweeps and convergence curves."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import auxiliary, oracle, spiking
from .errors import ConfigError, MetricError
from .penalty import Penalty, validate_rules
from .problem import (SUCCESS_THRESHOLD_DB, NoiseSpec, Problem, make_dictionary,
                      make_sparse_code, nmse, synthesize)

SOLVERS = ("spiking", "auxiliary", "ista", "proxgrad")
AXES = {
    "sparsity": "sparsity",
    "snr": "snr_db",
    "snr_db": "snr_db",
    "measurement": "measurement_ratio",
    "measurement_ratio": "measurement_ratio",
}
# iterate stride kept by iterative solvers when only summary statistics are needed
ITERATE_STRIDE = 10


@dataclass(frozen=True)
class Method:
    solver: str
    penalty: Penalty

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        if self.solver == "ista" and not self.penalty.is_baseline:
            raise ConfigError("ista only supports the l1 penalty")

    @property
    def label(self) -> str:
        return f"{self.solver}-{self.penalty.label}"

    @classmethod
    def from_dict(cls, d: dict) -> "Method":
        unknown = set(d) - {"solver", "penalty", "param"}
        if unknown:
            raise ConfigError(f"unknown method keys: {sorted(unknown)}")
        if "solver" not in d:
            raise ConfigError("method entry needs a 'solver'")
        pen = Penalty(d.get("penalty", "l1"), d.get("param", 1.0))
        return cls(d["solver"], pen)

    def to_dict(self) -> dict:
        return {"solver": self.solver, **self.penalty.to_dict()}


DEFAULT_METHODS = (
    Method("spiking", Penalty.l1()),
    Method("spiking", Penalty.exponential(1.0)),
    Method("spiking", Penalty.logarithmic(1.0)),
    Method("spiking", Penalty.arctangent(1.0)),
)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything that determines an experiment's numbers.

    ``truth`` fixes the code (and N) for every trial; only the dictionary and
    noise then vary with the seed.
    """

    m: int = 100
    n: int = 200
    sparsity: float = 0.15
    snr_db: Optional[float] = 20.0
    lam: float = 0.1
    methods: tuple = DEFAULT_METHODS
    trials: int = 20
    seed_base: int = 0
    threshold_db: float = SUCCESS_THRESHOLD_DB
    truth: Optional[tuple] = None
    spiking: spiking.SpikingConfig = field(default_factory=spiking.SpikingConfig)
    auxiliary: auxiliary.AuxiliaryConfig = field(default_factory=auxiliary.AuxiliaryConfig)

    def resolved(self) -> "ExperimentSpec":
        spec = replace(
            self,
            methods=tuple(self.methods),
            truth=None if self.truth is None else tuple(float(x) for x in self.truth),
            spiking=replace(self.spiking, lam=self.lam).resolved(),
            auxiliary=replace(self.auxiliary, lam=self.lam, tau=self.spiking.tau).resolved(),
        )
        if spec.truth is not None:
            spec = replace(spec, n=len(spec.truth))
        spec.validate()
        return spec

    def validate(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (1 <= self.m <= self.n):
            raise ConfigError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.truth is None and not (0 < self.sparsity <= 1):
            raise ConfigError("sparsity must lie in (0, 1]")
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if not self.methods:
            raise ConfigError("at least one method is required")
        for meth in self.methods:
            report = validate_rules(meth.penalty, self.lam)
            if not report.usable:
                raise ConfigError(f"{meth.label}: {report.summary()}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "sparsity": self.sparsity,
            "snr_db": self.snr_db,
            "lambda": self.lam,
            "methods": [m.to_dict() for m in self.methods],
            "trials": self.trials,
            "seed": self.seed_base,
            "threshold_db": self.threshold_db,
            "truth": None if self.truth is None else list(self.truth),
            "spiking": {k: v for k, v in self.spiking.to_dict().items()
                        if k in ("tau", "t_ref", "dt", "horizon", "sample_every")},
            "auxiliary": {k: v for k, v in self.auxiliary.to_dict().items()
                          if k in ("dt", "horizon", "sample_every", "stop_tol", "energy_tol")},
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def trial_seeds(seed: int):
    """Independent (dictionary, code, noise) seeds derived from one integer."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(3)]


def make_problem(spec: ExperimentSpec, trial: int) -> Problem:
    d_seed, c_seed, n_seed = trial_seeds(spec.seed_base + trial)
    dictionary = make_dictionary(spec.m, spec.n, d_seed)
    if spec.truth is not None:
        code = np.array(spec.truth, dtype=float)
    else:
        code = make_sparse_code(spec.n, spec.sparsity, c_seed)
    noise = None if spec.snr_db is None else NoiseSpec(spec.snr_db, n_seed)
    return synthesize(dictionary, code, noise)


@dataclass(frozen=True, eq=False)
class MethodOutcome:
    """One method on one problem. ``times``/``nmse`` trace the solve."""

    method: Method
    code: np.ndarray
    nmse: float
    times: np.ndarray
    nmse_path: np.ndarray
    detail: object = None

    @property
    def convergence_time(self) -> float:
        """First time after which the NMSE stays within 1 dB of its final value."""
        path = self.nmse_path
        if path.size == 0:
            return 0.0
        off = np.abs(path - path[-1]) > 1.0
        if not np.any(off):
            return float(self.times[0])
        last = int(np.flatnonzero(off)[-1])
        return float(self.times[min(last + 1, path.size - 1)])


def _nmse_path(codes, truth):
    if truth is None or not np.any(truth > 0):
        return np.zeros(0)
    return np.array([nmse(c, truth) for c in codes])


def solve_method(problem: Problem, method: Method, spec: ExperimentSpec,
                 keep_path: bool = True) -> MethodOutcome:
    """Run one method on one problem with the spec's settings."""
    lam = spec.lam
    truth = problem.truth
    if method.solver == "spiking":
        trace = spiking.run(problem, method.penalty, spec.spiking)
        code = trace.final_rates
        times = trace.times
        path = trace.nmse if trace.nmse is not None else np.zeros(0)
        detail = trace
    elif method.solver == "auxiliary":
        traj = auxiliary.integrate(problem, method.penalty, spec.auxiliary)
        code = traj.final.a
        times, path, detail = traj.times, _nmse_path(traj.a, truth), traj
    else:
        every = 1 if keep_path else ITERATE_STRIDE
        if method.solver == "ista":
            res = oracle.ista_l1(problem, lam, keep_path=True, path_every=every)
        else:
            res = oracle.prox_grad_nonconvex(problem, method.penalty, lam, keep_path=True,
                                             path_every=every)
        code = res.a
        # plotting convention: one iteration = one auxiliary dt
        times = res.path_iterations * spec.auxiliary.dt
        path = _nmse_path(res.path, truth)
        detail = res
    score = nmse(code, truth) if truth is not None and np.any(truth > 0) else math.nan
    return MethodOutcome(method, np.asarray(code, dtype=float), score, times, path, detail)


def _run_one_trial(args):
    spec, trial = args
    problem = make_problem(spec, trial)
    out = []
    for meth in spec.methods:
        res = solve_method(problem, meth, spec, keep_path=False)
        out.append((meth.label, res.nmse, res.convergence_time, res.code))
    return trial, out


@dataclass(frozen=True)
class MethodRecord:
    method: str
    nmse: tuple
    convergence_times: tuple
    threshold_db: float

    @property
    def median_nmse(self) -> float:
        return float(np.median(self.nmse))

    @property
    def q25(self) -> float:
        return float(np.quantile(self.nmse, 0.25))

    @property
    def q75(self) -> float:
        return float(np.quantile(self.nmse, 0.75))

    @property
    def success_probability(self) -> float:
        return float(np.mean(np.array(self.nmse) < self.threshold_db))

    def stats(self) -> Dict[str, float]:
        return {
            "median_nmse": self.median_nmse,
            "q25_nmse": self.q25,
            "q75_nmse": self.q75,
            "success_probability": self.success_probability,
            "median_convergence_time": float(np.median(self.convergence_times)),
        }


@dataclass(frozen=True, eq=False)
class TrialResults:
    spec: ExperimentSpec
    records: tuple
    codes: dict = field(repr=False, default_factory=dict)

    def record(self, label: str) -> MethodRecord:
        for r in self.records:
            if r.method == label:
                return r
        raise KeyError(label)

    def medians(self) -> Dict[str, float]:
        return {r.method: r.median_nmse for r in self.records}


def run_trials(spec: ExperimentSpec, jobs: int = 1) -> TrialResults:
    """Every method solves the same problem in each trial; aggregate per method.

    Problems come from ``seed_base + trial``. With ``jobs > 1`` trials run in
    worker processes and are merged back in trial order.
    """
    spec = spec.resolved()
    work = [(spec, t) for t in range(spec.trials)]
    if jobs > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one_trial, work))
    else:
        results = [_run_one_trial(w) for w in work]
    results.sort(key=lambda r: r[0])
    scores: Dict[str, list] = {m.label: [] for m in spec.methods}
    ctimes: Dict[str, list] = {m.label: [] for m in spec.methods}
    codes: Dict[str, list] = {m.label: [] for m in spec.methods}
    for _, out in results:
        for label, score, ct, code in out:
            scores[label].append(score)
            ctimes[label].append(ct)
            codes[label].append(code)
    records = tuple(
        MethodRecord(m.label, tuple(scores[m.label]), tuple(ctimes[m.label]), spec.threshold_db)
        for m in spec.methods
    )
    return TrialResults(spec, records, {k: np.array(v) for k, v in codes.items()})


@dataclass(frozen=True)
class SweepResult:
    axis: str
    values: tuple
    results: tuple  # TrialResults per value

    def rows(self) -> List[dict]:
        out = []
        for value, res in zip(self.values, self.results):
            for rec in res.records:
                out.append({"axis": self.axis, "value": value, "method": rec.method,
                            **rec.stats()})
        return out

    def series(self, method: str, stat: str) -> np.ndarray:
        return np.array([r[stat] for r in self.rows() if r["method"] == method])


def _spec_at(spec: ExperimentSpec, axis: str, value: float) -> ExperimentSpec:
    if axis == "sparsity":
        return replace(spec, sparsity=float(value))
    if axis == "snr_db":
        return replace(spec, snr_db=float(value))
    m = int(round(value * spec.n))
    if not 1 <= m <= spec.n:
        raise ConfigError(f"measurement ratio {value} gives m={m} outside [1, n]")
    return replace(spec, m=m)


def sweep(spec: ExperimentSpec, axis: str, values: Sequence[float], jobs: int = 1
          ) -> SweepResult:
    """:func:`run_trials` at each value of ``axis``.

    ``axis`` is ``sparsity``, ``snr_db`` or ``measurement_ratio`` (m is
    ``round(ratio * n)`` with n fixed).
    """
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(AXES)}")
    axis = AXES[axis]
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value")
    diffs = np.diff(values)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError("sweep values must be strictly monotone")
    specs = [_spec_at(spec, axis, v).resolved() for v in values]
    return SweepResult(axis, tuple(values), tuple(run_trials(s, jobs) for s in specs))


def convergence_curve(problem: Problem, methods: Sequence[Method], sample_times,
                      spec: Optional[ExperimentSpec] = None) -> Dict[str, np.ndarray]:
    """NMSE of each method's running estimate at ``sample_times``.

    Between recorded samples the most recent estimate is held. Iterative
    solvers map iteration k to time k * auxiliary dt.
    """
    if problem.truth is None or not np.any(problem.truth > 0):
        raise MetricError("convergence curves need a nonzero ground truth")
    spec = (spec or ExperimentSpec(m=problem.m, n=problem.n, methods=tuple(methods))).resolved()
    sample_times = np.asarray(sample_times, dtype=float)
    table = {"time": sample_times}
    for meth in methods:
        res = solve_method(problem, meth, spec, keep_path=True)
        idx = np.searchsorted(res.times, sample_times, side="right") - 1
        idx = np.clip(idx, 0, res.nmse_path.size - 1)
        table[meth.label] = res.nmse_path[idx]
    return table


def time_to_level(times, path, level_db: float) -> float:
    """First time the NMSE path reaches ``level_db`` (inf if never)."""
    hit = np.flatnonzero(np.asarray(path) <= level_db)
    return float(np.asarray(times)[hit[0]]) if hit.size else math.inf
