"""Sparse-recovery problem instances: dictionaries, codes, stimuli and scores."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, MetricError

NMSE_FLOOR_DB = -300.0
SUCCESS_THRESHOLD_DB = -15.0


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dictionary:
    """An M x N dictionary whose columns (atoms) have unit Euclidean norm."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = _frozen(self.atoms)
        if atoms.ndim != 2:
            raise DimensionError("dictionary must be a 2-D matrix")
        m, n = atoms.shape
        if m < 1 or n < 1:
            raise DimensionError("dictionary needs at least one row and one column")
        if m > n:
            raise DimensionError(f"dictionary must have M <= N, got {m}x{n}")
        norms = np.linalg.norm(atoms, axis=0)
        if np.max(np.abs(norms - 1.0)) >= 1e-12:
            raise ConfigError("dictionary atoms must have unit norm")
        object.__setattr__(self, "atoms", atoms)

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def from_matrix(cls, mat) -> "Dictionary":
        """Normalise the columns of an arbitrary matrix and wrap it."""
        mat = np.array(mat, dtype=float)
        if mat.ndim != 2:
            raise DimensionError("dictionary must be a 2-D matrix")
        norms = np.linalg.norm(mat, axis=0)
        if np.any(norms == 0):
            raise ConfigError("dictionary has an all-zero column")
        return cls(mat / norms)


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")


@dataclass(frozen=True, eq=False)
class Problem:
    """One instance of min_{a >= 0} 1/2 ||s - Phi a||^2 + lam sum g(a_i).

    ``bias`` (Phi^T s), ``gram`` (Phi^T Phi) and ``lateral`` (gram with a zero
    diagonal) are derived at construction and read-only.
    """

    dictionary: Dictionary
    stimulus: np.ndarray
    truth: Optional[np.ndarray] = None
    bias: np.ndarray = field(init=False, repr=False)
    gram: np.ndarray = field(init=False, repr=False)
    lateral: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = _frozen(self.stimulus)
        if s.shape != (self.dictionary.m,):
            raise DimensionError(
                f"stimulus length {s.shape} does not match M={self.dictionary.m}"
            )
        object.__setattr__(self, "stimulus", s)
        if self.truth is not None:
            t = _frozen(self.truth)
            if t.shape != (self.dictionary.n,):
                raise DimensionError("truth length must equal N")
            if np.any(t < 0):
                raise ConfigError("truth code must be non-negative")
            object.__setattr__(self, "truth", t)
        phi = self.dictionary.atoms
        gram = phi.T @ phi
        gram = 0.5 * (gram + gram.T)
        lateral = gram.copy()
        np.fill_diagonal(lateral, 0.0)
        object.__setattr__(self, "bias", _frozen(phi.T @ s))
        object.__setattr__(self, "gram", _frozen(gram))
        object.__setattr__(self, "lateral", _frozen(lateral))

    @property
    def m(self) -> int:
        return self.dictionary.m

    @property
    def n(self) -> int:
        return self.dictionary.n

    @property
    def half_signal_energy(self) -> float:
        return 0.5 * float(self.stimulus @ self.stimulus)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "dictionary": self.dictionary.atoms.tolist(),
            "stimulus": self.stimulus.tolist(),
            "truth": None if self.truth is None else self.truth.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        atoms = np.array(d["dictionary"], dtype=float).reshape(d["m"], d["n"])
        truth = d.get("truth")
        return cls(Dictionary(atoms), np.array(d["stimulus"], dtype=float),
                   None if truth is None else np.array(truth, dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Problem":
        return cls.from_dict(json.loads(text))


def make_dictionary(m: int, n: int, seed: int = 0) -> Dictionary:
    """I.i.d. standard Gaussian entries, columns scaled to unit norm."""
    if m < 1 or n < 1:
        raise DimensionError(f"dictionary dimensions must be positive, got {m}x{n}")
    if m > n:
        raise DimensionError(f"need m <= n, got {m}x{n}")
    rng = np.random.default_rng(seed)
    return Dictionary.from_matrix(rng.standard_normal((m, n)))


def make_sparse_code(
    n: int,
    sparsity: float,
    seed: int = 0,
    *,
    positions: Optional[Sequence[int]] = None,
    values: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Non-negative code with ``round(sparsity * n)`` nonzeros.

    Support positions are uniform without replacement and amplitudes are
    uniform on (0, 1). ``positions``/``values`` override the random draw.
    """
    if not (0 < sparsity <= 1):
        raise ConfigError(f"sparsity must lie in (0, 1], got {sparsity}")
    k = int(round(sparsity * n))
    if k < 1:
        raise ConfigError(f"sparsity {sparsity} leaves no nonzero entry for n={n}")
    rng = np.random.default_rng(seed)
    if positions is None:
        positions = rng.choice(n, size=k, replace=False)
    positions = np.asarray(positions, dtype=int)
    if values is None:
        # (0, 1): reject the measure-zero draw of exactly 0
        values = rng.uniform(0.0, 1.0, size=positions.size)
        while np.any(values == 0.0):
            values[values == 0.0] = rng.uniform(0.0, 1.0, size=int(np.sum(values == 0.0)))
    values = np.asarray(values, dtype=float)
    if values.shape != positions.shape:
        raise DimensionError("positions and values must have the same length")
    if np.any(values < 0):
        raise ConfigError("code values must be non-negative")
    code = np.zeros(n)
    code[positions] = values
    return code


def synthesize(dictionary: Dictionary, code, noise: Optional[NoiseSpec] = None) -> Problem:
    """Stimulus s = Phi code (+ white Gaussian noise at an exact SNR)."""
    code = np.asarray(code, dtype=float)
    if code.shape != (dictionary.n,):
        raise DimensionError(f"code length {code.shape} does not match N={dictionary.n}")
    if np.any(code < 0):
        raise ConfigError("code must be non-negative")
    clean = dictionary.atoms @ code
    if noise is None:
        return Problem(dictionary, clean, code)
    power = float(clean @ clean)
    if power == 0.0:
        raise ConfigError("SNR is undefined for a zero signal")
    rng = np.random.default_rng(noise.seed)
    w = rng.standard_normal(dictionary.m)
    target = power / 10.0 ** (noise.snr_db / 10.0)
    w *= math.sqrt(target / float(w @ w))
    return Problem(dictionary, clean + w, code)


def measured_snr_db(problem: Problem) -> float:
    clean = problem.dictionary.atoms @ problem.truth
    noise = problem.stimulus - clean
    return 10.0 * math.log10(float(clean @ clean) / float(noise @ noise))


def nmse(estimate, truth) -> float:
    """10 log10(||truth - estimate||^2 / ||truth||^2) in dB.

    An exact match returns the -300 dB floor instead of -inf.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DimensionError("estimate and truth must have equal length")
    den = float(truth @ truth)
    if den == 0.0:
        raise MetricError("NMSE is undefined for an all-zero truth")
    diff = truth - estimate
    num = float(diff @ diff)
    if num == 0.0:
        return NMSE_FLOOR_DB
    return max(10.0 * math.log10(num / den), NMSE_FLOOR_DB)


def success(estimate, truth, threshold_db: float = SUCCESS_THRESHOLD_DB) -> bool:
    return nmse(estimate, truth) < threshold_db
