"""Sparse autoregressive signal model.

A length-N signal starts from x_1 ~ N(0, 1).  At each of the N-1 steps the
value either moves, with probability rho, to r*x_i + sqrt(1-r^2)*eta_i with
eta_i ~ N(0, 1), or pauses, meaning x_{i+1} is bitwise equal to x_i.  The
stationary marginal is N(0, 1) for every 0 <= rho <= 1 and 0 <= r <= 1, so the
process second moment is exactly 1.

Generation is deterministic given (params, n, seed): draws happen in a fixed
order (x_1, then the n-1 move uniforms, then the n-1 innovations) from a
counter-based Philox stream, so results do not depend on how work is batched
or threaded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .exceptions import ParameterError, ShapeError


def rng_for(seed: int | tuple, *path: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *path).

    Distinct key tuples give statistically independent streams, which lets
    callers assign one stream per (sweep, sample) or per trial without any
    shared state.
    """
    if isinstance(seed, (int, np.integer)):
        key = (int(seed),) + tuple(int(p) for p in path)
    else:
        key = tuple(int(s) for s in seed) + tuple(int(p) for p in path)
    if any(k < 0 for k in key):
        raise ParameterError(f"seed components must be non-negative, got {key}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class SarParams:
    """Pause probability 1-rho and autoregression coefficient r."""

    rho: float
    r: float

    def __post_init__(self):
        if not np.isfinite(self.rho) or not 0.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must lie in [0, 1], got {self.rho}")
        if not np.isfinite(self.r) or not 0.0 <= self.r <= 1.0:
            raise ParameterError(f"r must lie in [0, 1], got {self.r}")


@dataclass(frozen=True)
class IncrementMixture:
    """Conditional law of x_{i+1} given x_i = x_prev.

    A point mass of weight ``atom_weight`` at ``atom_location`` plus a
    Gaussian of weight ``gauss_weight`` with the given mean and variance.
    For r = 1 the Gaussian degenerates to a point mass at x_prev as well.
    """

    atom_weight: float
    atom_location: float
    gauss_weight: float
    gauss_mean: float
    gauss_var: float

    def mean(self) -> float:
        return self.atom_weight * self.atom_location + self.gauss_weight * self.gauss_mean

    def second_moment(self) -> float:
        return (self.atom_weight * self.atom_location ** 2
                + self.gauss_weight * (self.gauss_var + self.gauss_mean ** 2))

    def gauss_pdf(self, v: np.ndarray) -> np.ndarray:
        """Density of the absolutely continuous part (weight included)."""
        if self.gauss_var == 0.0:
            raise ParameterError("degenerate Gaussian component (r = 1) has no density")
        z = (np.asarray(v, dtype=float) - self.gauss_mean) ** 2 / (2.0 * self.gauss_var)
        return self.gauss_weight * np.exp(-z) / np.sqrt(2.0 * np.pi * self.gauss_var)


def increment_density(params: SarParams, x_prev: float) -> IncrementMixture:
    """The one-step conditional mixture at state x_prev."""
    if not np.isfinite(x_prev):
        raise ParameterError(f"x_prev must be finite, got {x_prev}")
    return IncrementMixture(
        atom_weight=1.0 - params.rho,
        atom_location=float(x_prev),
        gauss_weight=params.rho,
        gauss_mean=params.r * float(x_prev),
        gauss_var=1.0 - params.r ** 2,
    )


def second_moment(params: SarParams) -> float:
    """Stationary E[x_i^2].

    By induction from x_1 ~ N(0,1): if E[x_i^2] = 1 then
    E[x_{i+1}^2] = (1-rho) + rho*(r^2 + (1-r^2)) = 1.
    """
    return 1.0


def _scan(x1: float, r: float, moves: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Run the recurrence given the raw draws; pauses repeat values bitwise."""
    n = moves.size + 1
    x = np.empty(n)
    c = np.sqrt(max(0.0, 1.0 - r * r))
    innov = c * eta[moves]
    vals = np.empty(innov.size + 1)
    vals[0] = x1
    if innov.size:
        # AR(1) scan: vals[k+1] = innov[k] + r * vals[k]
        vals[1:], _ = lfilter([1.0], [1.0, -r], innov, zi=np.array([r * x1]))
    idx = np.empty(n, dtype=np.int64)
    idx[0] = 0
    np.cumsum(moves, out=idx[1:])
    x[:] = vals[idx]
    return x


def generate_signal_parts(params: SarParams, n: int, rng: np.random.Generator):
    """Generate a signal together with the exact move mask used to build it.

    Returns (x, moves) where moves[i] is True iff step i -> i+1 moved.
    Where moves[i] is False, x[i+1] is bitwise equal to x[i].
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    x1 = rng.standard_normal()
    u = rng.random(n - 1)
    eta = rng.standard_normal(n - 1)
    moves = u < params.rho
    return _scan(x1, params.r, moves, eta), moves


def generate_signal(params: SarParams, n: int, seed: int | tuple) -> np.ndarray:
    """Draw one length-n signal from the process, reproducibly."""
    x, _ = generate_signal_parts(params, n, rng_for(seed))
    return x


def pause_mask(x: np.ndarray) -> np.ndarray:
    """Pause edges recovered from the values themselves.

    Pauses copy values bitwise, so exact float equality identifies them; with
    probability one no move lands exactly on the previous value.
    """
    x = as_signal(x)
    return x[1:] == x[:-1]


def as_signal(x) -> np.ndarray:
    """Validate and return a 1-D finite float64 array of length >= 1."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ShapeError(f"signal must be 1-D with at least one sample, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError("signal contains non-finite values")
    return arr
