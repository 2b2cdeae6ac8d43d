"""Row-deletion measurement of the critical rate and its size extrapolation.

One trial draws a signal and a square Gaussian measurement matrix, then
removes measurement rows one at a time, re-solving the reconstruction after
each removal until it first fails the recovery test; the row count just
above the failure is the trial's critical count P_c.  Averaging P_c/N over
trials gives the finite-size rate alpha_c(N), and a weighted quadratic fit
in 1/N extrapolates to infinite size.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import (ConditioningError, ExperimentError, ParameterError,
                         SolverFailure, TrialAborted)
from .recon import (ReconstructionProblem, RowDeletionSolver, SolverSettings,
                    recovery_success, solve_l1_diff)
from .sar import SarParams, generate_signal, rng_for

RECOVERY_THRESHOLD = 1e-4


@dataclass(frozen=True)
class TrialRecord:
    """Critical measurement count from one row-deletion trajectory."""

    n: int
    seed: object
    pc: int
    solver_retries: int

    def __post_init__(self):
        if not 1 <= self.pc <= self.n + 1:
            raise ParameterError(f"pc must lie in [1, n+1], got {self.pc}")


@dataclass(frozen=True)
class LevelEstimate:
    """Finite-size critical rate at one signal length."""

    n: int
    alpha_c_n: float
    stderr: float
    trials: int
    aborted: int


@dataclass(frozen=True)
class ExtrapolationFit:
    """Weighted quadratic fit of alpha_c(N) against 1/N."""

    coefficients: tuple[float, float, float]
    alpha_c_inf: float
    stderr_a0: float
    points_used: tuple[tuple[float, float, float], ...]


def _tightened(settings: SolverSettings) -> SolverSettings:
    return replace(settings, opt_tol=0.1 * settings.opt_tol,
                   max_iter=2 * settings.max_iter)


def run_trial(n: int, params: SarParams, settings: SolverSettings | None = None,
              seed=0, order: str = "last") -> TrialRecord:
    """P_c for one signal/matrix draw.

    Rows are deleted from the end by default, which lets one Cholesky factor
    serve the whole trajectory; order="random" deletes a uniformly chosen
    remaining row each step (distributionally equivalent, much slower) and
    exists to validate exactly that equivalence.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if order not in ("last", "random"):
        raise ParameterError(f"order must be 'last' or 'random', got {order!r}")
    if settings is None:
        settings = SolverSettings()
    base = (seed,) if isinstance(seed, (int, np.integer)) else tuple(seed)
    x0 = generate_signal(params, n, base + (0,))
    f = rng_for(seed, 1).standard_normal((n, n)) / math.sqrt(n)
    retries = 0

    if order == "last":
        solver = RowDeletionSolver(f, x0, settings)

        def solve_at(p: int):
            return solver.solve_at(p)

        def solve_retry(p: int):
            return solver.solve_at(p, cold=True, settings=_tightened(settings))
    else:
        shuffle = rng_for(seed, 2)
        kept = list(range(n))
        state_box = [None]

        def _solve(state, use):
            prob = ReconstructionProblem(f[kept], (f @ x0)[kept], x0)
            return solve_l1_diff(prob, use, state)

        def solve_at(p: int):
            if p < len(kept):
                kept.pop(int(shuffle.integers(len(kept))))
            res = _solve(state_box[0], settings)
            state_box[0] = res.state
            return res

        def solve_retry(p: int):
            res = _solve(None, _tightened(settings))
            state_box[0] = res.state
            return res

    pc = 1
    for p in range(n, 0, -1):
        try:
            result = solve_at(p)
        except SolverFailure:
            retries += 1
            try:
                result = solve_retry(p)
            except SolverFailure as exc:
                raise TrialAborted(
                    f"solver failed twice at n={n}, P={p}, seed={seed!r}: {exc}"
                ) from exc
        if not recovery_success(result.x_star, x0, RECOVERY_THRESHOLD,
                                settings.norm):
            pc = p + 1
            break
    return TrialRecord(n=n, seed=seed, pc=pc, solver_retries=retries)


def estimate_alpha_c_at_n(n: int, trials: int, params: SarParams,
                          settings: SolverSettings | None = None, seed=0,
                          threads: int = 1,
                          max_abort_fraction: float = 0.05) -> LevelEstimate:
    """Mean P_c/n over independent trials with its standard error.

    Aborted trials are excluded from the average; more than
    ``max_abort_fraction`` of them invalidates the whole batch.
    """
    if trials < 2:
        raise ParameterError(f"trials must be >= 2, got {trials}")
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")
    outcomes: list = [None] * trials

    def one(t: int):
        try:
            outcomes[t] = run_trial(n, params, settings, seed=(seed, t))
        except TrialAborted as exc:
            outcomes[t] = exc

    if threads == 1:
        for t in range(trials):
            one(t)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(trials)))
    records = [o for o in outcomes if isinstance(o, TrialRecord)]
    return level_from_pcs(n, [r.pc for r in records],
                          aborted=trials - len(records),
                          max_abort_fraction=max_abort_fraction)


def level_from_pcs(n: int, pcs, aborted: int = 0,
                   max_abort_fraction: float = 0.05) -> LevelEstimate:
    """LevelEstimate from already-measured critical counts at one size."""
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    pcs = np.asarray(pcs, dtype=float)
    total = len(pcs) + aborted
    if len(pcs) < 2:
        raise ExperimentError(
            f"need >= 2 completed trials at n={n}, got {len(pcs)}")
    if aborted > max_abort_fraction * total:
        raise ExperimentError(
            f"{aborted}/{total} trials aborted at n={n}; estimate untrusted")
    if np.any(pcs < 1) or np.any(pcs > n + 1):
        raise ParameterError(f"pc values must lie in [1, n+1] at n={n}")
    stderr = float(np.std(pcs, ddof=1) / math.sqrt(len(pcs)) / n)
    return LevelEstimate(n=n, alpha_c_n=float(np.mean(pcs) / n), stderr=stderr,
                         trials=len(pcs), aborted=aborted)


def extrapolate(points) -> ExtrapolationFit:
    """Weighted least squares of alpha_c(n) on (1, 1/n, 1/n^2).

    Weights are inverse squared standard errors; exact points (zero stderr)
    are given a tiny floor so interpolating inputs reproduce their quadratic
    exactly.
    """
    pts = []
    for item in points:
        if isinstance(item, LevelEstimate):
            pts.append((float(item.n), item.alpha_c_n, item.stderr))
        else:
            n, a, se = item
            pts.append((float(n), float(a), float(se)))
    if len(pts) < 3:
        raise ParameterError(f"need at least 3 points, got {len(pts)}")
    if len({p[0] for p in pts}) < 3:
        raise ConditioningError("need at least 3 distinct n values")
    for n, _, se in pts:
        if n <= 0:
            raise ParameterError(f"n must be > 0, got {n}")
        if se < 0:
            raise ParameterError(f"stderr must be >= 0, got {se}")
    inv = np.array([1.0 / p[0] for p in pts])
    a_vals = np.array([p[1] for p in pts])
    w = np.array([1.0 / max(p[2], 1e-15) ** 2 for p in pts])
    x = np.column_stack([np.ones_like(inv), inv, inv ** 2])
    xtwx = x.T @ (w[:, None] * x)
    xtwy = x.T @ (w * a_vals)
    try:
        coef = np.linalg.solve(xtwx, xtwy)
        cov = np.linalg.inv(xtwx)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"singular design matrix: {exc}") from exc
    cond = np.linalg.cond(xtwx)
    if not np.isfinite(cond) or cond > 1e14:
        raise ConditioningError(f"design matrix badly conditioned ({cond:.2e})")
    return ExtrapolationFit(
        coefficients=(float(coef[0]), float(coef[1]), float(coef[2])),
        alpha_c_inf=float(coef[0]),
        stderr_a0=float(math.sqrt(max(cov[0, 0], 0.0))),
        points_used=tuple((float(n), float(a), float(se)) for n, a, se in pts),
    )
