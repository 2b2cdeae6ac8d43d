"""Equality-constrained minimization of the summed absolute differences.

Reconstruction solves

    min_x  sum_{i<N} |x_{i+1} - x_i|   subject to  F x = y.

The running-sum change of variables x = S x' (S lower triangular of ones)
turns the cost into a plain l1 norm on x'_2..x'_N and the constraint into
A x' = y with A = F S, handled by alternating-direction splitting:

    v-step   projection onto {A v = y}, done with rows of A orthonormalized
             through the Cholesky factor of A A^T (computed once per problem)
    w-step   soft threshold at 1/sigma on the penalized coordinates
    u-step   running dual average

The splitting identifies the active set long before its residuals reach
tolerance, so every few hundred iterations the support of w is polished:
the reduced equality system is solved exactly and a dual vector is built
for it; if the dual is feasible and the duality gap closes, that polished
point is optimal by weak duality and is returned at machine precision.
Degenerate instances where no certificate exists fall back to the residual
stopping rule.

Row-deletion experiments drop trailing rows of F, so every reduced Gram
matrix is a leading principal block of the full one and its Cholesky factor
is the corresponding block of the full factor; RowDeletionSolver computes
that factor once per trajectory and warm-starts consecutive solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.optimize import linprog

from .arrays import as_vector
from .exceptions import ConditioningError, ParameterError, ShapeError, SolverFailure

_CONSISTENCY_TOL = 1e-9
_DUAL_FEAS_TOL = 1e-9


def cumulative_transform(xp) -> np.ndarray:
    """Running sums: apply the lower-triangular all-ones matrix."""
    return np.cumsum(as_vector(xp, "xp"))


def difference_transform(x) -> np.ndarray:
    """First differences with the first entry kept: the inverse running sum."""
    x = as_vector(x, "x")
    out = np.empty_like(x)
    out[0] = x[0]
    np.subtract(x[1:], x[:-1], out=out[1:])
    return out


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and variant flags for the equality-constrained solver."""

    feas_tol: float = 1e-9
    opt_tol: float = 1e-8
    max_iter: int = 200_000
    penalize_first: bool = False
    norm: str = "l2"

    def __post_init__(self):
        if not self.feas_tol > 0.0:
            raise ParameterError(f"feas_tol must be > 0, got {self.feas_tol}")
        if not self.opt_tol > 0.0:
            raise ParameterError(f"opt_tol must be > 0, got {self.opt_tol}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.norm not in ("l2", "linf"):
            raise ParameterError(f"norm must be 'l2' or 'linf', got {self.norm!r}")


class ReconstructionProblem:
    """Measurement matrix, measurements, and the signal they came from.

    The ground truth x0 rides along for evaluation only; the measurements
    must reproduce it exactly (y = f @ x0) up to roundoff at construction.
    """

    def __init__(self, f, y, x0):
        f = np.ascontiguousarray(np.asarray(f, dtype=np.float64))
        if f.ndim != 2:
            raise ShapeError(f"f must be a 2-D matrix, got ndim={f.ndim}")
        if not np.all(np.isfinite(f)):
            raise ShapeError("f must be finite")
        y = as_vector(y, "y")
        x0 = as_vector(x0, "x0")
        p, n = f.shape
        if not 1 <= p <= n:
            raise ShapeError(f"need 1 <= P <= N, got P={p}, N={n}")
        if len(y) != p:
            raise ShapeError(f"y has length {len(y)}, expected {p}")
        if len(x0) != n:
            raise ShapeError(f"x0 has length {len(x0)}, expected {n}")
        resid = float(np.linalg.norm(f @ x0 - y))
        scale = max(1.0, float(np.linalg.norm(y)))
        if resid > _CONSISTENCY_TOL * scale:
            raise ParameterError(
                f"measurements are inconsistent with x0: |f@x0 - y| = {resid:.3g}")
        self.f = f
        self.y = y
        self.x0 = x0

    @classmethod
    def from_signal(cls, f, x0):
        f = np.asarray(f, dtype=np.float64)
        x0 = as_vector(x0, "x0")
        return cls(f, f @ x0, x0)

    @property
    def p(self) -> int:
        return self.f.shape[0]

    @property
    def n(self) -> int:
        return self.f.shape[1]


@dataclass(frozen=True)
class Certificate:
    """Exit residuals of one solve.

    ``gap`` is the certified duality gap when the active-set polish produced
    the answer, and NaN when the solve exited on splitting residuals alone.
    """

    feasibility: float
    primal: float
    dual: float
    iterations: int
    gap: float = float("nan")


@dataclass
class WarmState:
    """Splitting variables carried between consecutive solves."""

    w: np.ndarray
    u: np.ndarray
    sigma: float = 1.0


@dataclass(frozen=True)
class ReconstructionResult:
    x_star: np.ndarray
    objective: float
    certificate: Certificate
    state: WarmState = field(repr=False, compare=False, default=None)


def diff_objective(x) -> float:
    """The reconstruction cost: sum of absolute consecutive differences."""
    x = as_vector(x, "x")
    return float(np.sum(np.abs(np.diff(x)))) if len(x) > 1 else 0.0


def recovery_success(x_star, x0, threshold: float = 1e-4,
                     norm: str = "l2") -> bool:
    """Distance test against ground truth; the boundary counts as success."""
    x_star = as_vector(x_star, "x_star")
    x0 = as_vector(x0, "x0")
    if len(x_star) != len(x0):
        raise ShapeError(f"length mismatch: {len(x_star)} vs {len(x0)}")
    if not threshold > 0.0:
        raise ParameterError(f"threshold must be > 0, got {threshold}")
    d = x_star - x0
    if norm == "l2":
        dist = float(np.linalg.norm(d))
    elif norm == "linf":
        dist = float(np.max(np.abs(d)))
    else:
        raise ParameterError(f"norm must be 'l2' or 'linf', got {norm!r}")
    return dist <= threshold


def _transformed_matrix(f: np.ndarray) -> np.ndarray:
    # F @ S: column j of FS sums columns j..N-1 of F; a reversed cumsum.
    return np.cumsum(f[:, ::-1], axis=1)[:, ::-1]


def _gram_cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = A A^T, via QR of A^T.

    Computing R from A^T directly keeps the error proportional to cond(A)
    rather than cond(A)^2, which matters for near-singular square draws.
    Signs are normalized so L has a positive diagonal, making it the unique
    Cholesky factor; the Gram of the first p rows of A is then the leading
    p-by-p block of L L^T, so one factorization serves every truncation.
    """
    r = qr(a.T, mode="r")[0][:a.shape[0]]
    lower = r.T * np.sign(np.diag(r))
    diag = np.abs(np.diag(lower))
    scale = float(np.max(diag)) if len(diag) else 0.0
    if scale == 0.0 or float(np.min(diag)) < 1e-13 * scale:
        raise ConditioningError("constraint rows are numerically dependent")
    return np.ascontiguousarray(lower)


def _certify_support(a: np.ndarray, y: np.ndarray, sup: np.ndarray,
                     penalize_first: bool, feas_tol: float, opt_tol: float):
    """Exact solve on one support plus a weak-duality certificate.

    Returns (v, gap, feasibility) when the candidate is certified optimal
    within opt_tol, else None.
    """
    n = a.shape[1]
    asub = a[:, sup]
    vs, *_ = np.linalg.lstsq(asub, y, rcond=None)
    v = np.zeros(n)
    v[sup] = vs
    feas = float(np.linalg.norm(a @ v - y))
    scale = max(1.0, float(np.linalg.norm(y)))
    if feas > feas_tol * scale:
        return None
    rhs = np.sign(v[sup])
    if not penalize_first:
        rhs[0] = 0.0
    nu, *_ = np.linalg.lstsq(asub.T, rhs, rcond=None)
    g = a.T @ nu
    if float(np.max(np.abs(g[sup] - rhs))) > _DUAL_FEAS_TOL:
        return None
    off = np.ones(n, dtype=bool)
    off[sup] = False
    if np.any(off) and float(np.max(np.abs(g[off]))) > 1.0 + _DUAL_FEAS_TOL:
        return None
    obj = float(np.sum(np.abs(v))) if penalize_first else float(np.sum(np.abs(v[1:])))
    gap = abs(obj - float(y @ nu))
    if gap > opt_tol * max(1.0, obj):
        return None
    return v, gap, feas


def _polish(a: np.ndarray, y: np.ndarray, w: np.ndarray, penalize_first: bool,
            feas_tol: float, opt_tol: float, mismatch=None):
    """Try certified exact solves on supports suggested by the iterate.

    Candidates: the nonzeros of w; that set grown one coordinate at a time
    by descending |mismatch| (the splitting residual concentrates on
    coordinates that still want to enter, which un-sticks instances whose
    optimal support has exactly P entries); or, when w carries more than P
    nonzeros, the P heaviest.  Certification is sufficient, not necessary:
    degenerate instances may reject every candidate and are then left to
    the residual stopping rule.
    """
    p, n = a.shape
    nz = np.flatnonzero(w)
    if not penalize_first and (len(nz) == 0 or nz[0] != 0):
        nz = np.concatenate(([0], nz))
    if len(nz) == 0:
        return None
    if len(nz) > p:
        score = np.abs(w[nz]).astype(float)
        if not penalize_first:
            score[nz == 0] = np.inf  # the free coordinate always stays
        keep = np.sort(nz[np.argsort(-score)[:p]])
        return _certify_support(a, y, keep, penalize_first, feas_tol, opt_tol)
    out = _certify_support(a, y, nz, penalize_first, feas_tol, opt_tol)
    if out is not None or mismatch is None:
        return out
    outside = np.ones(n, dtype=bool)
    outside[nz] = False
    extras = np.flatnonzero(outside)
    extras = extras[np.argsort(-np.abs(mismatch[extras]))]
    sup = nz
    for k in range(min(len(extras), p - len(nz), 4)):
        sup = np.sort(np.concatenate((sup, [extras[k]])))
        out = _certify_support(a, y, sup, penalize_first, feas_tol, opt_tol)
        if out is not None:
            return out
    return None


def _refine_feasibility(a, lower, y, v):
    r = a @ v - y
    tt = solve_triangular(lower, r, lower=True)
    return v - a.T @ solve_triangular(lower.T, tt, lower=False)


def _vertex_fallback(a: np.ndarray, lower: np.ndarray, y: np.ndarray,
                     settings: SolverSettings):
    """Simplex-type solve for instances where the splitting iteration stalls.

    Degenerate optimal faces (support size exactly P with near-zero entries)
    defeat both the residual rule and support polishing; a vertex solver
    handles them directly.  The answer is accepted only after an in-house
    feasibility and weak-duality check, so the optimality guarantee never
    rests on the external solver.  Returns (v, gap, feas) or None.
    """
    p, n = a.shape
    pen = np.arange(0 if settings.penalize_first else 1, n)
    m = len(pen)
    c = np.concatenate([np.zeros(n), np.ones(m)])
    a_eq = np.hstack([a, np.zeros((p, m))])
    a_ub = np.zeros((2 * m, n + m))
    a_ub[np.arange(m), pen] = 1.0
    a_ub[np.arange(m), n + np.arange(m)] = -1.0
    a_ub[m + np.arange(m), pen] = -1.0
    a_ub[m + np.arange(m), n + np.arange(m)] = -1.0
    res = linprog(c, A_ub=a_ub if m else None,
                  b_ub=np.zeros(2 * m) if m else None, A_eq=a_eq, b_eq=y,
                  bounds=[(None, None)] * n + [(0, None)] * m,
                  method="highs")
    if not res.success:
        return None
    v = _refine_feasibility(a, lower, y, res.x[:n])
    feas = float(np.linalg.norm(a @ v - y))
    scale = max(1.0, float(np.linalg.norm(y)))
    if feas > settings.feas_tol * scale:
        return None
    obj = float(np.sum(np.abs(v[pen])))
    guess = np.asarray(res.eqlin.marginals, dtype=np.float64)
    limit = settings.opt_tol * max(1.0, obj)
    best = None
    for sign in (-1.0, 1.0):
        nu = sign * guess
        g = a.T @ nu
        if not settings.penalize_first and abs(g[0]) > 0.0:
            # dual feasibility needs an exactly vanishing free coordinate;
            # correct along the minimum-norm preimage of e_0
            e0 = np.zeros(n)
            e0[0] = 1.0
            mu, *_ = np.linalg.lstsq(a.T, e0, rcond=None)
            d0 = float((a.T @ mu)[0])
            if abs(d0) > 1e-8:
                nu = nu - (g[0] / d0) * mu
                g = a.T @ nu
        box = float(np.max(np.abs(g[pen]))) if m else 0.0
        slack = abs(float(g[0])) if not settings.penalize_first else 0.0
        if box > 1.0:
            nu = nu / box
        # residual free-coordinate leakage, bounded via the iterate's own v0
        gap = obj - float(y @ nu) + slack * (1.0 + abs(float(v[0])))
        if gap >= 0.0 and (best is None or gap < best[1]):
            best = (nu, gap)
    if best is None or best[1] > limit:
        return None
    return v, best[1], feas, a.T @ best[0]


def _solve_with_fallback(a, lower, y, settings, state):
    try:
        return _admm(a, lower, y, settings, state)
    except SolverFailure as exc:
        out = _vertex_fallback(a, lower, y, settings)
        if out is None:
            raise
        v, gap, feas, g = out
        cert = Certificate(feasibility=feas, primal=exc.primal, dual=exc.dual,
                           iterations=exc.iterations, gap=gap)
        new_state = WarmState(w=v.copy(), u=g / state.sigma,
                              sigma=state.sigma)
        return v, cert, new_state


def _admm(a: np.ndarray, lower: np.ndarray, y: np.ndarray,
          settings: SolverSettings,
          state: WarmState) -> tuple[np.ndarray, Certificate, WarmState]:
    p, n = a.shape
    # Orthonormalize the constraint rows once: the projection then needs two
    # matvecs per iteration and no triangular solves.
    at = solve_triangular(lower, a, lower=True)
    yt = solve_triangular(lower, y, lower=True)
    aty = at.T @ yt
    w, u, sigma = state.w.copy(), state.u.copy(), state.sigma
    pen = slice(None) if settings.penalize_first else slice(1, None)
    root_n = math.sqrt(n)
    tol = settings.opt_tol
    poll = max(250, n // 4)
    r_pri = r_dual = float("inf")
    stalled_polls = 0
    last_poll_pri = float("inf")
    v = np.zeros(n)
    for it in range(1, settings.max_iter + 1):
        t = w - u
        v = t - at.T @ (at @ t) + aty
        w_old = w
        sv = v + u
        w = sv.copy()
        w[pen] = np.sign(sv[pen]) * np.maximum(np.abs(sv[pen]) - 1.0 / sigma, 0.0)
        u = u + v - w
        r_pri = float(np.linalg.norm(v - w))
        r_dual = float(sigma * np.linalg.norm(w - w_old))
        eps_pri = root_n * tol + tol * max(float(np.linalg.norm(v)),
                                           float(np.linalg.norm(w)))
        eps_dual = root_n * tol + tol * float(sigma * np.linalg.norm(u))
        hit_tol = r_pri <= eps_pri and r_dual <= eps_dual
        if it % poll == 0 or hit_tol:
            polished = _polish(a, y, w, settings.penalize_first,
                               settings.feas_tol, settings.opt_tol,
                               mismatch=v - w)
            if polished is not None:
                pv, gap, feas = polished
                cert = Certificate(feasibility=feas, primal=r_pri,
                                   dual=r_dual, iterations=it, gap=gap)
                return pv, cert, WarmState(w=w, u=u, sigma=sigma)
            if it % poll == 0:
                # A limit-cycle stall: the multiplier drifts along the row
                # space at speed r_pri, so waiting out max_iter is hopeless.
                frozen = (r_dual <= 1e-12 * max(1.0, sigma * float(
                    np.linalg.norm(u)))
                    and abs(r_pri - last_poll_pri) <= 1e-3 * r_pri)
                stalled_polls = stalled_polls + 1 if frozen else 0
                last_poll_pri = r_pri
                if stalled_polls >= 3:
                    feas = float(np.linalg.norm(a @ v - y))
                    raise SolverFailure(
                        f"splitting stalled after {it} iterations "
                        f"(primal {r_pri:.3g}, dual {r_dual:.3g})",
                        feasibility=feas, primal=r_pri, dual=r_dual,
                        iterations=it)
        if hit_tol:
            # One refinement pass against the original rows pushes the
            # equality residual left by the whitening roundoff to noise.
            v = _refine_feasibility(a, lower, y, v)
            feas = float(np.linalg.norm(a @ v - y))
            if feas <= settings.feas_tol * max(1.0, float(np.linalg.norm(y))):
                cert = Certificate(feasibility=feas, primal=r_pri,
                                   dual=r_dual, iterations=it)
                return v, cert, WarmState(w=w, u=u, sigma=sigma)
    polished = _polish(a, y, w, settings.penalize_first, settings.feas_tol,
                       settings.opt_tol, mismatch=v - w)
    if polished is not None:
        pv, gap, feas = polished
        cert = Certificate(feasibility=feas, primal=r_pri, dual=r_dual,
                           iterations=settings.max_iter, gap=gap)
        return pv, cert, WarmState(w=w, u=u, sigma=sigma)
    feas = float(np.linalg.norm(a @ v - y))
    raise SolverFailure(
        f"splitting did not converge in {settings.max_iter} iterations "
        f"(primal {r_pri:.3g}, dual {r_dual:.3g}, feasibility {feas:.3g})",
        feasibility=feas, primal=r_pri, dual=r_dual,
        iterations=settings.max_iter)


def _fresh_state(n: int) -> WarmState:
    return WarmState(w=np.zeros(n), u=np.zeros(n), sigma=1.0)


def solve_measurements(f, y, settings: SolverSettings | None = None,
                       state: WarmState | None = None) -> ReconstructionResult:
    """solve_l1_diff without a ground-truth signal attached.

    Entry point for callers that only hold (F, y), such as the command-line
    solve path; validation and semantics are otherwise identical.
    """
    f = np.ascontiguousarray(np.asarray(f, dtype=np.float64))
    if f.ndim != 2:
        raise ShapeError(f"f must be a 2-D matrix, got ndim={f.ndim}")
    if not np.all(np.isfinite(f)):
        raise ShapeError("f must be finite")
    y = as_vector(y, "y")
    p, n = f.shape
    if not 1 <= p <= n:
        raise ShapeError(f"need 1 <= P <= N, got P={p}, N={n}")
    if len(y) != p:
        raise ShapeError(f"y has length {len(y)}, expected {p}")
    if settings is None:
        settings = SolverSettings()
    a = _transformed_matrix(f)
    lower = _gram_cholesky(a)
    if state is None:
        state = _fresh_state(n)
    v, cert, out_state = _solve_with_fallback(a, lower, y, settings, state)
    x_star = np.cumsum(v)
    return ReconstructionResult(x_star=x_star, objective=diff_objective(x_star),
                                certificate=cert, state=out_state)


def solve_l1_diff(problem: ReconstructionProblem,
                  settings: SolverSettings | None = None,
                  state: WarmState | None = None) -> ReconstructionResult:
    """Minimize the summed absolute differences subject to F x = y.

    Returns the minimizer, its cost, and a certificate with the equality
    residual and the final splitting residuals.  Raises SolverFailure rather
    than returning an unconverged answer.
    """
    return solve_measurements(problem.f, problem.y, settings, state)


class RowDeletionSolver:
    """Solves the reconstruction along one row-deletion trajectory.

    Rows are always dropped from the end, so every reduced constraint Gram
    matrix is a leading block of the full one and the Cholesky factor
    computed once here serves every P.  Warm-start state is private to the
    trajectory and refreshed after each solve; consecutive problems differ
    by one constraint, so the carried support usually certifies within the
    first polish poll.
    """

    def __init__(self, f, x0, settings: SolverSettings | None = None):
        self.settings = settings if settings is not None else SolverSettings()
        self.x0 = as_vector(x0, "x0")
        f = np.ascontiguousarray(np.asarray(f, dtype=np.float64))
        if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[1] != len(self.x0):
            raise ShapeError("f must be square and match x0")
        if not np.all(np.isfinite(f)):
            raise ShapeError("f must be finite")
        self.f = f
        self.y_full = f @ self.x0
        self._a = _transformed_matrix(f)
        self._lower = _gram_cholesky(self._a)
        self._state = _fresh_state(len(self.x0))

    def solve_at(self, p: int, cold: bool = False,
                 settings: SolverSettings | None = None) -> ReconstructionResult:
        n = len(self.x0)
        if not 1 <= p <= n:
            raise ParameterError(f"need 1 <= p <= {n}, got {p}")
        settings = settings if settings is not None else self.settings
        state = _fresh_state(n) if cold else self._state
        v, cert, new_state = _solve_with_fallback(
            self._a[:p], self._lower[:p, :p], self.y_full[:p], settings,
            state)
        self._state = new_state
        x_star = np.cumsum(v)
        return ReconstructionResult(x_star=x_star,
                                    objective=diff_objective(x_star),
                                    certificate=cert, state=new_state)
