"""Exact O(N) solvers for chain objectives with fused-difference penalties.

Two problems share one core routine:

* ``ChainProblem``: minimize over x

      sum_i (q_hat/2) x_i^2 - h_i x_i  +  sum_{i<N} |x_{i+1} - x_i|,

  which after completing the square is the total-variation proximal map of
  y = h/q_hat with penalty lam = 1/q_hat.

* ``LimitChainProblem``: minimize over xh

      sum_i (1/2) xh_i^2 - sqrt(chi_hat) z_i xh_i
      + sum_{pause edges} |xh_{i+1} - xh_i|
      + sum_{jump edges}  sgn(x0_i - x0_{i+1}) (xh_i - xh_{i+1}).

  Jump edges contribute linear tilts, so the problem decouples into
  independent TV proximal solves over the runs of pause edges.

The TV core is a dynamic program over the derivative of the Bellman function
(a nondecreasing piecewise-linear function stored as a deque of pieces with
deferred slope/intercept shifts), giving exact solutions in O(N) time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import as_bool_mask, as_vector
from .exceptions import ParameterError, ShapeError

NUMBA_AVAILABLE = True
try:
    import numba as nb
except ImportError:
    NUMBA_AVAILABLE = False

DEFAULT_TIE_TOL = 1e-9


def _tv_core(y, lam, x):
    """Fill x with argmin of 0.5*||x - y||^2 + lam * sum |x_{i+1} - x_i|.

    Forward pass: b_i, the derivative of the partial-minimum value function,
    is piecewise linear and nondecreasing.  Piece j of the deque is valid on
    [t[j], t[j+1]) and has value (a[j] + A)*x + (c[j] + C), where the global
    shifts A, C absorb the slope/intercept added by every later data term.
    Clipping b_i to [-lam, lam] trims pieces at both ends (amortized O(1))
    and records the clip points, which the backward pass uses directly.
    """
    n = y.size
    if n == 1 or lam == 0.0:
        x[:] = y
        return
    m = n - 1
    t = np.empty(2 * n + 2)
    a = np.empty(2 * n + 2)
    c = np.empty(2 * n + 2)
    lo = np.empty(m)
    hi = np.empty(m)
    head = tail = n
    t[head] = -np.inf
    a[head] = 0.0
    c[head] = 0.0
    A = 1.0  # b_1(x) = x - y[0]
    C = -y[0]
    for i in range(1, n):
        # left clip: first crossing of -lam
        while head < tail and (a[head] + A) * t[head + 1] + (c[head] + C) < -lam:
            head += 1
        b_lo = (-lam - c[head] - C) / (a[head] + A)
        # right clip: last crossing of +lam
        while tail > head and (a[tail] + A) * t[tail] + (c[tail] + C) > lam:
            tail -= 1
        b_hi = (lam - c[tail] - C) / (a[tail] + A)
        lo[i - 1] = b_lo
        hi[i - 1] = b_hi
        t[head] = b_lo
        head -= 1
        t[head] = -np.inf
        a[head] = -A  # constant -lam piece once shifts are applied
        c[head] = -lam - C
        tail += 1
        t[tail] = b_hi
        a[tail] = -A  # constant +lam piece
        c[tail] = lam - C
        A += 1.0
        C -= y[i]
    j = head
    while j < tail and (a[j] + A) * t[j + 1] + (c[j] + C) < 0.0:
        j += 1
    x[n - 1] = -(c[j] + C) / (a[j] + A)
    for i in range(n - 2, -1, -1):
        if x[i + 1] < lo[i]:
            x[i] = lo[i]
        elif x[i + 1] > hi[i]:
            x[i] = hi[i]
        else:
            x[i] = x[i + 1]


def _limit_core(h, pause, x):
    """Solve the tilted field h segment by segment over pause runs."""
    n = h.size
    start = 0
    for j in range(n - 1):
        if not pause[j]:
            _tv_core(h[start:j + 1], 1.0, x[start:j + 1])
            start = j + 1
    _tv_core(h[start:n], 1.0, x[start:n])


if NUMBA_AVAILABLE:
    _tv_core = nb.njit(cache=True, nogil=True)(_tv_core)
    _limit_core = nb.njit(cache=True, nogil=True)(_limit_core)


def tv_prox(y, lam: float) -> np.ndarray:
    """Exact total-variation proximal map: argmin 0.5||x-y||^2 + lam*TV(x)."""
    y = as_vector(y, "y")
    if not np.isfinite(lam) or lam < 0.0:
        raise ParameterError(f"lam must be finite and >= 0, got {lam}")
    x = np.empty_like(y)
    _tv_core(y, float(lam), x)
    return x


@dataclass(frozen=True)
class ChainProblem:
    """Quadratic chain with unit fused-difference penalty on every edge."""

    h: np.ndarray
    q_hat: float

    def __post_init__(self):
        object.__setattr__(self, "h", as_vector(self.h, "h"))
        if not np.isfinite(self.q_hat) or self.q_hat <= 0.0:
            raise ParameterError(f"q_hat must be finite and > 0, got {self.q_hat}")

    @property
    def n(self) -> int:
        return self.h.size


def solve_chain(problem: ChainProblem) -> np.ndarray:
    """Exact minimizer of the chain objective."""
    q = problem.q_hat
    return tv_prox(problem.h / q, 1.0 / q)


@dataclass(frozen=True)
class LimitChainProblem:
    """Zero-temperature local field problem tied to a reference signal x0.

    ``pause`` marks the edges where x0 paused (so the difference penalty
    stays a kink); on the remaining edges x0 jumped and the penalty
    linearizes to its slope there.  When ``pause`` is None it is recovered
    from exact value equality in x0, which matches the generator's moves
    because pauses copy values bitwise.
    """

    x0: np.ndarray
    z: np.ndarray
    chi_hat: float
    pause: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "x0", as_vector(self.x0, "x0"))
        object.__setattr__(self, "z", as_vector(self.z, "z"))
        if self.z.size != self.x0.size:
            raise ShapeError(
                f"x0 and z must have equal length, got {self.x0.size} and {self.z.size}")
        if not np.isfinite(self.chi_hat) or self.chi_hat <= 0.0:
            raise ParameterError(f"chi_hat must be finite and > 0, got {self.chi_hat}")
        if self.pause is not None:
            object.__setattr__(
                self, "pause", as_bool_mask(self.pause, self.x0.size - 1, "pause"))

    @property
    def n(self) -> int:
        return self.x0.size

    def pause_edges(self) -> np.ndarray:
        if self.pause is not None:
            return self.pause
        return self.x0[1:] == self.x0[:-1]

    def tilted_field(self) -> np.ndarray:
        """Gaussian field with the jump-edge slopes folded in as tilts."""
        h = np.sqrt(self.chi_hat) * self.z
        pause = self.pause_edges()
        jumps = np.flatnonzero(~pause)
        g = np.sign(self.x0[jumps] - self.x0[jumps + 1])
        np.subtract.at(h, jumps, g)
        np.add.at(h, jumps + 1, g)
        return h


def solve_limit_chain(problem: LimitChainProblem) -> np.ndarray:
    """Exact minimizer of the zero-temperature local field problem."""
    h = problem.tilted_field()
    pause = problem.pause_edges()
    x = np.empty_like(h)
    _limit_core(h, np.ascontiguousarray(pause), x)
    return x


def count_blocks(x, tie_tol: float = DEFAULT_TIE_TOL) -> int:
    """Number of maximal constant runs, with ties below tie_tol merged."""
    x = as_vector(x, "x")
    if not np.isfinite(tie_tol) or tie_tol < 0.0:
        raise ParameterError(f"tie_tol must be finite and >= 0, got {tie_tol}")
    return 1 + int(np.count_nonzero(np.abs(np.diff(x)) > tie_tol))


def count_blocks_segmented(x, pause, tie_tol: float = DEFAULT_TIE_TOL) -> int:
    """Blocks of x where non-pause edges always cut, even at equal values."""
    x = as_vector(x, "x")
    pause = as_bool_mask(pause, x.size - 1, "pause")
    cuts = (~pause) | (np.abs(np.diff(x)) > tie_tol)
    return 1 + int(np.count_nonzero(cuts))


def at_metric(problem: ChainProblem, x_star, tie_tol: float = DEFAULT_TIE_TOL) -> float:
    """Normalized squared sensitivity of the solution to its field.

    Within a constant block B the solution responds to the field only
    through the block average, so dx_j/dh_k = 1/(|B| q_hat) for j, k in B
    and 0 across blocks.  Summing the squares over j, k and dividing by N
    gives (number of blocks) / (N q_hat^2).
    """
    x_star = as_vector(x_star, "x_star")
    if x_star.size != problem.n:
        raise ShapeError(
            f"x_star must match problem size {problem.n}, got {x_star.size}")
    blocks = count_blocks(x_star, tie_tol)
    return blocks / (problem.n * problem.q_hat ** 2)


def certificate_gap(problem: ChainProblem, x, jump_tol: float = DEFAULT_TIE_TOL) -> float:
    """Worst violation of the optimality conditions at x.

    The running sums s_k = sum_{i<=k} (q_hat x_i - h_i) are the edge
    subgradients: |s_k| <= 1 everywhere, s_k = +-1 on edges where x jumps
    up/down, and s_N = 0.  Returns the largest violated margin; an exact
    minimizer gives a value at rounding level.
    """
    x = as_vector(x, "x")
    if x.size != problem.n:
        raise ShapeError(f"x must match problem size {problem.n}, got {x.size}")
    s = np.cumsum(problem.q_hat * x - problem.h)
    gap = abs(float(s[-1]))
    if x.size > 1:
        gap = max(gap, float(np.max(np.abs(s[:-1]))) - 1.0)
        d = np.diff(x)
        up = d > jump_tol
        down = d < -jump_tol
        if np.any(up):
            gap = max(gap, float(np.max(np.abs(s[:-1][up] - 1.0))))
        if np.any(down):
            gap = max(gap, float(np.max(np.abs(s[:-1][down] + 1.0))))
    return gap


def limit_certificate_gap(problem: LimitChainProblem, x,
                          jump_tol: float = DEFAULT_TIE_TOL) -> float:
    """Optimality gap for the limit problem via its tilted segments."""
    x = as_vector(x, "x")
    if x.size != problem.n:
        raise ShapeError(f"x must match problem size {problem.n}, got {x.size}")
    h = problem.tilted_field()
    pause = problem.pause_edges()
    gap = 0.0
    start = 0
    bounds = list(np.flatnonzero(~pause)) + [problem.n - 1]
    for j in bounds:
        seg = ChainProblem(h=h[start:j + 1], q_hat=1.0)
        gap = max(gap, certificate_gap(seg, x[start:j + 1], jump_tol))
        start = j + 1
    return gap
