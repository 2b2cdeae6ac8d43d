"""Monte Carlo solution of the coupled critical-point equations.

The critical compression rate alpha_c and conjugate variance chi_hat solve

    chi_hat = E[ (1/N) sum_j xh_j^2 ] / alpha_c
    alpha_c = E[ (1/N) sum_j z_j xh_j ] / sqrt(chi_hat)

where xh minimizes the zero-stiffness chain objective for a fresh signal x0
and Gaussian field z (see ``chain.LimitChainProblem``).  The expectations are
sample averages over (x0, z); the pair (alpha, chi_hat) is iterated with
damping until the relative update falls below tolerance, then averaged over
a trailing window to suppress Monte Carlo noise.

``baseline_alpha_c`` solves the same two equations for the memoryless prior
on increments (point mass at zero with weight 1-rho plus a unit Gaussian),
where both expectations reduce to closed forms in the normal CDF, giving the
reference threshold the chain-aware computation is compared against.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .chain import (DEFAULT_TIE_TOL, LimitChainProblem, count_blocks_segmented,
                    solve_limit_chain)
from .exceptions import ConditioningError, ParameterError, SolverFailure
from .sar import SarParams, generate_signal_parts, rng_for

_ALPHA_INIT = 0.9
_CHI_HAT_INIT = 1.0
_DIVERGENCE_BOUNDS = (1e-12, 1e12)


@dataclass(frozen=True)
class ReplicaConfig:
    """Iteration sizes and seeds for the Monte Carlo fixed point."""

    n: int = 2000
    samples: int = 1000
    damping: float = 0.5
    tol: float = 1e-4
    max_iter: int = 500
    seed: int = 0
    avg_window: int = 20
    increment_coordinates: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        if self.samples < 1:
            raise ParameterError(f"samples must be >= 1, got {self.samples}")
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError(f"damping must be in (0, 1], got {self.damping}")
        if not self.tol > 0.0:
            raise ParameterError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.avg_window < 1:
            raise ParameterError(f"avg_window must be >= 1, got {self.avg_window}")
        if self.threads < 1:
            raise ParameterError(f"threads must be >= 1, got {self.threads}")
        if self.seed < 0:
            raise ParameterError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class McMoments:
    """Sample means and standard errors of the two chain moments."""

    s2: float
    sz: float
    s2_stderr: float
    sz_stderr: float
    samples: int


@dataclass(frozen=True)
class ReplicaFixedPoint:
    """Converged (or best-effort) solution of the critical-point equations."""

    alpha: float
    chi_hat: float
    alpha_stderr: float
    chi_hat_stderr: float
    iterations: int
    converged: bool
    final_moments: McMoments

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(
                f"fixed-point alpha must lie in (0, 1], got {self.alpha}; "
                f"the iteration is degenerate at these parameters")
        if not self.chi_hat > 0.0:
            raise ParameterError(f"chi_hat must be > 0, got {self.chi_hat}")

    def residuals(self) -> tuple[float, float]:
        """Fixed-point residuals |chi*alpha - s2| and |alpha*sqrt(chi) - sz|."""
        return (abs(self.chi_hat * self.alpha - self.final_moments.s2),
                abs(self.alpha * math.sqrt(self.chi_hat) - self.final_moments.sz))


@dataclass(frozen=True)
class StabilityReport:
    """Monte Carlo estimate of the replica-symmetry stability metric."""

    metric: float
    stderr: float
    samples: int


def _one_sample(params: SarParams, chi_hat: float, config: ReplicaConfig,
                sweep: int, k: int) -> tuple[float, float]:
    rng = rng_for(config.seed, sweep, k)
    x0, moves = generate_signal_parts(params, config.n, rng)
    z = rng.standard_normal(config.n)
    pause = ~moves if config.increment_coordinates else None
    xh = solve_limit_chain(LimitChainProblem(x0=x0, z=z, chi_hat=chi_hat,
                                             pause=pause))
    return float(np.mean(xh * xh)), float(np.mean(z * xh))


def mc_moments(params: SarParams, chi_hat: float, config: ReplicaConfig,
               sweep: int) -> McMoments:
    """One sweep of fresh samples at the given chi_hat.

    The stream for sample k is keyed by (config.seed, sweep, k), so results
    are reproducible bit for bit regardless of thread count.
    """
    if not np.isfinite(chi_hat) or chi_hat <= 0.0:
        raise ParameterError(f"chi_hat must be finite and > 0, got {chi_hat}")
    if sweep < 0:
        raise ParameterError(f"sweep must be >= 0, got {sweep}")
    m = config.samples
    s2 = np.empty(m)
    sz = np.empty(m)

    def run_block(lo: int, hi: int):
        for k in range(lo, hi):
            s2[k], sz[k] = _one_sample(params, chi_hat, config, sweep, k)

    if config.threads == 1 or m < 2 * config.threads:
        run_block(0, m)
    else:
        step = -(-m // config.threads)
        bounds = [(i, min(i + step, m)) for i in range(0, m, step)]
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(lambda b: run_block(*b), bounds))
    denom = math.sqrt(m) if m > 1 else 1.0
    return McMoments(
        s2=float(np.mean(s2)),
        sz=float(np.mean(sz)),
        s2_stderr=float(np.std(s2, ddof=1) / denom) if m > 1 else float("inf"),
        sz_stderr=float(np.std(sz, ddof=1) / denom) if m > 1 else float("inf"),
        samples=m,
    )


def solve_alpha_c(params: SarParams, config: ReplicaConfig | None = None) -> ReplicaFixedPoint:
    """Damped Monte Carlo iteration of the coupled critical-point updates.

    Updates chi_hat <- s2/alpha and alpha <- sz/sqrt(chi_hat) from fresh
    sweeps, mixed with weight ``damping``.  Stops when both relative changes
    (after damping) drop below ``tol``; the returned values average the last
    ``avg_window`` iterates either way, with ``converged`` recording whether
    the tolerance was met.
    """
    if config is None:
        config = ReplicaConfig()
    alpha = _ALPHA_INIT
    chi = _CHI_HAT_INIT
    alphas = []
    chis = []
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        mom = mc_moments(params, chi, config, sweep=it)
        chi_new = (1.0 - config.damping) * chi + config.damping * (mom.s2 / alpha)
        alpha_new = (1.0 - config.damping) * alpha + config.damping * (
            mom.sz / math.sqrt(chi))
        rel = max(abs(chi_new - chi) / abs(chi), abs(alpha_new - alpha) / abs(alpha))
        alpha, chi = alpha_new, chi_new
        lo, hi = _DIVERGENCE_BOUNDS
        if not (lo < alpha < hi) or not (lo < chi < hi) or not math.isfinite(alpha + chi):
            raise SolverFailure(
                f"fixed-point iteration left the admissible region at "
                f"iteration {it} (alpha={alpha:.3g}, chi_hat={chi:.3g}); the "
                f"critical point is degenerate at rho={params.rho}, r={params.r}",
                iterations=it)
        alphas.append(alpha)
        chis.append(chi)
        if rel < config.tol:
            converged = True
            break
    w = min(config.avg_window, len(alphas))
    tail_a = np.array(alphas[-w:])
    tail_c = np.array(chis[-w:])
    alpha_hat = float(np.mean(tail_a))
    chi_hat = float(np.mean(tail_c))
    # Damped iterates are AR(1)-correlated across sweeps (coefficient about
    # 1 - damping), so shrink the window to an effective sample count.
    a = 1.0 - config.damping
    k_eff = max(1.0, w * (1.0 - a) / (1.0 + a))
    if w > 1:
        scatter_a = float(np.std(tail_a, ddof=1) / math.sqrt(k_eff))
        scatter_c = float(np.std(tail_c, ddof=1) / math.sqrt(k_eff))
    else:
        scatter_a = scatter_c = float("inf")
    final = mc_moments(params, chi_hat, config, sweep=config.max_iter + 1)
    alpha_stderr = max(scatter_a, final.sz_stderr / math.sqrt(chi_hat))
    chi_stderr = max(scatter_c, final.s2_stderr / alpha_hat)
    return ReplicaFixedPoint(
        alpha=alpha_hat,
        chi_hat=chi_hat,
        alpha_stderr=alpha_stderr,
        chi_hat_stderr=chi_stderr,
        iterations=it,
        converged=converged,
        final_moments=final,
    )


def stability_report(params: SarParams, fixed_point: ReplicaFixedPoint,
                     config: ReplicaConfig | None = None,
                     tie_tol: float = DEFAULT_TIE_TOL) -> StabilityReport:
    """Replica-symmetry stability metric at the fixed point.

    The squared field sensitivity of the chain minimizer sums to the block
    count over N q_hat^2, which after the critical rescaling becomes
    E[blocks] / (N alpha).  Values above 1 indicate the symmetric solution
    is locally unstable; the metric is reported, not asserted.
    """
    if config is None:
        config = ReplicaConfig()
    if not fixed_point.converged:
        # Tail-averaged results that never tripped the tolerance are still
        # usable when they satisfy the converged-point residual criterion.
        r_chi, r_alpha = fixed_point.residuals()
        fm = fixed_point.final_moments
        if r_chi > 3.0 * fm.s2_stderr or r_alpha > 3.0 * fm.sz_stderr:
            raise ParameterError(
                "stability_report needs a converged fixed point; residuals "
                f"({r_chi:.3g}, {r_alpha:.3g}) exceed 3 standard errors "
                f"({3 * fm.s2_stderr:.3g}, {3 * fm.sz_stderr:.3g})")
    m = config.samples
    vals = np.empty(m)
    for k in range(m):
        rng = rng_for(config.seed, config.max_iter + 2, k)
        x0, moves = generate_signal_parts(params, config.n, rng)
        z = rng.standard_normal(config.n)
        pause = ~moves if config.increment_coordinates else None
        p = LimitChainProblem(x0=x0, z=z, chi_hat=fixed_point.chi_hat, pause=pause)
        xh = solve_limit_chain(p)
        blocks = count_blocks_segmented(xh, p.pause_edges(), tie_tol)
        vals[k] = blocks / (config.n * fixed_point.alpha)
    stderr = float(np.std(vals, ddof=1) / math.sqrt(m)) if m > 1 else float("inf")
    return StabilityReport(metric=float(np.mean(vals)), stderr=stderr, samples=m)


def baseline_moments(rho: float, sigma: float) -> tuple[float, float]:
    """Closed-form (s2, sz) for the memoryless increment prior at sigma.

    Zero increments give xh = soft-threshold(sigma z, 1); nonzero ones give
    xh = sigma z - sign, with the sign independent of z.  Both Gaussian
    integrals reduce to the normal tail Q and density phi:

        E[soft(sigma z, 1)^2] = 2 (sigma^2 + 1) Q(1/sigma) - 2 sigma phi(1/sigma)
        E[z soft(sigma z, 1)] = 2 sigma Q(1/sigma)
    """
    if sigma <= 0.0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    tau = 1.0 / sigma
    q_tail = float(ndtr(-tau))
    phi = math.exp(-0.5 * tau * tau) / math.sqrt(2.0 * math.pi)
    soft_sq = 2.0 * ((sigma * sigma + 1.0) * q_tail - sigma * phi)
    soft_z = 2.0 * sigma * q_tail
    s2 = (1.0 - rho) * soft_sq + rho * (sigma * sigma + 1.0)
    sz = (1.0 - rho) * soft_z + rho * sigma
    return s2, sz


def baseline_alpha_c(rho: float) -> float:
    """Critical rate for the memoryless increment prior, by root finding.

    The two fixed-point equations collapse to one scalar condition
    s2(sigma) = sigma * sz(sigma) with a unique root, after which
    alpha_c = sz(sigma)/sigma = rho + 2 (1-rho) Q(1/sigma).
    """
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie strictly inside (0, 1), got {rho}")

    def f(sigma: float) -> float:
        s2, sz = baseline_moments(rho, sigma)
        return sigma * sz - s2

    lo = 1e-8
    hi = 2.0
    while f(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise ConditioningError("no sign change found for the critical condition")
    sigma = brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16)
    _, sz = baseline_moments(rho, sigma)
    return sz / sigma
