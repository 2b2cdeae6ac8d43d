"""Chain solvers: closed forms, independent oracles, optimality certificates."""

import numpy as np
import pytest

from oracles import (chain_enumerate, chain_objective, chain_oracle,
                     limit_eps_admm, numeric_jacobian_metric, tv_prox_grid_2d)
from sarcs.chain import (ChainProblem, LimitChainProblem, at_metric,
                         certificate_gap, count_blocks, count_blocks_segmented,
                         limit_certificate_gap, solve_chain, solve_limit_chain,
                         tv_prox)
from sarcs.exceptions import ParameterError, ShapeError
from sarcs.sar import SarParams, generate_signal_parts, rng_for


def test_tv_prox_closed_forms():
    assert np.allclose(tv_prox([1.0, 0.0], 0.25), [0.75, 0.25], atol=1e-14)
    assert np.allclose(tv_prox([1.0, 0.0], 1.0), [0.5, 0.5], atol=1e-14)
    assert np.allclose(tv_prox([3.0, 3.0], 0.7), [3.0, 3.0], atol=1e-14)
    assert np.allclose(tv_prox([1.0, 2.0, 3.0], 0.5), [1.5, 2.0, 2.5], atol=1e-14)
    assert np.allclose(tv_prox([5.0], 2.0), [5.0])
    assert np.allclose(tv_prox([4.0, -1.0, 2.0], 0.0), [4.0, -1.0, 2.0])


def test_tv_prox_asymmetric_tube_exit():
    # regression: both tube walls are hit in one sweep; the later segment
    # must restart with consistent state
    x = tv_prox(np.array([-3.8, 0.3, -0.0]), 1.0)
    assert np.allclose(x, [-2.8, -0.35, -0.35], atol=1e-12)


def test_tv_prox_against_2d_brute_force():
    rng = rng_for(42)
    for _ in range(50):
        y = rng.standard_normal(2) * 2
        lam = float(rng.gamma(1.0) + 0.01)
        ours = tv_prox(y, lam)
        brute = tv_prox_grid_2d(y, lam)
        assert np.allclose(ours, brute, atol=1e-6)


def test_solve_chain_matches_enumeration_small_n():
    rng = rng_for(1)
    for trial in range(300):
        n = int(rng.integers(1, 6))
        h = (rng.standard_normal(n) if trial % 2
             else np.repeat(rng.standard_normal(n), 2)[:n])
        q = float(rng.choice([0.1, 1.0, 3.0]))
        p = ChainProblem(h=h, q_hat=q)
        x = solve_chain(p)
        if n >= 2:
            ref = chain_enumerate(h, q)
            assert np.max(np.abs(x - ref)) < 1e-10
        assert certificate_gap(p, x) < 1e-10


def test_solve_chain_matches_interior_point_oracle():
    rng = rng_for(2)
    for trial in range(100):
        n = int(rng.integers(2, 11))
        h = (rng.standard_normal(n) * 3 if trial % 2
             else np.repeat(rng.standard_normal(n), 3)[:n])
        q = float(rng.choice([0.05, 0.5, 1.0, 4.0]))
        x = solve_chain(ChainProblem(h=h, q_hat=q))
        ref = chain_oracle(h, q)
        assert np.max(np.abs(x - ref)) < 1e-8


def test_certificate_and_mean_identity_large_n():
    # sum(q x - h) telescopes to the free boundary condition exactly
    rng = rng_for(3)
    for _ in range(50):
        n = int(rng.integers(2, 5000))
        h = rng.standard_normal(n)
        q = float(rng.gamma(2.0) + 0.05)
        p = ChainProblem(h=h, q_hat=q)
        x = solve_chain(p)
        assert certificate_gap(p, x) < 1e-8
        assert abs(np.sum(q * x - h)) < 1e-8 * n


def test_chain_objective_never_above_oracle():
    rng = rng_for(4)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        h = rng.standard_normal(n)
        q = 1.3
        x = solve_chain(ChainProblem(h=h, q_hat=q))
        ref = chain_oracle(h, q)
        assert chain_objective(h, q, x) <= chain_objective(h, q, ref) + 1e-9


def test_chain_validation():
    with pytest.raises(ParameterError):
        ChainProblem(h=np.ones(3), q_hat=0.0)
    with pytest.raises(ParameterError):
        ChainProblem(h=np.ones(3), q_hat=-1.0)
    with pytest.raises(ShapeError):
        ChainProblem(h=np.ones((2, 2)), q_hat=1.0)
    with pytest.raises(ParameterError):
        tv_prox(np.ones(3), -0.5)


def test_limit_chain_monotone_reference_closed_form():
    # strictly monotone x0 makes every edge a tilt; interior tilts cancel
    rng = rng_for(5)
    n = 9
    z = rng.standard_normal(n)
    chi = 0.7
    for sign in (+1.0, -1.0):
        x0 = sign * np.arange(n, dtype=float)
        xh = solve_limit_chain(LimitChainProblem(x0=x0, z=z, chi_hat=chi))
        expect = np.sqrt(chi) * z
        expect[0] += sign
        expect[-1] -= sign
        assert np.allclose(xh, expect, atol=1e-12)


def test_limit_chain_all_pause_is_tv_prox():
    rng = rng_for(6)
    n = 40
    z = rng.standard_normal(n)
    x0 = np.full(n, 1.7)
    chi = 2.0
    xh = solve_limit_chain(LimitChainProblem(x0=x0, z=z, chi_hat=chi))
    assert np.allclose(xh, tv_prox(np.sqrt(chi) * z, 1.0), atol=1e-14)


def test_limit_chain_explicit_pause_mask_matches_value_equality():
    params = SarParams(rho=0.5, r=0.5)
    for seed in range(20):
        g = rng_for(seed, 10)
        x0, moves = generate_signal_parts(params, 80, g)
        z = g.standard_normal(80)
        a = solve_limit_chain(LimitChainProblem(x0=x0, z=z, chi_hat=5.0,
                                                pause=~moves))
        b = solve_limit_chain(LimitChainProblem(x0=x0, z=z, chi_hat=5.0))
        assert np.array_equal(a, b)


def test_limit_chain_matches_eps_regularized_oracle():
    params = SarParams(rho=0.5, r=0.0)
    worst = 0.0
    for seed in range(40):
        g = rng_for(seed, 11)
        n = int(g.integers(2, 60))
        x0, moves = generate_signal_parts(params, n, g)
        z = g.standard_normal(n)
        chi = float(g.random() * 8 + 0.2)
        p = LimitChainProblem(x0=x0, z=z, chi_hat=chi, pause=~moves)
        xh = solve_limit_chain(p)
        ref = limit_eps_admm(x0, z, chi, eps=1e-6)
        worst = max(worst, float(np.max(np.abs(xh - ref))))
        assert limit_certificate_gap(p, xh) < 1e-10
    assert worst < 1e-5


def test_limit_chain_is_finite_stiffness_limit():
    # (alpha/chi)(x* - x0) from the full chain converges to the limit solve
    params = SarParams(rho=0.5, r=0.5)
    g = rng_for(12)
    x0, moves = generate_signal_parts(params, 60, g)
    z = g.standard_normal(60)
    chi_hat, alpha, chi = 6.0, 0.85, 1e-5
    q = alpha / chi
    x_star = solve_chain(ChainProblem(h=q * x0 + np.sqrt(chi_hat) * z, q_hat=q))
    xh = solve_limit_chain(LimitChainProblem(x0=x0, z=z, chi_hat=chi_hat,
                                             pause=~moves))
    assert np.max(np.abs((x_star - x0) / chi * alpha - xh)) < 1e-6


def test_limit_chain_validation():
    with pytest.raises(ShapeError):
        LimitChainProblem(x0=np.ones(4), z=np.ones(3), chi_hat=1.0)
    with pytest.raises(ParameterError):
        LimitChainProblem(x0=np.ones(3), z=np.ones(3), chi_hat=0.0)
    with pytest.raises(ShapeError):
        LimitChainProblem(x0=np.ones(3), z=np.ones(3), chi_hat=1.0,
                          pause=np.array([True, False, True]))


def test_solver_map_is_nonexpansive_in_h():
    rng = rng_for(31)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        q = float(rng.choice([0.3, 1.0, 2.5]))
        h1 = rng.standard_normal(n) * 2
        h2 = h1 + rng.standard_normal(n) * rng.random()
        d_out = np.linalg.norm(solve_chain(ChainProblem(h=h1, q_hat=q))
                               - solve_chain(ChainProblem(h=h2, q_hat=q)))
        assert d_out <= np.linalg.norm(h1 - h2) / q + 1e-12


def test_large_curvature_pins_solution_to_field():
    rng = rng_for(32)
    for q in (0.5, 5.0, 500.0):
        h = rng.standard_normal(30) * 3
        x = solve_chain(ChainProblem(h=h, q_hat=q))
        # each entry feels at most two unit subgradients
        assert np.max(np.abs(x - h / q)) <= 2.0 / q + 1e-12


def test_raising_one_field_entry_never_lowers_solution():
    rng = rng_for(33)
    for trial in range(25):
        n = int(rng.integers(2, 20))
        q = float(rng.choice([0.5, 1.0, 3.0]))
        h = rng.standard_normal(n)
        base = solve_chain(ChainProblem(h=h, q_hat=q))
        bump = h.copy()
        bump[int(rng.integers(n))] += float(rng.random() * 2 + 0.1)
        hit = solve_chain(ChainProblem(h=bump, q_hat=q))
        assert np.all(hit >= base - 1e-12), trial


def test_count_blocks():
    assert count_blocks([1.0, 1.0, 1.0]) == 1
    assert count_blocks([1.0, 2.0, 2.0, 0.5]) == 3
    assert count_blocks([3.0]) == 1
    # ties below tolerance merge
    assert count_blocks([0.0, 1e-12, 1.0]) == 2
    assert count_blocks([0.0, 1e-12, 1.0], tie_tol=0.0) == 3
    with pytest.raises(ParameterError):
        count_blocks([1.0, 2.0], tie_tol=-1.0)


def test_count_blocks_segmented_cuts_on_jump_edges():
    x = np.array([2.0, 2.0, 2.0])
    pause = np.array([True, False])
    # equal values still split where the edge is a jump
    assert count_blocks_segmented(x, pause) == 2
    assert count_blocks_segmented(x, np.array([True, True])) == 1


def test_at_metric_formula():
    p = ChainProblem(h=np.array([4.0, 4.0, -1.0, 8.0]), q_hat=2.0)
    x = np.array([1.0, 1.0, 0.5, 2.0])
    assert at_metric(p, x) == pytest.approx(3 / (4 * 4.0))
    with pytest.raises(ShapeError):
        at_metric(p, np.ones(3))


def test_at_metric_matches_numeric_jacobian():
    rng = rng_for(13)
    done = 0
    while done < 20:
        n = int(rng.integers(2, 30))
        h = rng.standard_normal(n) * 2
        q = float(rng.choice([0.5, 1.0, 2.0]))
        p = ChainProblem(h=h, q_hat=q)
        x = solve_chain(p)
        # skip degenerate instances where a block sits at a merge boundary
        s = np.cumsum(q * x - h)[:-1]
        if np.any(np.abs(np.abs(s) - 1.0) < 1e-4) or count_blocks(x) != count_blocks(x, 1e-6):
            continue
        ref = numeric_jacobian_metric(
            h, q, lambda hh, qq: solve_chain(ChainProblem(h=hh, q_hat=qq)))
        assert at_metric(p, x) == pytest.approx(ref, rel=1e-6)
        done += 1


def test_python_fallback_matches_jitted_core():
    from sarcs import chain as chain_mod

    if not chain_mod.NUMBA_AVAILABLE:
        pytest.skip("numba not installed; only one implementation present")
    rng = rng_for(14)
    for _ in range(50):
        n = int(rng.integers(1, 200))
        y = rng.standard_normal(n)
        lam = float(rng.gamma(1.0) + 0.01)
        a = np.empty(n)
        b = np.empty(n)
        chain_mod._tv_core(y, lam, a)
        chain_mod._tv_core.py_func(y, lam, b)
        assert np.array_equal(a, b)
