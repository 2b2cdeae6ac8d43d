"""Signal model: distributional properties, determinism, edge regimes."""

import numpy as np
import pytest
from scipy import integrate, stats

from sarcs.exceptions import ParameterError, ShapeError
from sarcs.sar import (IncrementMixture, SarParams, as_signal, generate_signal,
                       generate_signal_parts, increment_density, pause_mask,
                       rng_for, second_moment)


def test_params_domain():
    SarParams(rho=0.0, r=0.0)
    SarParams(rho=1.0, r=1.0)
    for rho, r in [(-0.1, 0.5), (1.1, 0.5), (0.5, -0.01), (0.5, 1.5),
                   (float("nan"), 0.5), (0.5, float("nan"))]:
        with pytest.raises(ParameterError):
            SarParams(rho=rho, r=r)


def test_generation_is_deterministic():
    params = SarParams(rho=0.4, r=0.7)
    a = generate_signal(params, 300, seed=123)
    b = generate_signal(params, 300, seed=123)
    assert a.dtype == np.float64 and a.shape == (300,)
    assert np.array_equal(a, b)
    c = generate_signal(params, 300, seed=124)
    assert not np.array_equal(a, c)
    # tuple seeds key independent streams
    d = generate_signal(params, 300, seed=(123, 5))
    assert not np.array_equal(a, d)


def test_seed_validation():
    with pytest.raises(ParameterError):
        rng_for(-1)
    with pytest.raises(ParameterError):
        rng_for((3, -2))


def test_pauses_are_bitwise_and_match_moves():
    params = SarParams(rho=0.5, r=0.6)
    for seed in range(30):
        x, moves = generate_signal_parts(params, 200, rng_for(seed))
        eq = x[1:] == x[:-1]
        # moves never land exactly on the previous value (prob. zero event)
        assert np.array_equal(eq, ~moves)
        assert np.array_equal(pause_mask(x), ~moves)


def test_r_one_moves_preserve_value_exactly():
    # with r = 1 the innovation scale is 0, so moves copy the value too
    params = SarParams(rho=0.7, r=1.0)
    for seed in range(10):
        x, _ = generate_signal_parts(params, 100, rng_for(seed))
        assert np.all(x == x[0])


def test_rho_edge_regimes():
    const = generate_signal(SarParams(rho=0.0, r=0.3), 50, seed=7)
    assert np.all(const == const[0])
    dense = generate_signal(SarParams(rho=1.0, r=0.0), 2000, seed=7)
    assert not np.any(dense[1:] == dense[:-1])


def test_single_sample_signal():
    x = generate_signal(SarParams(rho=0.5, r=0.5), 1, seed=0)
    assert x.shape == (1,)
    with pytest.raises(ParameterError):
        generate_signal(SarParams(rho=0.5, r=0.5), 0, seed=0)


def test_move_conditional_law():
    # conditional on a move, (x_{i+1} - r x_i)/sqrt(1-r^2) is standard normal
    params = SarParams(rho=0.5, r=0.8)
    resid = []
    for seed in range(60):
        x, moves = generate_signal_parts(params, 400, rng_for(seed))
        idx = np.flatnonzero(moves)
        resid.append((x[idx + 1] - params.r * x[idx]) / np.sqrt(1 - params.r ** 2))
    resid = np.concatenate(resid)
    m = resid.size
    assert abs(np.mean(resid)) < 4.0 / np.sqrt(m)
    assert abs(np.var(resid) - 1.0) < 4.0 * np.sqrt(2.0 / m)
    assert abs(np.mean(moves)) - params.rho < 4.0 * np.sqrt(0.25 / moves.size)


def test_moved_values_are_standard_normal_whitenoise():
    # with r=0 every move draws a fresh N(0,1) value
    params = SarParams(rho=0.5, r=0.0)
    drawn = []
    seed = 0
    while sum(len(d) for d in drawn) < 10_000:
        x, moves = generate_signal_parts(params, 700, rng_for(900, seed))
        drawn.append(x[np.flatnonzero(moves) + 1])
        seed += 1
    sample = np.concatenate(drawn)
    assert stats.kstest(sample, "norm").pvalue > 0.01


def test_stationary_second_moment():
    # unit marginal variance at every position, not just the first
    params = SarParams(rho=0.3, r=0.9)
    assert second_moment(params) == 1.0
    acc = np.zeros(50)
    k = 4000
    for seed in range(k):
        acc += generate_signal(params, 50, seed=(9, seed)) ** 2
    mean_sq = acc / k
    assert np.all(np.abs(mean_sq - 1.0) < 5.0 * np.sqrt(3.0 / k))


def test_increment_density_structure():
    params = SarParams(rho=0.4, r=0.6)
    mix = increment_density(params, x_prev=1.5)
    assert mix.atom_weight == 0.6 and mix.atom_location == 1.5
    assert mix.gauss_weight == 0.4
    assert mix.gauss_mean == pytest.approx(0.9)
    assert mix.gauss_var == pytest.approx(0.64)
    assert mix.atom_weight + mix.gauss_weight == pytest.approx(1.0)
    # continuous part integrates to its weight
    mass, _ = integrate.quad(mix.gauss_pdf, -30, 30)
    assert mass == pytest.approx(mix.gauss_weight, abs=1e-10)
    with pytest.raises(ParameterError):
        increment_density(params, x_prev=float("inf"))


def test_increment_density_moments_match_simulation():
    params = SarParams(rho=0.5, r=0.3)
    x_prev = -0.8
    mix = increment_density(params, x_prev)
    rng = rng_for(77)
    draws = np.where(rng.random(200000) < params.rho,
                     params.r * x_prev + np.sqrt(1 - params.r ** 2)
                     * rng.standard_normal(200000),
                     x_prev)
    assert np.mean(draws) == pytest.approx(mix.mean(), abs=0.01)
    assert np.mean(draws ** 2) == pytest.approx(mix.second_moment(), abs=0.01)


def test_increment_density_degenerate_r():
    mix = increment_density(SarParams(rho=0.5, r=1.0), x_prev=0.3)
    assert mix.gauss_var == 0.0
    with pytest.raises(ParameterError):
        mix.gauss_pdf(0.0)
    assert mix.second_moment() == pytest.approx(0.09)


def test_as_signal_validation():
    with pytest.raises(ShapeError):
        as_signal(np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        as_signal(np.array([]))
    with pytest.raises(ShapeError):
        as_signal(np.array([1.0, np.nan]))
    out = as_signal([1, 2, 3])
    assert out.dtype == np.float64


def test_mixture_mean_consistency():
    # E[x_{i+1} | x_i] = ((1-rho) + rho*r) * x_i
    params = SarParams(rho=0.25, r=0.5)
    mix = increment_density(params, 2.0)
    assert mix.mean() == pytest.approx((0.75 + 0.25 * 0.5) * 2.0)
    assert isinstance(mix, IncrementMixture)
