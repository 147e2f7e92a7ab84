import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad, solve_ivp

from lrpbandit.params import BanditParams, derived_constants
from lrpbandit.pdmp import (
    cumulative_intensity,
    default_bins,
    ergodic_moments,
    flow,
    generator,
    invert_intensity,
    occupation_histogram,
    sample_jump_times,
    simulate_path,
    time_average,
    uniform_bins,
)
from lrpbandit.rng import Stream

from oracles import thinning_jump_times

LEFT = BanditParams(0.4, 1 / 3)


def test_flow_solves_the_drift_equation():
    sol = solve_ivp(lambda t, y: (1 - LEFT.p_A) - LEFT.p_A * y, (0, 5), [7.0], rtol=1e-12, atol=1e-12,
                    dense_output=True)
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(flow(7.0, t, LEFT), sol.sol(t)[0], rtol=1e-9)
    assert flow(LEFT.r_A, 3.0, LEFT) == pytest.approx(LEFT.r_A)


@pytest.mark.parametrize("y0", [0.0, 1.5, 10.0])
def test_cumulative_intensity_is_integrated_rate(y0):
    g = 0.7
    for t in (0.1, 2.0, 30.0):
        ref = quad(lambda s: LEFT.p_B * flow(y0, s, LEFT) / g, 0, t, epsabs=1e-13)[0]
        assert cumulative_intensity(y0, t, LEFT, g) == pytest.approx(ref, rel=1e-11)


def test_inversion_round_trip():
    E = np.array([1e-8, 0.01, 0.5, 1.0, 5.0, 40.0])
    for y0 in (0.0, 1.5, 20.0):
        t = invert_intensity(y0, E, LEFT, 1.0)
        np.testing.assert_allclose(cumulative_intensity(y0, t, LEFT, 1.0), E, rtol=1e-11)
    assert invert_intensity(2.0, 0.0, LEFT, 1.0) == 0.0


@pytest.mark.parametrize("y0", [1.5, 4.5])
def test_inversion_matches_thinning(y0):
    inv = sample_jump_times(y0, LEFT, 1.0, Stream(1, 0), 20_000)
    thin = thinning_jump_times(y0, LEFT.p_A, LEFT.p_B, 1.0, np.random.default_rng(2), 20_000)
    assert stats.ks_2samp(inv, thin).pvalue > 0.01


def test_path_structure_and_determinism():
    a = simulate_path(3.0, 200.0, LEFT, 1.0, Stream(0, 0))
    b = simulate_path(3.0, 200.0, LEFT, 1.0, Stream(0, 0))
    np.testing.assert_array_equal(a.jump_times, b.jump_times)
    assert np.all(np.diff(a.jump_times) > 0) and a.jump_times[-1] <= 200.0
    np.testing.assert_allclose(a.post_values, a.pre_values + 1.0)
    # between jumps the path follows the flow
    starts = np.concatenate([[a.y0], a.post_values[:-1]])
    gaps = np.diff(np.concatenate([[0.0], a.jump_times]))
    np.testing.assert_allclose(a.pre_values, flow(starts, gaps, LEFT), rtol=1e-12)


def test_path_advances_counter():
    rng = Stream(0, 0)
    p = simulate_path(3.0, 50.0, LEFT, 1.0, rng)
    assert rng.counter == p.n_jumps + 1
    with pytest.raises(ValueError):
        simulate_path(3.0, 0.0, LEFT, 1.0, Stream(0, 0))


def _sampled_occupation(path, edges, burn_in, n=400_000):
    # brute force: evaluate Y on a fine time grid (midpoints)
    t0 = burn_in * path.horizon
    t = t0 + (np.arange(n) + 0.5) * (path.horizon - t0) / n
    idx = np.searchsorted(path.jump_times, t, side="right")
    start_t = np.concatenate([[0.0], path.jump_times])[idx]
    start_v = np.concatenate([[path.y0], path.post_values])[idx]
    y = flow(start_v, t - start_t, path.params)
    return np.histogram(y, edges)[0] / n


def test_occupation_histogram_against_time_sampling():
    path = simulate_path(9.0, 500.0, LEFT, 1.0, Stream(4, 0))
    edges = uniform_bins(LEFT.r_A, LEFT.r_A + 25.0, 0.5)
    h = occupation_histogram(path, edges, burn_in_fraction=0.1)
    assert h.weights.sum() + h.overflow == pytest.approx(h.total_time, rel=1e-12)
    np.testing.assert_allclose(h.probabilities, _sampled_occupation(path, edges, 0.1), atol=2e-4)


def test_histogram_merge_and_bins():
    path = simulate_path(9.0, 100.0, LEFT, 1.0, Stream(5, 0))
    h = occupation_histogram(path)
    np.testing.assert_allclose(h.edges, default_bins(LEFT, 1.0))
    m = h.merge(h)
    assert m.total_time == 2 * h.total_time
    with pytest.raises(ValueError):
        h.merge(occupation_histogram(path, uniform_bins(0, 1, 0.5)))
    with pytest.raises(ValueError):
        uniform_bins(0.0, 1.0, 0.3)


def test_ergodic_moments_agree_with_quadrature_average():
    path = simulate_path(9.0, 2000.0, LEFT, 1.0, Stream(6, 0))
    mean, var = ergodic_moments(path, 0.1)
    m1, _ = time_average(path, lambda y: y, 0.1, n_batches=10)
    m2, _ = time_average(path, lambda y: y * y, 0.1, n_batches=10)
    assert m1 == pytest.approx(mean, rel=1e-10)
    assert m2 - m1**2 == pytest.approx(var, rel=1e-8)


def test_nearly_jump_free_path_sits_at_r_A():
    p = BanditParams(0.4, 1e-9)
    path = simulate_path(p.r_A, 1e5, p, 1.0, Stream(0, 0))
    assert path.n_jumps <= 1
    mean, _ = ergodic_moments(path, 0.1)
    assert mean == pytest.approx(p.r_A, rel=1e-3)


def test_short_run_moments_close_to_closed_form():
    c = derived_constants(LEFT, 1.0)
    path = simulate_path(c.nu_mean, 1e5, LEFT, 1.0, Stream(0, 0))
    mean, se = time_average(path, lambda y: y, 0.1, 50)
    assert abs(mean - c.nu_mean) <= 5 * se


def test_generator_of_linear_function():
    Lf = generator(lambda y: y, lambda y: np.ones_like(y), LEFT, 1.0)
    y = np.linspace(0, 10, 5)
    # drift plus jump contribution p_B y
    np.testing.assert_allclose(Lf(y), (1 - LEFT.p_A) - LEFT.pi * y, rtol=1e-14, atol=1e-15)
