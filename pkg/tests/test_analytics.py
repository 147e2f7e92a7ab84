import math

import numpy as np
import pytest

from lrpbandit.analytics import (
    BoundaryClass,
    boundary_classification,
    critical_exponent,
    density_reconstruct,
    laplace_nu,
    pi_zero_constant,
    pi_zero_density,
    solve_psi,
    stationary_generator_residual,
    theta_root,
)
from lrpbandit.params import BanditParams, derived_constants

from oracles import beta_constant, psi_rk4, ratio_recursion, theta_mp

LEFT = BanditParams(0.4, 1 / 3)
CENTER = BanditParams(0.4, 4 / 15)
RIGHT = BanditParams(0.4, 1 / 6)
PARAM_SETS = [LEFT, CENTER, RIGHT]


# --- psi ODE -----------------------------------------------------------------


def test_psi_zero_is_equilibrium():
    s = solve_psi(0.0, "laplace", LEFT, 1.0)
    assert s.integral == 0.0 and np.all(s.psi == 0.0)


def test_psi_sandwich_on_grid():
    s = solve_psi(1.0, "laplace", LEFT, 1.0)
    scaled = s.psi * np.exp(LEFT.pi * s.t)
    assert np.all(scaled >= -1.0 - 1e-12) and np.all(scaled <= 0.0)
    assert np.all(s.psi <= -1.0 * np.exp(-LEFT.p_A * s.t) + 1e-12)
    assert abs(s.psi[-1]) <= 1e-10 * 1.0 * (1 + 1e-6)


def test_psi_matches_rk4_oracle():
    s = solve_psi(2.0, "laplace", LEFT, 1.0, t_max=20.0, tol=1e-300)
    t, psi, integ = psi_rk4(-2.0, LEFT.p_A, LEFT.p_B, 1.0, 20.0, 20_000)
    assert s.horizon == pytest.approx(20.0)
    assert s.psi[-1] == pytest.approx(psi[-1], rel=1e-9)
    assert s.integral == pytest.approx(integ[-1], rel=1e-7)


def test_psi_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_psi(-1.0, "laplace", LEFT, 1.0)
    with pytest.raises(ValueError):
        solve_psi(1.0, "other", LEFT, 1.0)


@pytest.mark.parametrize("params", PARAM_SETS)
def test_expmoment_dichotomy(params):
    ps = critical_exponent(params, 1.0)
    below = solve_psi(0.9 * ps, "expmoment", params, 1.0)
    above = solve_psi(1.1 * ps, "expmoment", params, 1.0)
    assert below.bounded and below.psi.max() <= 0.9 * ps * (1 + 1e-12)
    assert not above.bounded and above.blow_up.time < 100.0


def test_expmoment_at_threshold_is_stationary():
    ps = critical_exponent(LEFT, 1.0)
    s = solve_psi(ps, "expmoment", LEFT, 1.0, t_max=100.0)
    assert s.bounded
    np.testing.assert_allclose(s.psi, ps, rtol=1e-8)
    assert s.integral == pytest.approx(ps * 100.0, rel=1e-8)


# --- Laplace transform -------------------------------------------------------


def test_laplace_at_zero_is_one():
    assert laplace_nu(0.0, LEFT, 1.0) == 1.0


@pytest.mark.parametrize("p", [0.1, 1.0, 5.0])
def test_laplace_bounded_by_support_edge(p):
    # nu lives on [r_A, inf), so the transform cannot exceed e^(-p r_A)
    assert laplace_nu(p, LEFT, 1.0) <= math.exp(-p * LEFT.r_A)


def test_laplace_interval_and_monotonicity():
    vals = [laplace_nu(p, LEFT, 1.0) for p in np.linspace(0, 4, 9)]
    assert np.all(np.diff(vals) < 0)
    lv = laplace_nu(1.0, LEFT, 1.0, return_uncertainty=True)
    assert lv.lower <= lv.value <= lv.upper and lv.uncertainty < 1e-9


@pytest.mark.parametrize("params", PARAM_SETS)
def test_laplace_matches_reconstructed_density(params):
    dens = density_reconstruct(params, 1.0, 60)
    for p in (0.1, 0.5, 1.0, 3.0):
        ref = dens.expect(lambda y: np.exp(-p * y))
        assert laplace_nu(p, params, 1.0) == pytest.approx(ref, rel=1e-7)


def test_laplace_derivative_gives_mean():
    # -d/dp at 0 equals the stationary mean
    h = 1e-5
    slope = (laplace_nu(h, LEFT, 1.0) - laplace_nu(2 * h, LEFT, 1.0)) / h
    assert slope == pytest.approx(9.0, rel=1e-3)


# --- theta and p* ------------------------------------------------------------


def test_theta_forward_value():
    t = theta_root(math.e - 1.0)
    assert t.theta == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("y", [1.0 + 1e-9, 1.0001, 1.2, 2.5, 40.0, 1e6])
def test_theta_matches_high_precision(y):
    t = theta_root(y)
    assert t.theta == pytest.approx(theta_mp(y), rel=1e-12)
    assert t.residual <= 1e-10


def test_theta_limits():
    assert theta_root(1 + 1e-4).theta / 2e-4 == pytest.approx(1.0, rel=1e-4)
    big = theta_root(1e6)
    assert abs(big.theta / math.log(1e6) - 1) < 0.25
    assert math.log(1e6) < big.theta < 2 * (1e6 - 1)


def test_theta_domain():
    for y in (1.0, 0.5, -2.0):
        with pytest.raises(ValueError):
            theta_root(y)


def test_critical_exponent_left_set():
    ps = critical_exponent(LEFT, 1.0)
    assert ps == pytest.approx(theta_mp(1.2), rel=1e-12)
    assert ps == pytest.approx(0.354, abs=5e-4)
    assert abs(-LEFT.p_A * ps + LEFT.p_B * math.expm1(ps)) <= 1e-10


def test_critical_exponent_scales_inversely_with_g():
    # G(u) = -p_A u + p_B (e^(g u) - 1)/g vanishes at u = theta/g
    assert critical_exponent(LEFT, 2.0) == pytest.approx(critical_exponent(LEFT, 1.0) / 2, rel=1e-14)


def test_critical_exponent_matches_density_tail():
    # the stationary density decays like e^(-p* y)
    for g in (0.5, 2.0):
        dens = density_reconstruct(LEFT, g, 80)
        assert dens.tail_rate == pytest.approx(critical_exponent(LEFT, g), rel=0.2)


def test_critical_exponent_needs_gap():
    with pytest.raises(ValueError):
        critical_exponent(BanditParams(0.4, 0.4), 1.0)


# --- density ---------------------------------------------------------------


@pytest.mark.parametrize(
    "params, cls",
    [(LEFT, BoundaryClass.ZERO), (CENTER, BoundaryClass.FINITE_POSITIVE), (RIGHT, BoundaryClass.DIVERGES)],
)
def test_boundary_classes(params, cls):
    assert boundary_classification(params, 1.0) is cls
    assert density_reconstruct(params, 1.0, 20).boundary is cls


@pytest.mark.parametrize("params", PARAM_SETS)
def test_density_moments(params):
    c = derived_constants(params, 1.0)
    dens = density_reconstruct(params, 1.0)
    assert dens.mass() == pytest.approx(1.0, abs=1e-12)
    assert dens.mean() == pytest.approx(c.nu_mean, rel=0.01)
    assert dens.variance() == pytest.approx(c.nu_var, rel=0.05)


@pytest.mark.parametrize("params", PARAM_SETS)
def test_density_moments_converge_with_more_intervals(params):
    c = derived_constants(params, 1.0)
    dens = density_reconstruct(params, 1.0, 80)
    assert dens.mean() == pytest.approx(c.nu_mean, rel=1e-8)
    assert dens.variance() == pytest.approx(c.nu_var, rel=1e-7)


@pytest.mark.parametrize("params", PARAM_SETS)
def test_density_matches_quadrature_oracle(params):
    dens = density_reconstruct(params, 1.0, 20)
    lam = dens.lambda0
    for k in (0, 1, 2):
        for tau in (0.05, 0.5, 0.93):
            y = params.r_A + k + tau
            got = dens.pdf(np.array([y]))[0] / math.exp(dens.log_F(y))
            assert got == pytest.approx(lam * ratio_recursion(params.p_A, params.p_B, 1.0, k, tau), rel=1e-9)


@pytest.mark.parametrize("params", PARAM_SETS)
def test_density_support_and_positivity(params):
    dens = density_reconstruct(params, 1.0, 20)
    assert dens.pdf(np.array([0.0, 0.5, params.r_A])).tolist() == [0.0, 0.0, 0.0]
    assert dens.cdf(params.r_A) == 0.0
    y = np.linspace(params.r_A + 1e-9, dens.y_max, 2001)
    assert np.all(dens.pdf(y) > 0)
    assert np.all(dens.phi > 0)
    assert np.all(np.diff(dens.ratio.ravel()) <= 1e-14 * dens.lambda0)
    np.testing.assert_allclose(dens.ratio[0], dens.lambda0, rtol=1e-14)


def test_cdf_consistent_with_pdf():
    dens = density_reconstruct(CENTER, 1.0, 20)
    from scipy.integrate import quad

    a, b = CENTER.r_A + 0.3, CENTER.r_A + 2.7
    ref = quad(lambda y: float(dens.pdf(np.array([y]))[0]), a, b, points=[CENTER.r_A + 1, CENTER.r_A + 2],
               epsabs=1e-12)[0]
    assert dens.cdf(b) - dens.cdf(a) == pytest.approx(ref, rel=1e-9)
    assert dens.cdf(1e4) == pytest.approx(1.0, abs=1e-12)
    edges = CENTER.r_A + np.arange(0, 5, 0.5)
    np.testing.assert_allclose(dens.bin_masses(edges).sum(), dens.cdf(edges[-1]), rtol=1e-12)


def test_density_diverges_at_boundary_for_large_g():
    dens = density_reconstruct(RIGHT, 1.0, 20)
    near = dens.pdf(RIGHT.r_A + np.array([1e-8, 1e-6, 1e-4]))
    assert np.all(np.diff(near) < 0) and near[0] > 100


def test_density_rejects_bad_input():
    with pytest.raises(ValueError):
        density_reconstruct(BanditParams(0.4, 0.4), 1.0)
    with pytest.raises(ValueError):
        density_reconstruct(LEFT, 1.0, n_max=1)


# --- generator residual -------------------------------------------------------


def _bump(center, half):
    def f(y):
        z = (np.asarray(y, dtype=float) - center) / half
        out = np.zeros_like(z)
        m = np.abs(z) < 1
        out[m] = np.exp(-1 / (1 - z[m] ** 2))
        return out

    def fp(y):
        z = (np.asarray(y, dtype=float) - center) / half
        out = np.zeros_like(z)
        m = np.abs(z) < 1
        zz = z[m]
        out[m] = np.exp(-1 / (1 - zz**2)) * (-2 * zz / (1 - zz**2) ** 2) / half
        return out

    return f, fp


def test_generator_residual_zero_function():
    dens = density_reconstruct(LEFT, 1.0, 20)
    zero = lambda y: np.zeros_like(y)
    assert stationary_generator_residual(zero, zero, dens, (LEFT.r_A, LEFT.r_A + 1)) == 0.0


def test_generator_residual_small_for_bump():
    dens = density_reconstruct(LEFT, 1.0, 20)
    f, fp = _bump(LEFT.r_A + 1.0, 0.5)
    res = stationary_generator_residual(f, fp, dens, (LEFT.r_A + 0.5, LEFT.r_A + 1.5))
    scale = dens.expect(lambda y: np.abs(fp(y)))
    assert abs(res) <= 1e-3 * scale


def test_generator_residual_shrinks_with_refinement():
    f, fp = _bump(LEFT.r_A + 1.0, 0.5)
    res = []
    for n in (64, 128, 256):
        dens = density_reconstruct(LEFT, 1.0, 20, n)
        res.append(abs(stationary_generator_residual(f, fp, dens, (LEFT.r_A + 0.5, LEFT.r_A + 1.5))))
    assert res[1] < res[0] / 2 and res[2] < res[1] / 2


def test_generator_residual_rejects_support_outside_range():
    dens = density_reconstruct(LEFT, 1.0, 20)
    f, fp = _bump(0.0, 0.5)
    with pytest.raises(ValueError):
        stationary_generator_residual(f, fp, dens, (-0.5, 0.5))
    with pytest.raises(ValueError):
        stationary_generator_residual(f, fp, dens, (dens.y_max - 0.5, dens.y_max + 0.5))


# --- equal arms --------------------------------------------------------------


def test_pi_zero_uniform_case():
    p_A = 0.4
    r_A = (1 - p_A) / p_A
    vals = pi_zero_density(p_A, 2 * r_A, np.array([-0.9, 0.0, 0.5]))
    np.testing.assert_allclose(vals, 0.5, rtol=1e-12)


def test_pi_zero_constant_exponent_one():
    # g = r_A makes the exponent 1 and the constant 3/4
    assert pi_zero_constant(0.5, 1.0) == pytest.approx(0.75, rel=1e-12)


@pytest.mark.parametrize("g", [0.3, 1.0, 2.0, 3.0, 10.0])
def test_pi_zero_constant_against_beta_function(g):
    p_A = 0.4
    e = 2 * ((1 - p_A) / p_A) / g - 1
    assert pi_zero_constant(p_A, g) == pytest.approx(beta_constant(e), rel=1e-10)


def test_pi_zero_density_symmetric_and_normalised():
    from scipy.integrate import quad

    half = np.linspace(0.0, 1.2, 25)
    grid = np.concatenate([-half[:0:-1], half])
    vals = pi_zero_density(0.4, 1.0, grid)
    np.testing.assert_allclose(vals, vals[::-1], rtol=1e-14)
    assert vals[0] == 0.0 and vals[-1] == 0.0
    total = quad(lambda y: float(pi_zero_density(0.4, 1.0, np.array([y]))[0]), -1, 1, epsabs=1e-12)[0]
    assert total == pytest.approx(1.0, abs=1e-8)
