"""Closed-form and semi-analytic quantities of the limit process.

The limit process ``Y`` drifts towards ``r_A`` and jumps by ``+g`` at rate
``p_B y / g``.  This module provides

* the Riccati-type ODE ``psi' = p_B (e^(g psi) - 1)/g - p_A psi`` whose
  integral gives the Laplace transform of the stationary law ``nu``;
* ``theta(y)``, the positive root of ``(e^t - 1)/t = y``, and the critical
  exponent ``p* = theta(p_A/p_B)/g`` beyond which exponential moments of
  ``nu`` are infinite;
* the stationary density ``phi`` rebuilt interval by interval on
  ``(r_A + k g, r_A + (k+1) g)`` from the delay equation
  ``(phi/F)'(y) = G(y) phi(y - g) / F(y)`` with
  ``F(y) = e^(r y/g) (y - r_A)^(d-1)`` and
  ``G(y) = -(r/g) (y - g)/(y - r_A)``;
* the boundary behaviour of ``phi`` at ``r_A`` and the invariant density
  of the diffusion obtained when both arms are equal.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.special import hyp1f1

from .params import BanditParams
from .quadrature import PanelGrid, eval_legendre_rows, integrate_legendre_rows

__all__ = [
    "BlowUp",
    "PsiSolution",
    "LaplaceValue",
    "ThetaRoot",
    "BoundaryClass",
    "PiecewiseDensity",
    "solve_psi",
    "laplace_nu",
    "theta_root",
    "critical_exponent",
    "density_reconstruct",
    "boundary_classification",
    "pi_zero_density",
    "pi_zero_constant",
    "stationary_generator_residual",
]

PSI_ATOL = 1e-10
PSI_RTOL = 1e-11
BLOWUP_FACTOR = 10.0


# ---------------------------------------------------------------------------
# psi ODE and Laplace transform


@dataclass(frozen=True)
class BlowUp:
    """Finite-time explosion of the exponential-moment branch."""

    time: float
    reason: str  # "cap" or "step"


@dataclass
class PsiSolution:
    """Numerical solution of the psi ODE.

    Attributes
    ----------
    initial : float
        ``psi(0)``; ``-p`` for the Laplace branch and ``+p`` for the
        exponential-moment branch.
    t, psi : ndarray
        Accepted integrator steps and the solution there.
    integral : float
        ``int_0^T psi``.
    horizon : float
        Final time ``T`` reached.
    tail_bound : float
        Bound on ``|int_T^inf psi|``; ``inf`` after a blow-up.
    blow_up : BlowUp or None
    """

    initial: float
    t: np.ndarray
    psi: np.ndarray
    integral: float
    horizon: float
    tail_bound: float
    blow_up: Optional[BlowUp] = None

    @property
    def bounded(self) -> bool:
        return self.blow_up is None


@dataclass(frozen=True)
class LaplaceValue:
    value: float
    lower: float
    upper: float

    @property
    def uncertainty(self) -> float:
        return self.upper - self.lower


def _psi_rhs(p_A, p_B, g):
    def rhs(t, s):
        psi = s[0]
        # trial stages may overshoot wildly after a blow-up; avoid overflow
        return [p_B * math.expm1(min(g * psi, 700.0)) / g - p_A * psi, psi]

    return rhs


def solve_psi(
    p: float,
    sign: str,
    params: BanditParams,
    g: float,
    tol: float = 1e-10,
    t_max: Optional[float] = None,
) -> PsiSolution:
    """Integrate the psi ODE from ``psi(0) = -p`` or ``+p``.

    Parameters
    ----------
    p : float
        Non-negative magnitude of the initial value.
    sign : {"laplace", "expmoment"}
        ``"laplace"`` starts at ``-p``; ``"expmoment"`` at ``+p``.
    tol : float
        Stop once ``|psi| <= tol * p``.
    t_max : float, optional
        Time cap.  Defaults to the decay time implied by the envelope
        ``|psi(t)| <= p e^(-pi t)`` for the Laplace branch and to 1000 for the
        exponential-moment branch.

    Notes
    -----
    On the exponential-moment branch ``psi > 10 p*`` or a collapse of the
    adaptive step is reported as :class:`BlowUp` in ``blow_up``.
    """
    if sign not in ("laplace", "expmoment"):
        raise ValueError("sign must be 'laplace' or 'expmoment'")
    if p < 0:
        raise ValueError("p must be non-negative")
    if g <= 0:
        raise ValueError("g must be positive")
    params.require_gap()
    pi = params.pi
    psi0 = -p if sign == "laplace" else p
    if p == 0.0:
        return PsiSolution(0.0, np.zeros(1), np.zeros(1), 0.0, 0.0, 0.0)

    if t_max is None:
        if sign == "laplace":
            t_max = math.log(1.0 / tol) / pi + 1.0
        else:
            t_max = 1000.0
    events = []

    def small(t, s):
        return abs(s[0]) - tol * p

    small.terminal = True
    small.direction = -1
    events.append(small)
    if sign == "expmoment":
        cap = BLOWUP_FACTOR * critical_exponent(params, g)

        def big(t, s):
            return s[0] - cap

        big.terminal = True
        big.direction = 1
        events.append(big)

    sol = solve_ivp(
        _psi_rhs(params.p_A, params.p_B, g),
        (0.0, t_max),
        [psi0, 0.0],
        method="DOP853",
        rtol=PSI_RTOL,
        # keep psi under relative control all the way down to the stop level
        atol=[PSI_RTOL * tol * p, PSI_ATOL * 1e-2],
        events=events,
    )
    t, psi, integ = sol.t, sol.y[0], sol.y[1]
    blow = None
    if sol.status == -1:
        blow = BlowUp(float(t[-1]), "step")
    elif sign == "expmoment" and sol.t_events[1].size:
        blow = BlowUp(float(sol.t_events[1][0]), "cap")
    if blow is not None:
        return PsiSolution(psi0, t, psi, float(integ[-1]), float(t[-1]), math.inf, blow)

    last = float(psi[-1])
    if sign == "laplace":
        # |psi| decays at least like e^(-pi t) from any starting time
        tail = abs(last) / pi
    else:
        # G(u)/u is increasing, so psi decays at least at rate -G(psi_T)/psi_T
        G = -params.p_A * last + params.p_B * math.expm1(g * last) / g
        tail = last * last / -G if G < 0 else math.inf
    return PsiSolution(psi0, t, psi, float(integ[-1]), float(t[-1]), tail)


def laplace_nu(
    p: float,
    params: BanditParams,
    g: float,
    tol: float = 1e-10,
    return_uncertainty: bool = False,
):
    """Laplace transform ``int e^(-p y) nu(dy)`` of the stationary law.

    Computed as ``exp((1 - p_A) int_0^inf psi)``.  With
    ``return_uncertainty`` the result is a :class:`LaplaceValue` whose
    interval covers the neglected tail of the integral.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    sol = solve_psi(p, "laplace", params, g, tol)
    c = 1.0 - params.p_A
    # the tail integral lies in [-tail_bound, 0]; near 0 psi decays at rate
    # pi, so the lower end is also the best estimate
    lo = math.exp(c * (sol.integral - sol.tail_bound))
    hi = math.exp(c * sol.integral)
    if not return_uncertainty:
        return lo
    return LaplaceValue(lo, lo, hi)


# ---------------------------------------------------------------------------
# theta and the critical exponent


@dataclass(frozen=True)
class ThetaRoot:
    y: float
    theta: float
    residual: float  # |(e^theta - 1)/(theta y) - 1|


def _theta_map(t):
    return math.expm1(t) / t


def theta_root(y: float) -> ThetaRoot:
    """Positive root of ``(e^t - 1)/t = y`` for ``y > 1``.

    Safeguarded Newton inside the bracket ``[log y, 2(y - 1)]``.  The
    residual is relative, ``|(e^t - 1)/(t y) - 1|``.
    """
    if not y > 1.0:
        raise ValueError(f"theta_root needs y > 1, got {y}")
    if y - 1.0 < 1e-6:
        # series (e^t - 1)/t = 1 + t/2 + t^2/6 + t^3/24 + ..., invert
        e = y - 1.0
        t = 2 * e - (4.0 / 3.0) * e**2 + (10.0 / 9.0) * e**3
        return ThetaRoot(y, t, abs(_theta_map(t) / y - 1.0))

    lo, hi = math.log(y), 2.0 * (y - 1.0)
    if lo > hi:
        lo, hi = hi, lo
    # work with h(t) = log((e^t - 1)/t) - log y, increasing and concave-ish
    logy = math.log(y)

    def h(t):
        # log(e^t - 1) - log t, stable for large t
        return t + math.log(-math.expm1(-t)) - math.log(t) - logy

    def dh(t):
        return 1.0 / -math.expm1(-t) - 1.0 / t

    t = 0.5 * (lo + hi)
    for _ in range(200):
        v = h(t)
        if v > 0:
            hi = t
        else:
            lo = t
        step = v / dh(t)
        tn = t - step
        if not lo < tn < hi:
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 1e-15 * max(1.0, abs(t)):
            t = tn
            break
        t = tn
    return ThetaRoot(y, t, abs(math.expm1(h(t))))


def _G(u, params, g):
    return -params.p_A * u + params.p_B * math.expm1(g * u) / g


def critical_exponent(params: BanditParams, g: float) -> float:
    """``p* = theta(p_A/p_B)/g``, the positive zero of ``G(u) = -p_A u + p_B (e^(g u)-1)/g``."""
    if params.pi <= 0:
        raise ValueError("critical exponent needs p_B < p_A")
    if g <= 0:
        raise ValueError("g must be positive")
    # G(u) = 0 with u > 0  <=>  (e^(g u) - 1)/(g u) = p_A/p_B
    pstar = theta_root(params.p_A / params.p_B).theta / g
    G = _G(pstar, params, g)
    if abs(G) > 1e-10:
        raise ArithmeticError(f"G(p*) = {G} exceeds 1e-10")
    return pstar


# ---------------------------------------------------------------------------
# stationary density


class BoundaryClass(str, enum.Enum):
    DIVERGES = "Diverges"
    FINITE_POSITIVE = "FinitePositive"
    ZERO = "Zero"


def _d(params, g):
    # d = g*/g = r r_A / g
    return params.r * params.r_A / g


def boundary_classification(params: BanditParams, g: float) -> BoundaryClass:
    """Behaviour of the stationary density at ``r_A`` from the sign of ``d - 1``."""
    params.require_gap()
    if g <= 0:
        raise ValueError("g must be positive")
    d = _d(params, g)
    if math.isclose(d, 1.0, rel_tol=1e-12, abs_tol=0.0):
        return BoundaryClass.FINITE_POSITIVE
    return BoundaryClass.ZERO if d > 1.0 else BoundaryClass.DIVERGES


@dataclass
class PiecewiseDensity:
    """Stationary density rebuilt on ``(r_A + k g, r_A + (k+1) g)``.

    Values are held at the Gauss nodes ``tau`` (shared by every interval,
    ``y = r_A + (k + tau) g``).  Beyond ``y_max = r_A + n_max g`` an
    exponential tail ``phi(y_max) e^(-tail_rate (y - y_max))`` carrying
    ``tail_mass`` is appended.

    Attributes
    ----------
    y, phi, ratio : ndarray, shape (n_max, n_nodes)
        Node abscissae, density and ``phi/F``.
    interval_mass : ndarray
        Mass of each interval.
    lambda0 : float
        Value of ``phi/F`` on the first interval.
    """

    params: BanditParams
    g: float
    n_max: int
    d: float
    lambda0: float
    boundary: BoundaryClass
    tau: np.ndarray
    y: np.ndarray
    phi: np.ndarray
    ratio: np.ndarray
    interval_mass: np.ndarray
    tail_mass: float
    tail_rate: float
    phi_end: float
    grid: PanelGrid = field(repr=False)

    def __post_init__(self):
        self._ratio_coef = self.grid.coefficients(self.ratio)
        self._phi_coef = self.grid.coefficients(self.phi)
        # panel integrals are h * c_0; mass from interval start to each panel start
        totals = self.grid.h * self._phi_coef[:, :, 0]
        self._panel_start = self.g * (np.cumsum(totals, axis=1) - totals)
        self._interval_start = np.cumsum(self.interval_mass) - self.interval_mass

    @property
    def r_A(self) -> float:
        return self.params.r_A

    @property
    def y_max(self) -> float:
        return self.r_A + self.n_max * self.g

    @property
    def node_weights(self) -> np.ndarray:
        """Quadrature weights in ``y`` for the node values, shape (n_nodes,)."""
        return self.g * self.grid.weights

    def log_F(self, y):
        y = np.asarray(y, dtype=float)
        r = self.params.r
        return r * y / self.g + (self.d - 1.0) * np.log(y - self.r_A)

    def _split(self, y):
        s = (y - self.r_A) / self.g
        k = np.minimum(np.floor(s).astype(np.int64), self.n_max - 1)
        return k, s - k

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        inside = (y > self.r_A) & (y <= self.y_max)
        if inside.any():
            yi = y[inside]
            k, tau = self._split(yi)
            p, xi = self.grid.locate(tau)
            ratio = eval_legendre_rows(self._ratio_coef[k, p], xi)
            out[inside] = ratio * np.exp(self.log_F(yi))
        beyond = y > self.y_max
        out[beyond] = self.phi_end * np.exp(-self.tail_rate * (y[beyond] - self.y_max))
        return out if out.ndim else float(out)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        inside = (y > self.r_A) & (y <= self.y_max)
        if inside.any():
            k, tau = self._split(y[inside])
            p, xi = self.grid.locate(tau)
            part = integrate_legendre_rows(self._phi_coef[k, p], xi)
            vals = (
                self._interval_start[k]
                + self._panel_start[k, p]
                + self.g * 0.5 * self.grid.h[p] * part
            )
            first = k == 0
            if first.any():
                pr = self.params
                vals[first] = self.lambda0 * _first_interval_mass(
                    pr.r, pr.r_A, self.g, self.d, tau[first]
                )
            out[inside] = vals
        beyond = y > self.y_max
        out[beyond] = self.interval_mass.sum() + self.tail_mass * -np.expm1(
            -self.tail_rate * (y[beyond] - self.y_max)
        )
        return out if out.ndim else float(out)

    def bin_masses(self, edges) -> np.ndarray:
        return np.diff(self.cdf(np.asarray(edges, dtype=float)))

    def expect(self, f: Callable[[np.ndarray], np.ndarray], tail: bool = True) -> float:
        """``int f dnu`` by node quadrature plus Gauss-Laguerre on the tail."""
        body = float(np.sum(self.node_weights * f(self.y) * self.phi))
        if not tail or self.tail_mass == 0.0:
            return body
        x, w = np.polynomial.laguerre.laggauss(30)
        yt = self.y_max + x / self.tail_rate
        return body + self.tail_mass * float(np.sum(w * f(yt)))

    def mass(self) -> float:
        return float(self.interval_mass.sum() + self.tail_mass)

    def mean(self) -> float:
        return self.expect(lambda y: y)

    def variance(self) -> float:
        m = self.mean()
        return self.expect(lambda y: (y - m) ** 2)


def density_reconstruct(
    params: BanditParams,
    g: float,
    n_max: int = 20,
    points_per_interval: int = 384,
) -> PiecewiseDensity:
    """Rebuild the stationary density on ``n_max`` intervals of length ``g``.

    Stationarity balances the flux across every level ``y > r_A``::

        (y - r_A) phi(y) = (r/g) int_{y-g}^{y} u phi(u) du.

    On the first interval this gives ``phi = lambda0 F``; on interval ``k``
    it is a Volterra equation of the second kind in ``phi_k`` whose
    right-hand side involves only interval ``k - 1``, so intervals are
    solved in turn.  Every term is positive, which keeps the recursion
    stable far into the tail.  It is equivalent to
    ``(phi/F)' = G phi(. - g)/F``.

    All intervals share one composite Gauss-Legendre grid in
    ``t = (y - r_A)/g - k`` graded geometrically towards ``t = 0``; the kinks
    ``r_A + k g`` are panel boundaries.  The mass of the first interval,
    where ``F`` carries ``(y - r_A)^(d-1)``, is computed in closed form.

    Parameters
    ----------
    n_max : int
        Number of intervals (at least 2).
    points_per_interval : int
        Gauss nodes per interval on the uniform panels and the graded ones
        combined; the grading is deepened as needed when ``d`` is small.
    """
    params.require_gap()
    if g <= 0:
        raise ValueError("g must be positive")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    r, r_A = params.r, params.r_A
    d = _d(params, g)
    # the first panel carries t^(d-1) and contributes an error ~ 2^(-d L)
    grid = PanelGrid(points_per_interval, min_levels=min(120, math.ceil(36.0 / min(d, 1.0))))
    tau = grid.nodes
    n = tau.size

    cum_eye, _ = grid.cumulative(np.eye(n))
    S = cum_eye.T  # (S @ f)[i] = int_0^tau_i f
    # (R @ f)[i] = int_tau_i^1 f, with exact zeros on earlier panels
    panel = np.repeat(np.arange(grid.n_panels), grid.q)
    R = np.where(panel[None, :] > panel[:, None], grid.weights[None, :], 0.0)
    same = panel[None, :] == panel[:, None]
    R[same] = (grid.weights[None, :] - S)[same]

    offs = np.arange(n_max)[:, None] + tau
    y = r_A + offs * g
    log_F = r * y / g + (d - 1.0) * np.log(offs * g)
    phi = np.empty_like(y)
    phi[0] = np.exp(log_F[0])
    # int_t^1 u phi(u) dt on the first interval, exact from the flux identity
    F1 = math.exp(r * (r_A + g) / g + (d - 1.0) * math.log(g))
    rev = (g * F1 - tau * g * phi[0]) / r
    for k in range(1, n_max):
        A = np.diag((k + tau) * g) - r * S * y[k][None, :]
        phi[k] = np.linalg.solve(A, r * rev)
        rev = R @ (y[k] * phi[k])
    if not np.all(phi > 0):
        raise ArithmeticError("reconstructed density lost positivity")
    ratio = phi * np.exp(-log_F)

    w = g * grid.weights
    interval_mass = phi @ w
    interval_mass[0] = _first_interval_mass(r, r_A, g, d, 1.0)

    y_max = r_A + n_max * g
    phi_end = r * float(grid.weights @ (y[-1] * phi[-1])) / (n_max * g)
    # exponential decay rate from a log-linear fit on the last interval
    slope = np.polyfit(y[-1], np.log(phi[-1]), 1)[0]
    rate = -float(slope)
    if rate <= 0:
        raise ArithmeticError("density does not decay on the last interval")
    tail_mass = phi_end / rate

    lam = 1.0 / (interval_mass.sum() + tail_mass)
    return PiecewiseDensity(
        params=params,
        g=g,
        n_max=n_max,
        d=d,
        lambda0=lam,
        boundary=boundary_classification(params, g),
        tau=tau,
        y=y,
        phi=phi * lam,
        ratio=ratio * lam,
        interval_mass=interval_mass * lam,
        tail_mass=tail_mass * lam,
        tail_rate=rate,
        phi_end=phi_end * lam,
        grid=grid,
    )


def _first_interval_mass(r, r_A, g, d, frac):
    """``int F`` over ``(r_A, r_A + frac g)`` via ``int_0^x t^(d-1) e^t dt = x^d/d 1F1(d; d+1; x)``."""
    x = r * frac
    return math.exp(r * r_A / g) * (g / r) ** d * x**d / d * hyp1f1(d, d + 1.0, x)


def stationary_generator_residual(
    f: Callable,
    fprime: Callable,
    density: PiecewiseDensity,
    support: tuple[float, float],
) -> float:
    """``int (r y (f(y+g) - f(y))/g + (r_A - y) f'(y)) phi(y) dy``.

    ``support`` must contain the support of ``f``; together with its shift
    by ``-g`` it has to lie inside ``[r_A, y_max]``.
    """
    lo, hi = support
    p, g = density.params, density.g
    if lo < p.r_A or hi > density.y_max:
        raise ValueError(
            f"support [{lo}, {hi}] must lie in [{p.r_A}, {density.y_max}]"
        )
    r, r_A = p.r, p.r_A

    def integrand(y):
        return r * y * (f(y + g) - f(y)) / g + (r_A - y) * fprime(y)

    return density.expect(integrand, tail=False)


# ---------------------------------------------------------------------------
# equal arms


def pi_zero_constant(p_A: float, g: float) -> float:
    """Normalising constant of ``(1 - y^2)^(2 r_A/g - 1)`` on ``(-1, 1)``."""
    if g <= 0:
        raise ValueError("g must be positive")
    if not 0.0 < p_A < 1.0:
        raise ValueError("p_A must lie in (0, 1)")
    e = 2.0 * (1.0 - p_A) / p_A / g - 1.0
    # weight='alg' integrates (y+1)^e (1-y)^e exactly at the endpoints
    val, _ = quad(lambda y: 1.0, -1.0, 1.0, weight="alg", wvar=(e, e), epsabs=1e-13, epsrel=1e-13)
    return 1.0 / val


def pi_zero_density(p_A: float, g: float, grid) -> np.ndarray:
    """Invariant density ``C (1 - y^2)^(2 r_A/g - 1)`` on ``(-1, 1)``, zero outside."""
    C = pi_zero_constant(p_A, g)
    e = 2.0 * (1.0 - p_A) / p_A / g - 1.0
    y = np.asarray(grid, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    out[inside] = C * (1.0 - y[inside] ** 2) ** e
    return out
