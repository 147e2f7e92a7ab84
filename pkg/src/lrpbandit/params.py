"""Bandit parameters, step/penalty schedules and closed-form constants.

The penalised two-armed bandit (linear reward-penalty) updates the share
``x`` of arm A with a reward step ``gamma_n`` and a penalty step
``gamma_n * rho_n``.  Three schedule families are supported:

``PowerLaw``
    ``gamma_n = C n^-a``, ``rho_n = C' n^-r``.
``ConstantPenalty``
    ``gamma_n = C n^-a``, ``rho_n = rho``.
``Coupled``
    ``rho_n = a_coef / sqrt(n)``, ``gamma_n = g rho_n``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "BanditParams",
    "PowerLaw",
    "ConstantPenalty",
    "Coupled",
    "ScheduleSpec",
    "ConditionReport",
    "ConstantsBundle",
    "schedule_value",
    "schedule_arrays",
    "validate_schedule",
    "derived_constants",
    "fixed_point_constant_rho",
    "mean_field",
    "schedule_from_dict",
    "schedule_to_dict",
]

_DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class BanditParams:
    """Success probabilities of the two arms, ``0 < p_B <= p_A < 1``."""

    p_A: float
    p_B: float

    def __post_init__(self):
        if not (0.0 < self.p_B <= self.p_A < 1.0):
            raise ValueError(
                f"need 0 < p_B <= p_A < 1, got p_A={self.p_A}, p_B={self.p_B}"
            )

    @property
    def pi(self) -> float:
        return self.p_A - self.p_B

    @property
    def r(self) -> float:
        return self.p_B / self.p_A

    @property
    def r_A(self) -> float:
        return (1.0 - self.p_A) / self.p_A

    def require_gap(self):
        if self.pi <= 0.0:
            raise ValueError("this quantity needs p_B < p_A")


@dataclass(frozen=True)
class PowerLaw:
    C: float
    a: float
    C_prime: float
    r: float

    def __post_init__(self):
        if min(self.C, self.a, self.C_prime, self.r) <= 0:
            raise ValueError("PowerLaw needs C, a, C_prime, r > 0")
        _check_first_step(self.C, self.C * self.C_prime)

    def values(self, n):
        n = np.asarray(n, dtype=float)
        return self.C * n ** (-self.a), self.C_prime * n ** (-self.r)


@dataclass(frozen=True)
class ConstantPenalty:
    C: float
    a: float
    rho: float

    def __post_init__(self):
        if self.C <= 0 or self.a <= 0:
            raise ValueError("ConstantPenalty needs C, a > 0")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("ConstantPenalty needs rho in (0, 1]")
        _check_first_step(self.C, self.C * self.rho)

    def values(self, n):
        n = np.asarray(n, dtype=float)
        return self.C * n ** (-self.a), np.full_like(n, self.rho)


@dataclass(frozen=True)
class Coupled:
    g: float
    a_coef: float

    def __post_init__(self):
        if self.g <= 0 or self.a_coef <= 0:
            raise ValueError("Coupled needs g, a_coef > 0")
        _check_first_step(self.g * self.a_coef, self.g * self.a_coef**2)

    def values(self, n):
        n = np.asarray(n, dtype=float)
        rho = self.a_coef / np.sqrt(n)
        return self.g * rho, rho


ScheduleSpec = Union[PowerLaw, ConstantPenalty, Coupled]
_VARIANTS = {"PowerLaw": PowerLaw, "ConstantPenalty": ConstantPenalty, "Coupled": Coupled}


def _check_first_step(gamma1, gamma_rho1):
    # both sequences decrease, so n = 1 is the binding case
    if not gamma1 < 1.0:
        raise ValueError(f"gamma_1 = {gamma1} must be < 1")
    if not gamma_rho1 < 1.0:
        raise ValueError(f"gamma_1 * rho_1 = {gamma_rho1} must be < 1")


def _require_spec(spec):
    if not isinstance(spec, (PowerLaw, ConstantPenalty, Coupled)):
        raise TypeError(
            "only the PowerLaw, ConstantPenalty and Coupled families are "
            f"supported, got {type(spec).__name__}"
        )


def schedule_value(spec: ScheduleSpec, n: int) -> tuple[float, float]:
    """Return ``(gamma_n, rho_n)`` for ``n >= 1``."""
    _require_spec(spec)
    if n < 1:
        raise ValueError("n must be >= 1")
    gamma, rho = spec.values(n)
    return float(gamma), float(rho)


def schedule_arrays(spec: ScheduleSpec, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """``gamma_n`` and ``rho_n`` for ``n = 1..n_steps`` as arrays."""
    _require_spec(spec)
    return spec.values(np.arange(1, n_steps + 1))


def schedule_to_dict(spec: ScheduleSpec) -> dict:
    _require_spec(spec)
    return {"variant": type(spec).__name__, **asdict(spec)}


def schedule_from_dict(d: dict) -> ScheduleSpec:
    d = dict(d)
    try:
        cls = _VARIANTS[d.pop("variant")]
    except KeyError as exc:
        raise ValueError(f"unknown or missing schedule variant: {exc}") from None
    return cls(**d)


# --------------------------------------------------------------------------
# hypothesis checks


@dataclass(frozen=True)
class ConditionReport:
    """Analytic verdict on each step-size hypothesis for one schedule.

    Flags are decided from the family's exponents, never by sampling.
    ``theorems`` lists the convergence results whose hypotheses all hold.
    """

    schedule: dict
    gamma_nonincreasing: bool
    sum_gamma_infinite: bool
    hoeffding: bool
    rho_to_zero: bool
    gamma_over_rho_to_zero: bool
    gamma_over_rho_bounded: bool
    sum_rho_gamma_infinite: bool
    rho_increment_small: bool
    beta_condition: bool
    eta_condition: bool
    gamma_sq_increment_small: bool
    coupled_condition: bool
    pi_positive: bool
    theorems: list = field(default_factory=list)

    @property
    def rho_conditions(self) -> bool:
        return (
            self.rho_to_zero
            and self.gamma_over_rho_to_zero
            and self.sum_rho_gamma_infinite
            and self.rho_increment_small
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rho_conditions"] = self.rho_conditions
        return d


# Result labels, in the order they are reported.
THEOREM_LABELS = (
    "constant_penalty_limit",  # X_n -> x*_rho a.s.
    "limit_in_0_or_1",  # rho_n -> 0 gives X_inf in {0, 1}
    "infallibility",  # X_n -> 1 a.s.
    "rate_in_probability",  # (1 - X_n)/rho_n -> (1 - p_A)/pi in probability
    "rate_almost_sure",  # same limit a.s.
    "weak_limit",  # Y_n => stationary law of the jump process
    "pi_zero_diffusion_limit",  # pi = 0, gamma = g rho: 1 - 2X_n => diffusion law
)


def _exponents(spec):
    """``(a, r, coupled_ratio)`` with gamma_n ~ n^-a and rho_n ~ n^-r."""
    if isinstance(spec, PowerLaw):
        return spec.a, spec.r, spec.a == spec.r
    if isinstance(spec, ConstantPenalty):
        return spec.a, 0.0, False
    return 0.5, 0.5, True


def validate_schedule(spec: ScheduleSpec, params: BanditParams) -> ConditionReport:
    """Decide every hypothesis analytically for a parametric schedule."""
    _require_spec(spec)
    a, r, ratio_constant = _exponents(spec)
    base = dict(
        gamma_nonincreasing=True,  # a > 0 for every family
        sum_gamma_infinite=a <= 1.0,
        hoeffding=a > 0.0,  # sum exp(-theta n^a / C) < inf
    )
    flags = dict(
        rho_to_zero=r > 0.0,
        gamma_over_rho_to_zero=a > r,
        gamma_over_rho_bounded=a >= r,
        sum_rho_gamma_infinite=a + r <= 1.0,
        # |rho_n - rho_{n-1}| ~ r n^{-r-1} against rho_n gamma_n ~ n^{-a-r}
        rho_increment_small=(r == 0.0) or a < 1.0,
        # gamma_n rho_n^beta has relative increment ~ 1/n against gamma_n ~ n^-a
        beta_condition=a < 1.0,
        # rho^{1+eta}/gamma ~ n^{a - r(1+eta)} must grow for some eta > 0
        eta_condition=a > r,
        gamma_sq_increment_small=True,  # (gamma_n^2 - gamma_{n-1}^2)/gamma_n^2 ~ 2a/n
        coupled_condition=ratio_constant,
        pi_positive=params.pi > 0.0,
    )
    baseline = all(base.values())
    f = flags
    rho_conditions = (
        f["rho_to_zero"]
        and f["gamma_over_rho_to_zero"]
        and f["sum_rho_gamma_infinite"]
        and f["rho_increment_small"]
    )
    theorems = []
    if baseline and isinstance(spec, ConstantPenalty):
        theorems.append("constant_penalty_limit")
    if baseline and f["rho_to_zero"]:
        theorems.append("limit_in_0_or_1")
        if f["gamma_over_rho_bounded"] and f["sum_rho_gamma_infinite"] and f["pi_positive"]:
            theorems.append("infallibility")
    if baseline and rho_conditions and f["pi_positive"]:
        theorems.append("rate_in_probability")
        if f["beta_condition"] and f["eta_condition"]:
            theorems.append("rate_almost_sure")
    if baseline and f["coupled_condition"] and f["gamma_sq_increment_small"]:
        if f["pi_positive"]:
            theorems.append("weak_limit")
        elif isinstance(spec, Coupled):
            theorems.append("pi_zero_diffusion_limit")
    return ConditionReport(
        schedule=schedule_to_dict(spec), **base, **flags, theorems=theorems
    )


# --------------------------------------------------------------------------
# closed forms


@dataclass(frozen=True)
class ConstantsBundle:
    """Closed-form constants of the limit law for a jump size ``g``.

    ``nu_mean`` and ``nu_var`` are ``None`` when ``pi == 0``.
    """

    pi: float
    r: float
    r_A: float
    g: float
    g_star: float
    d: float
    nu_mean: float | None
    nu_var: float | None


def derived_constants(params: BanditParams, g: float) -> ConstantsBundle:
    if g <= 0:
        raise ValueError("g must be positive")
    p_A, p_B, pi = params.p_A, params.p_B, params.pi
    r_A = (1.0 - p_A) / p_A
    r = p_B / p_A
    g_star = p_B * (1.0 - p_A) / p_A**2
    if pi > 0:
        nu_mean = (1.0 - p_A) / pi
        nu_var = g * p_B * (1.0 - p_A) / (2.0 * pi**2)
    else:
        nu_mean = nu_var = None
    return ConstantsBundle(
        pi=pi, r=r, r_A=r_A, g=g, g_star=g_star, d=r * r_A / g,
        nu_mean=nu_mean, nu_var=nu_var,
    )


def _h(x):
    return x * (1.0 - x)


def _kappa(x, p_A, p_B):
    return -(1.0 - p_A) * x**2 + (1.0 - p_B) * (1.0 - x) ** 2


def mean_field(x, params: BanditParams, rho: float):
    """Drift ``pi h(x) + rho kappa(x)`` of the recursion."""
    return params.pi * _h(x) + rho * _kappa(x, params.p_A, params.p_B)


def fixed_point_constant_rho(params: BanditParams, rho: float) -> float:
    """Unique zero in (0, 1) of the mean field at constant penalty ``rho``."""
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    p_A, p_B, pi = params.p_A, params.p_B, params.pi
    if abs(pi) < _DEGENERATE_TOL or abs(rho - 1.0) < _DEGENERATE_TOL:
        # the quadratic term vanishes; the mean field is affine
        return (1.0 - p_B) / ((1.0 - p_A) + (1.0 - p_B))
    # -pi(1-rho) x^2 + b x + c = 0, larger root; pick the form without cancellation
    b = pi - 2.0 * rho * (1.0 - p_B)
    c = rho * (1.0 - p_B)
    sq = math.sqrt(pi**2 + 4.0 * rho**2 * (1.0 - p_B) * (1.0 - p_A))
    if b >= 0:
        x = (b + sq) / (2.0 * pi * (1.0 - rho))
    else:
        x = 2.0 * c / (sq - b)
    if abs(mean_field(x, params, rho)) > 1e-13 or not 0.0 < x < 1.0:
        x = brentq(lambda u: mean_field(u, params, rho), 0.0, 1.0, xtol=1e-16, rtol=4e-16)
    return x
