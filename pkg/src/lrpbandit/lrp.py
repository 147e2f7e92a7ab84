"""Monte Carlo simulation of the penalised two-armed bandit recursion.

One step from ``x`` with steps ``(gamma, rho)`` picks one of four atoms
with a single uniform ``u``::

    [0, x p_A)                 A evaluated, succeeds  x -> x + gamma (1 - x)
    [x p_A, x)                 A evaluated, fails     x -> x - gamma rho x
    [x, x + (1 - x) p_B)       B evaluated, succeeds  x -> x - gamma x
    [x + (1 - x) p_B, 1)       B evaluated, fails     x -> x + gamma rho (1 - x)
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .params import BanditParams, Coupled, ScheduleSpec, mean_field, schedule_arrays, schedule_value
from .rng import GOLDEN, Stream, mix64, stream_keys, unit

__all__ = [
    "LrpState",
    "StepAtom",
    "Trajectory",
    "BatchResult",
    "IncrementMoments",
    "step_distribution",
    "lrp_step",
    "martingale_increment_moments",
    "geometric_checkpoints",
    "run_trajectory",
    "run_batch",
    "run_pi_zero_coupled",
    "run_pi_zero_batch",
]

ATOM_LABELS = ("A-success", "A-failure", "B-success", "B-failure")


@dataclass(frozen=True)
class LrpState:
    n: int
    x: float


@dataclass(frozen=True)
class StepAtom:
    probability: float
    next_x: float
    label: str


@dataclass
class Trajectory:
    """Checkpointed record of one run.

    ``y`` is ``(1 - x_n)/rho_n`` (with ``rho_1`` used at ``n = 0``), or
    ``1 - 2 x_n`` for the ``pi = 0`` runs (``kind == "pi_zero"``).
    """

    n: np.ndarray
    x: np.ndarray
    y: np.ndarray
    terminal: LrpState
    seed: int
    index: int = 0
    clamps: int = 0
    kind: str = "normalized"


@dataclass
class BatchResult:
    """Checkpointed values for a contiguous block of trajectory indices."""

    n: np.ndarray  # checkpoint steps
    x: np.ndarray  # (n_traj, n_checkpoints)
    y: np.ndarray
    seed: int
    indices: np.ndarray
    clamps: np.ndarray
    kind: str = "normalized"

    @property
    def terminal_x(self):
        return self.x[:, -1]

    @property
    def terminal_y(self):
        return self.y[:, -1]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            n=self.n, x=self.x[i], y=self.y[i],
            terminal=LrpState(int(self.n[-1]), float(self.x[i, -1])),
            seed=self.seed, index=int(self.indices[i]),
            clamps=int(self.clamps[i]), kind=self.kind,
        )


@dataclass(frozen=True)
class IncrementMoments:
    """Conditional moments of the martingale increment at one state.

    ``variance_bound`` is ``p_A (1 - x) + rho^2 (1 - p_B)``.
    """

    mean: float
    second_moment: float
    variance_bound: float


def step_distribution(x: float, gamma: float, rho: float, params: BanditParams) -> list[StepAtom]:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    p_A, p_B = params.p_A, params.p_B
    gr = gamma * rho
    probs = (x * p_A, x * (1.0 - p_A), (1.0 - x) * p_B, (1.0 - x) * (1.0 - p_B))
    nexts = (x + gamma * (1.0 - x), x - gr * x, x - gamma * x, x + gr * (1.0 - x))
    return [StepAtom(p, nx, lab) for p, nx, lab in zip(probs, nexts, ATOM_LABELS)]


def _pick_atom(u, x, p_A, p_B):
    if u < x * p_A:
        return 0
    if u < x:
        return 1
    if u < x + (1.0 - x) * p_B:
        return 2
    return 3


def lrp_step(state: LrpState, spec: ScheduleSpec, params: BanditParams, rng: Stream) -> LrpState:
    """Advance one step using ``(gamma_{n+1}, rho_{n+1})`` and one uniform from ``rng``."""
    gamma, rho = schedule_value(spec, state.n + 1)
    atoms = step_distribution(state.x, gamma, rho, params)
    k = _pick_atom(rng.random(), state.x, params.p_A, params.p_B)
    return LrpState(state.n + 1, min(1.0, max(0.0, atoms[k].next_x)))


def martingale_increment_moments(x: float, rho: float, params: BanditParams) -> IncrementMoments:
    """Exact conditional mean and second moment of the martingale increment.

    Enumerates the four atoms; the increment divided by ``gamma`` does not
    depend on ``gamma``.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    p_A, p_B = params.p_A, params.p_B
    probs = np.array([x * p_A, x * (1 - p_A), (1 - x) * p_B, (1 - x) * (1 - p_B)])
    moves = np.array([1.0 - x, -rho * x, -x, rho * (1.0 - x)])
    dm = moves - mean_field(x, params, rho)
    return IncrementMoments(
        mean=float(probs @ dm),
        second_moment=float(probs @ dm**2),
        variance_bound=p_A * (1.0 - x) + rho**2 * (1.0 - p_B),
    )


def geometric_checkpoints(n_steps: int, per_decade: int = 4) -> np.ndarray:
    """``0``, ``ceil(10**(k/per_decade))`` up to ``n_steps``, and ``n_steps``."""
    pts = {0, n_steps}
    k = 0
    while True:
        v = math.ceil(10.0 ** (k / per_decade) - 1e-9)
        if v > n_steps:
            break
        pts.add(v)
        k += 1
    return np.array(sorted(pts), dtype=np.int64)


@njit(nogil=True, cache=True)
def _lrp_kernel(keys, x0, gam, rho, p_A, p_B, ckpt, out_x, clamps):
    B = keys.size
    x = np.full(B, x0)
    s = keys.copy()
    ci = 0
    while ci < ckpt.size and ckpt[ci] == 0:
        out_x[:, ci] = x
        ci += 1
    for i in range(gam.size):
        g = gam[i]
        gr = g * rho[i]
        for j in range(B):
            sj = s[j] + GOLDEN
            s[j] = sj
            u = unit(mix64(sj))
            xj = x[j]
            if u < xj:
                if u < xj * p_A:
                    xn = xj + g * (1.0 - xj)
                else:
                    xn = xj - gr * xj
            else:
                if u < xj + (1.0 - xj) * p_B:
                    xn = xj - g * xj
                else:
                    xn = xj + gr * (1.0 - xj)
            if xn < 0.0:
                xn = 0.0
                clamps[j] += 1
            elif xn > 1.0:
                xn = 1.0
                clamps[j] += 1
            x[j] = xn
        if ci < ckpt.size and ckpt[ci] == i + 1:
            out_x[:, ci] = x
            ci += 1


_BLOCK = 256


def _run_block(keys, x0, gam, rho, params, ckpt):
    out = np.empty((keys.size, ckpt.size))
    clamps = np.zeros(keys.size, dtype=np.int64)
    _lrp_kernel(keys, float(x0), gam, rho, params.p_A, params.p_B, ckpt, out, clamps)
    return out, clamps


def _simulate(spec, params, x0, n_steps, seed, n_traj, start_index, jobs, per_decade):
    if not 0.0 < x0 < 1.0:
        raise ValueError("x0 must lie in (0, 1)")
    if n_steps < 0 or n_traj < 0:
        raise ValueError("n_steps and n_traj must be non-negative")
    ckpt = geometric_checkpoints(n_steps, per_decade)
    gam, rho = schedule_arrays(spec, max(n_steps, 1))
    gam, rho = gam[:n_steps], rho[:n_steps]
    indices = np.arange(start_index, start_index + n_traj)
    keys = stream_keys(seed, indices)
    blocks = [keys[i:i + _BLOCK] for i in range(0, n_traj, _BLOCK)]
    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(lambda k: _run_block(k, x0, gam, rho, params, ckpt), blocks))
    else:
        results = [_run_block(k, x0, gam, rho, params, ckpt) for k in blocks]
    if results:
        x = np.concatenate([r[0] for r in results])
        clamps = np.concatenate([r[1] for r in results])
    else:
        x = np.empty((0, ckpt.size))
        clamps = np.empty(0, dtype=np.int64)
    return ckpt, x, clamps, indices


def _rho_at(spec, ckpt):
    return spec.values(np.maximum(ckpt, 1))[1]


def run_batch(
    spec: ScheduleSpec,
    params: BanditParams,
    x0: float,
    n_steps: int,
    seed: int,
    n_traj: int,
    start_index: int = 0,
    jobs: int = 1,
    per_decade: int = 4,
) -> BatchResult:
    """Simulate trajectories ``start_index .. start_index + n_traj - 1``.

    Trajectory ``i`` draws from the stream ``(seed, i)`` only, so the output
    for a given index does not depend on batching or on ``jobs``.
    """
    ckpt, x, clamps, indices = _simulate(
        spec, params, x0, n_steps, seed, n_traj, start_index, jobs, per_decade
    )
    y = (1.0 - x) / _rho_at(spec, ckpt)
    return BatchResult(ckpt, x, y, seed, indices, clamps)


def run_trajectory(
    spec: ScheduleSpec,
    params: BanditParams,
    x0: float,
    n_steps: int,
    seed: int,
    index: int = 0,
    per_decade: int = 4,
) -> Trajectory:
    return run_batch(spec, params, x0, n_steps, seed, 1, index, per_decade=per_decade).trajectory(0)


def _check_pi_zero(params):
    if params.pi != 0.0:
        raise ValueError("the pi = 0 runs need p_A == p_B")


def run_pi_zero_coupled(
    g: float,
    a_coef: float,
    params: BanditParams,
    x0: float,
    n_steps: int,
    seed: int,
    n_traj: int = 1,
    start_index: int = 0,
    jobs: int = 1,
):
    """Equal arms with ``gamma_n = g rho_n``; records ``y_n = 1 - 2 x_n``.

    Returns a :class:`Trajectory` when ``n_traj == 1`` and a
    :class:`BatchResult` otherwise.
    """
    batch = run_pi_zero_batch(g, a_coef, params, x0, n_steps, seed, n_traj, start_index, jobs)
    return batch.trajectory(0) if n_traj == 1 else batch


def run_pi_zero_batch(
    g: float,
    a_coef: float,
    params: BanditParams,
    x0: float,
    n_steps: int,
    seed: int,
    n_traj: int,
    start_index: int = 0,
    jobs: int = 1,
    per_decade: int = 4,
) -> BatchResult:
    """As :func:`run_pi_zero_coupled`, always returning a :class:`BatchResult`."""
    _check_pi_zero(params)
    spec = Coupled(g=g, a_coef=a_coef)
    ckpt, x, clamps, indices = _simulate(
        spec, params, x0, n_steps, seed, n_traj, start_index, jobs, per_decade
    )
    return BatchResult(ckpt, x, 1.0 - 2.0 * x, seed, indices, clamps, kind="pi_zero")
