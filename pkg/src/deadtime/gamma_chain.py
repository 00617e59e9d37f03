"""Finite state-space reduction for gamma-distributed dead times.

When the dead time is gamma with integer kernel order ``n`` and rate
``beta``, the ensemble dynamics close into ``n + 2`` ordinary differential
equations: auxiliary states ``b_0 .. b_n`` (filtered copies of the event
rate, units 1/s) plus the active fraction ``A``.  The state ordering
``(b_0, ..., b_n, A)`` is fixed and part of the tested interface.

The weighted sum ``A + (b_0 + ... + b_n)/beta`` equals one along every
trajectory; both integrators below preserve it to machine precision because
it is an exact left null vector of the generator.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import InputSignal, TimeGrid, Trace

__all__ = [
    "ChainState",
    "build_generator",
    "conserved_functional",
    "equilibrium_state",
    "matrix_exponential",
    "step_response",
    "integrate",
]


@dataclass(frozen=True, eq=False)
class ChainState:
    """State vector ``(b_0, ..., b_n, A)`` of the gamma chain."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("state needs at least two entries (b_0 and A)")
        if not np.all(np.isfinite(v)):
            raise ValueError("state entries must be finite")
        if np.any(v[:-1] < -1e-9):
            raise ValueError("auxiliary states must be non-negative")
        if not (-1e-9 <= v[-1] <= 1.0 + 1e-9):
            raise ValueError(f"active fraction {v[-1]} outside [0, 1]")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size - 2

    @property
    def active(self) -> float:
        return float(self.values[-1])

    @property
    def aux(self) -> np.ndarray:
        return self.values[:-1]


def conserved_functional(state: ChainState, beta: float) -> float:
    """Weighted occupation sum that every trajectory keeps at one."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    return state.active + float(np.sum(state.aux)) / beta


def _check_params(n, beta):
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ValueError(f"kernel order must be a non-negative integer, got {n}")
    if not (beta > 0.0) or not math.isfinite(beta):
        raise ValueError(f"beta must be positive and finite, got {beta}")


def build_generator(n: int, beta: float, lam: float) -> np.ndarray:
    """Generator matrix of the chain for a constant input rate.

    Row ``0``: ``beta*lam*A - beta*b_0``; rows ``1..n``:
    ``beta*(b_{k-1} - b_k)``; last row: ``b_n - lam*A``.
    """
    _check_params(n, beta)
    if lam < 0.0:
        raise ValueError("rate must be non-negative")
    m = np.zeros((n + 2, n + 2))
    m[0, 0] = -beta
    m[0, n + 1] = beta * lam
    for k in range(1, n + 1):
        m[k, k - 1] = beta
        m[k, k] = -beta
    m[n + 1, n] = 1.0
    m[n + 1, n + 1] = -lam
    return m


def equilibrium_state(n: int, beta: float, lam: float) -> ChainState:
    """Stationary chain state: all auxiliary states at the equilibrium rate.

    The equilibrium event rate is ``1/(1/lam + mean)`` with mean dead time
    ``(n+1)/beta``; the active fraction is one minus rate times mean.
    """
    _check_params(n, beta)
    if lam < 0.0:
        raise ValueError("rate must be non-negative")
    v = np.zeros(n + 2)
    if lam == 0.0:
        v[-1] = 1.0
        return ChainState(v)
    mean = (n + 1) / beta
    nu = 1.0 / (1.0 / lam + mean)
    v[:-1] = nu
    v[-1] = 1.0 - nu * mean
    return ChainState(v)


def matrix_exponential(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Taylor series.

    The matrix is halved until its 1-norm is at most 0.5, the series is
    summed through the 20th power, and the result is squared back.  At that
    norm the series remainder is below 1e-26, far under double precision.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix")
    norm = float(np.linalg.norm(m, 1))
    squarings = 0
    if norm > 0.5:
        squarings = int(math.ceil(math.log2(norm / 0.5)))
    x = m / (2.0**squarings)
    out = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for k in range(1, 21):
        term = term @ x / k
        out += term
    for _ in range(squarings):
        out = out @ out
    return out


def step_response(
    n: int, beta: float, lam0: float, lam1: float, grid: TimeGrid
) -> Trace:
    """Ensemble response to an input step ``lam0 -> lam1`` at time zero.

    Starts from the ``lam0`` equilibrium and propagates with the matrix
    exponential of the ``lam1`` generator, one grid step at a time.
    """
    _check_params(n, beta)
    if lam1 <= 0.0:
        raise ValueError("post-switch rate must be positive")
    if grid.t0 < 0.0:
        raise ValueError("grid must start at or after the switch")
    m = build_generator(n, beta, lam1)
    b = equilibrium_state(n, beta, lam0).values.copy()
    if grid.t0 > 0.0:
        b = matrix_exponential(m * grid.t0) @ b
    prop = matrix_exponential(m * grid.dt)
    active = np.empty(grid.n)
    for i in range(grid.n):
        active[i] = b[-1]
        b = prop @ b
    return Trace(grid, active, lam1 * active)


def integrate(
    n: int,
    beta: float,
    sig: InputSignal,
    b0: ChainState,
    grid: TimeGrid,
    return_final_state: bool = False,
):
    """Classical fourth-order time stepping with a time-dependent input rate.

    The step must satisfy ``(max rate + beta) * dt <= 0.1``; larger steps are
    rejected rather than silently under-resolved.  With
    ``return_final_state`` the result is a ``(trace, state)`` pair, which
    lets callers audit the conserved occupation sum after long runs.
    """
    _check_params(n, beta)
    if b0.n != n:
        raise ValueError(f"state has kernel order {b0.n}, expected {n}")
    lam_max = sig.max_rate(grid.t0, grid.t_end)
    if (lam_max + beta) * grid.dt > 0.1 + 1e-12:
        raise ValueError(
            f"step {grid.dt} too large: need (max rate + beta)*dt <= 0.1, "
            f"got {(lam_max + beta) * grid.dt:.3g}"
        )
    gap = abs(conserved_functional(b0, beta) - 1.0)
    if gap > 1e-9:
        raise ValueError(f"initial state breaks the occupation sum by {gap:.3e}")

    m_base = build_generator(n, beta, 0.0)
    k_col = np.zeros(n + 2)
    k_col[0] = beta
    k_col[-1] = -1.0

    def deriv(t, b):
        return m_base @ b + (sig.rate(t) * b[-1]) * k_col

    h = grid.dt
    b = b0.values.copy()
    t = grid.times()
    active = np.empty(grid.n)
    rate = np.empty(grid.n)
    for i in range(grid.n):
        active[i] = b[-1]
        rate[i] = sig.rate(t[i]) * b[-1]
        if i == grid.n - 1:
            break
        k1 = deriv(t[i], b)
        k2 = deriv(t[i] + 0.5 * h, b + 0.5 * h * k1)
        k3 = deriv(t[i] + 0.5 * h, b + 0.5 * h * k2)
        k4 = deriv(t[i] + h, b + h * k3)
        b = b + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    trace = Trace(grid, active, rate)
    if return_final_state:
        return trace, ChainState(b)
    return trace
