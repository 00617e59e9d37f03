"""Forward integration of the active-fraction dynamics.

Two integrators live here.  ``integrate_ppd`` advances the fixed-dead-time
balance A'(t) = nu(t - d) - nu(t), stepping with the classical four-stage
Runge-Kutta rule; because the step divides the delay exactly, every delayed
read lands on a buffered sample and no interpolation of the delayed term is
needed.  ``integrate_pprd`` advances the distributed-memory variant
A'(t) = -lam(t) A(t) + int rho(x) nu(t - x) dx, with the memory integral
evaluated by trapezoid quadrature against buffered samples.

Both integrators record the solution at half-step resolution: the value at
the midpoint of each step is reconstructed by cubic Hermite interpolation
from the step endpoints and one-sided derivatives, which keeps the delayed
reads of later windows accurate to the order of the stepper itself.

``normalization_residual`` audits the occupation-balance invariant
A(t) + int nu(t') F(t - t') dt' = 1 (with F the dead-time survivor) on a
finished trace; it is the conservation check for everything above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DeadTimeLaw,
    FixedDeadTime,
    History,
    InputSignal,
    NumericalError,
    TabulatedDeadTime,
    TimeGrid,
    Trace,
    equilibrium_history,
)

__all__ = [
    "integrate_ppd",
    "integrate_pprd",
    "normalization_residual",
    "ResidualSeries",
]

# fraction of the dead-time distribution allowed beyond the truncated window
KERNEL_TAIL_MASS = 1e-12

_GATE_TOL = 1e-9
_STIFFNESS_LIMIT = 0.1


def _sample_callable(fn, ts: np.ndarray) -> np.ndarray:
    """Evaluate a history callable on an array, tolerating scalar-only ones."""
    try:
        out = np.asarray(fn(ts), dtype=float)
        if out.shape == ts.shape:
            return out
    except Exception:
        pass
    return np.array([float(fn(float(s))) for s in ts])


def _history_samples(history: History, ts: np.ndarray, what: str) -> np.ndarray:
    try:
        return _sample_callable(history.rate if what == "rate" else history.active, ts)
    except Exception as exc:
        raise ValueError(
            f"history does not cover [{ts[0]:.6g}, {ts[-1]:.6g}]: {exc}"
        ) from exc


def _simpson_weights(n_cells: int, h: float) -> np.ndarray:
    """Composite Simpson weights on ``n_cells`` uniform cells.

    An odd cell count gets a trapezoid patch on the last cell; the loss of
    order there is local and does not affect the audited bounds.
    """
    if n_cells < 2:
        raise ValueError("need at least two cells for Simpson weights")
    w = np.zeros(n_cells + 1)
    even = n_cells if n_cells % 2 == 0 else n_cells - 1
    w[0:even + 1:2] += 2.0 * h / 3.0
    w[1:even:2] = 4.0 * h / 3.0
    w[0] = h / 3.0
    w[even] -= h / 3.0
    if even != n_cells:
        w[-2] += h / 2.0
        w[-1] += h / 2.0
    return w


def _check_gate_ppd(history: History, t0: float, d: float) -> None:
    ts = np.linspace(t0 - d, t0, 8193)
    nu = _history_samples(history, ts, "rate")
    w = _simpson_weights(8192, d / 8192.0)
    balance = float(w @ nu) + float(history.active(t0))
    if abs(balance - 1.0) > _GATE_TOL:
        raise ValueError(
            "history violates the occupation normalization at the start "
            f"(balance {balance!r}, expected 1 within {_GATE_TOL})"
        )


def _stiffness_guard(sig: InputSignal, grid: TimeGrid) -> None:
    lam_max = sig.max_rate(grid.t0, grid.t_end)
    if lam_max * grid.dt > _STIFFNESS_LIMIT:
        raise ValueError(
            f"step {grid.dt} too large for peak rate {lam_max}: "
            f"need rate*dt <= {_STIFFNESS_LIMIT}"
        )


def _finish_trace(grid: TimeGrid, a_nodes: np.ndarray, lam_nodes: np.ndarray) -> Trace:
    lo, hi = float(np.min(a_nodes)), float(np.max(a_nodes))
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise NumericalError(
            "active fraction left [0, 1]", condition=max(-lo, hi - 1.0)
        )
    a = np.clip(a_nodes, 0.0, 1.0)
    return Trace(grid, a, lam_nodes * a)


def integrate_ppd(
    sig: InputSignal,
    d: float,
    history: History | None,
    grid: TimeGrid,
) -> Trace:
    """Integrate the fixed-dead-time dynamics on ``grid``.

    The step must divide the dead time: ``grid.dt = d/m`` with integer
    ``m >= 64``.  ``history`` supplies the pair (A, nu) on ``[t0 - d, t0]``
    and must satisfy the occupation normalization at ``t0`` within 1e-9;
    ``None`` selects the equilibrium for the left-limit rate at ``t0``.
    """
    if not (d > 0.0):
        raise ValueError(f"dead time must be positive, got {d}")
    h = grid.dt
    m = int(round(d / h))
    if m < 64 or abs(m * h - d) > 1e-9 * d:
        raise ValueError(
            f"step {h} must divide the dead time {d} with at least 64 steps "
            "per window"
        )
    _stiffness_guard(sig, grid)
    if history is None:
        history = equilibrium_history(float(sig.rate_left(grid.t0)), d)
    _check_gate_ppd(history, grid.t0, d)

    n_steps = grid.n - 1
    hh = 0.5 * h
    off = 2 * m  # buffer index of t0
    size = off + 2 * n_steps + 1
    half_times = grid.t0 + hh * (np.arange(size) - off)

    lam_r = np.asarray(sig.rate(half_times), dtype=float)
    lam_l = np.asarray(sig.rate_left(half_times), dtype=float)

    nu = np.empty(size)
    nu[: off + 1] = _history_samples(history, half_times[: off + 1], "rate")
    aa = np.empty(size)
    a0 = float(history.active(grid.t0))
    aa[off] = a0
    # the stored start value is the right limit; the left limit stays
    # available for the read that closes the first delay window
    left_exceptions = {off: float(nu[off])}
    nu[off] = lam_r[off] * a0
    for j in np.nonzero(lam_l != lam_r)[0]:
        if j > off:
            left_exceptions[int(j)] = None

    h6 = h / 6.0
    h8 = h / 8.0
    for p in range(0, 2 * n_steps, 2):
        w = p + off
        a = aa[w]
        g1 = nu[p]
        k1 = g1 - lam_r[w] * a
        gm = nu[p + 1]
        lam_m = lam_r[w + 1]
        k2 = gm - lam_m * (a + hh * k1)
        k3 = gm - lam_m * (a + hh * k2)
        g4 = nu[p + 2]
        if p + 2 in left_exceptions:
            stored = left_exceptions[p + 2]
            g4 = stored if stored is not None else lam_l[p + 2] * aa[p + 2]
        lam_e = lam_l[w + 2]
        k4 = g4 - lam_e * (a + h * k3)
        a1 = a + h6 * (k1 + 2.0 * (k2 + k3) + k4)
        d1 = g4 - lam_e * a1
        a_mid = 0.5 * (a + a1) + h8 * (k1 - d1)
        aa[w + 1] = a_mid
        aa[w + 2] = a1
        nu[w + 1] = lam_r[w + 1] * a_mid
        nu[w + 2] = lam_r[w + 2] * a1

    a_nodes = aa[off::2].copy()
    return _finish_trace(grid, a_nodes, lam_r[off::2].copy())


def _kernel_window(law: DeadTimeLaw) -> float:
    w = float(law.quantile(1.0 - KERNEL_TAIL_MASS))
    if not (w > 0.0):
        raise ValueError("dead-time law has no positive support window")
    return w


def integrate_pprd(
    sig: InputSignal,
    law: DeadTimeLaw,
    history: History | None,
    grid: TimeGrid,
) -> Trace:
    """Integrate the distributed-dead-time dynamics on ``grid``.

    The memory kernel is the dead-time density truncated at its
    ``1 - 1e-12`` quantile, with the clipped mass folded into the last
    quadrature node; an atom at zero re-activates its mass fraction
    instantly and therefore acts through the local coefficient.  The step
    must resolve the window: ``grid.dt <= window/256``.  A fixed dead time
    delegates to :func:`integrate_ppd`, whose stricter grid rules then
    apply.
    """
    if isinstance(law, FixedDeadTime):
        return integrate_ppd(sig, law.duration, history, grid)

    window = _kernel_window(law)
    h = grid.dt
    if h > window / 256.0 * (1.0 + 1e-12):
        raise ValueError(
            f"step {h} too coarse for the {window:.6g}-long memory window: "
            "need at least 256 cells"
        )
    _stiffness_guard(sig, grid)
    if history is None:
        history = equilibrium_history(float(sig.rate_left(grid.t0)), law.mean())

    n_cells = int(np.ceil(window / h - 1e-12))
    x = h * np.arange(n_cells + 1)
    kern = np.asarray(law.density(x), dtype=float) * h
    kern[0] *= 0.5
    kern[-1] *= 0.5
    kern[-1] += float(law.survivor(x[-1]))  # folded truncation mass
    # the sampled kernel must carry exactly the continuous mass fraction,
    # or constants stop being fixed points and every run drifts at a rate
    # set by the quadrature's mass defect; the defect is known, remove it
    atom = float(law.atom0)
    kern *= (1.0 - atom) / float(np.sum(kern))
    # the x = 0 node acts on the not-yet-buffered current value, so it joins
    # the local coefficient together with the instant re-activation atom;
    # buffered reads start at x = h
    local = atom + kern[0]
    tail = kern[1:][::-1].copy()

    n_steps = grid.n - 1
    hh = 0.5 * h
    off = 2 * n_cells
    size = off + 2 * n_steps + 1
    half_times = grid.t0 + hh * (np.arange(size) - off)

    lam_r = np.asarray(sig.rate(half_times), dtype=float)
    lam_l = np.asarray(sig.rate_left(half_times), dtype=float)

    nu = np.empty(size)
    nu[: off + 1] = _history_samples(history, half_times[: off + 1], "rate")
    aa = np.empty(size)
    a0 = float(history.active(grid.t0))
    if not (-1e-9 <= a0 <= 1.0 + 1e-9):
        raise ValueError(f"history active fraction {a0} outside [0, 1]")
    aa[off] = a0
    # quadrature reads can hit rate jumps exactly; the correct trapezoid
    # split weights both one-sided values equally, so buffered samples at
    # jump nodes store the average of the two limits
    lam_avg = 0.5 * (lam_l + lam_r)
    nu[off] = 0.5 * (nu[off] + lam_r[off] * a0)

    c_r = lam_r * (local - 1.0)
    c_l = lam_l * (local - 1.0)

    h6 = h / 6.0
    h8 = h / 8.0
    t_end = tail @ nu[0 : 2 * n_cells - 1 : 2]
    for p in range(0, 2 * n_steps, 2):
        w = p + off
        a = aa[w]
        k1 = c_r[w] * a + t_end
        conv_m = tail @ nu[p + 1 : w : 2]
        k2 = c_r[w + 1] * (a + hh * k1) + conv_m
        k3 = c_r[w + 1] * (a + hh * k2) + conv_m
        conv4 = tail @ nu[p + 2 : w + 1 : 2]
        k4 = c_l[w + 2] * (a + h * k3) + conv4
        a1 = a + h6 * (k1 + 2.0 * (k2 + k3) + k4)
        d1 = c_l[w + 2] * a1 + conv4
        a_mid = 0.5 * (a + a1) + h8 * (k1 - d1)
        aa[w + 1] = a_mid
        aa[w + 2] = a1
        nu[w + 1] = lam_avg[w + 1] * a_mid
        nu[w + 2] = lam_avg[w + 2] * a1
        t_end = conv4

    a_nodes = aa[off::2].copy()
    return _finish_trace(grid, a_nodes, lam_r[off::2].copy())


@dataclass(frozen=True)
class ResidualSeries:
    """Occupation-balance residual sampled along a trace tail."""

    times: np.ndarray
    values: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def normalization_residual(
    trace: Trace, sig: InputSignal, law: DeadTimeLaw
) -> ResidualSeries:
    """Audit A(t) + int nu(t') F(t - t') dt' - 1 along a finished trace.

    The memory integral is evaluated on the trace grid: trapezoid over the
    sharp window of a fixed dead time, Simpson weights against a smooth
    survivor otherwise.  The residual can only be formed once the trace is
    at least one memory window long.  The event rate is rebuilt from the
    input signal and the traced active fraction rather than read back,
    making the audit independent of the stored rate column.
    """
    h = trace.grid.dt
    times = trace.grid.times()
    nu = np.asarray(sig.rate(times), dtype=float) * trace.active

    if isinstance(law, FixedDeadTime):
        d = law.duration
        n_cells = int(round(d / h))
        if n_cells < 2 or abs(n_cells * h - d) > 1e-9 * d:
            raise ValueError(
                f"trace step {h} does not resolve the dead time {d}"
            )
        # sharp window: plain trapezoid, which is exact across the
        # node-aligned kinks that the fixed delay propagates into nu
        kernel = np.full(n_cells + 1, h)
        kernel[0] = kernel[-1] = 0.5 * h
    else:
        window = _kernel_window(law)
        n_cells = int(np.ceil(window / h - 1e-12))
        if n_cells < 2:
            raise ValueError("trace step does not resolve the memory window")
        x = h * np.arange(n_cells + 1)
        kernel = _simpson_weights(n_cells, h) * np.asarray(
            law.survivor(x), dtype=float
        )

    if trace.grid.n <= n_cells:
        raise ValueError(
            f"trace too short to audit: need more than {n_cells} samples, "
            f"got {trace.grid.n}"
        )
    mem = np.convolve(nu, kernel, mode="valid")
    r = trace.active[n_cells:] + mem - 1.0
    return ResidualSeries(times=times[n_cells:], values=r)
