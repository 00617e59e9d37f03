"""Domain types shared across the package.

Times are seconds and rates are hertz throughout.  Angular frequencies are
derived from ordinary frequencies in exactly one place (:func:`angular_frequency`)
so that no ``2*pi`` factor can drift between modules.

Everything here is an immutable value object with pure-function semantics,
safe to share between worker threads.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

TWO_PI = 2.0 * math.pi

#: Tail probability used to truncate dead-time distributions onto a finite
#: support window.  Chosen so the discarded mass is far below every shipped
#: tolerance.
KERNEL_TAIL = 1e-12


class NumericalError(RuntimeError):
    """A solver could not produce a trustworthy result.

    Carries an optional ``condition`` attribute (a condition-number estimate
    or similar diagnostic) so callers can report why the computation was
    rejected.
    """

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class NotRepresentableError(ValueError):
    """A renewal process admits no valid refractory representation.

    ``x`` is the first abscissa where the constraint fails and ``bound`` the
    offending value, when known.
    """

    def __init__(self, message: str, x: float | None = None, bound: float | None = None):
        super().__init__(message)
        self.x = x
        self.bound = bound


def angular_frequency(frequency: float) -> float:
    """Angular frequency ``2*pi*f`` for an ordinary frequency in hertz."""
    return TWO_PI * frequency


def _fmt(value: float) -> str:
    """Shortest round-trip decimal used by every CSV writer."""
    return format(float(value), ".17g")


# ---------------------------------------------------------------------------
# time grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid; sample ``i`` sits at ``t0 + i*dt``.

    Parameters
    ----------
    t0 : float
        Time of the first sample.
    dt : float
        Strictly positive spacing.
    n : int
        Number of samples, at least one.
    """

    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if not (self.dt > 0.0) or not math.isfinite(self.dt):
            raise ValueError(f"grid spacing must be positive and finite, got {self.dt}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"grid length must be a positive integer, got {self.n}")
        if not math.isfinite(self.t0):
            raise ValueError("grid origin must be finite")

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        """Time of the last sample."""
        return self.t0 + self.dt * (self.n - 1)

    @property
    def span(self) -> float:
        """Half-open length ``n*dt`` covered when samples are read as bins."""
        return self.dt * self.n


# ---------------------------------------------------------------------------
# input signals
# ---------------------------------------------------------------------------


def _wrap_scalar(t, out):
    if np.ndim(t) == 0:
        return float(out)
    return out


class InputSignal:
    """Time-dependent, non-negative input rate.

    Subclasses implement ``_rate`` on float arrays; the public methods accept
    scalars or arrays and mirror the input shape.
    """

    def rate(self, t):
        """Input rate at time ``t`` (right-continuous at jumps)."""
        arr = np.asarray(t, dtype=float)
        return _wrap_scalar(t, self._rate(arr))

    def rate_left(self, t):
        """Left limit of the rate at ``t``; differs from ``rate`` only at jumps."""
        return self.rate(t)

    def rate_derivative(self, t):
        """Time derivative of the rate, taken piecewise at jumps."""
        arr = np.asarray(t, dtype=float)
        return _wrap_scalar(t, self._rate_derivative(arr))

    def cumulative_rate(self, t):
        """Antiderivative of the rate, fixed to vanish at time zero.

        Only differences of this function are meaningful.
        """
        arr = np.asarray(t, dtype=float)
        return _wrap_scalar(t, self._cumulative(arr))

    def max_rate(self, t0: float, t1: float) -> float:
        """Exact supremum of the rate over the closed interval [t0, t1]."""
        raise NotImplementedError

    # hooks -----------------------------------------------------------------
    def _rate(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _rate_derivative(self, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(t)

    def _cumulative(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(InputSignal):
    """Rate fixed at ``level`` for all times."""

    level: float

    def __post_init__(self):
        if not (self.level >= 0.0) or not math.isfinite(self.level):
            raise ValueError(f"rate must be finite and non-negative, got {self.level}")

    def _rate(self, t):
        return np.full_like(t, self.level)

    def _cumulative(self, t):
        return self.level * t

    def max_rate(self, t0, t1):
        return self.level


@dataclass(frozen=True)
class Step(InputSignal):
    """Rate jumping from ``before`` to ``after`` at ``t_switch``.

    The jump is right-continuous: ``rate(t_switch) == after``.
    """

    before: float
    after: float
    t_switch: float = 0.0

    def __post_init__(self):
        for name in ("before", "after"):
            v = getattr(self, name)
            if not (v >= 0.0) or not math.isfinite(v):
                raise ValueError(f"rate {name!r} must be finite and non-negative, got {v}")
        if not math.isfinite(self.t_switch):
            raise ValueError("switch time must be finite")

    def _rate(self, t):
        return np.where(t >= self.t_switch, self.after, self.before)

    def rate_left(self, t):
        arr = np.asarray(t, dtype=float)
        return _wrap_scalar(t, np.where(arr > self.t_switch, self.after, self.before))

    def _cumulative(self, t):
        def anti(u):
            return self.before * np.minimum(u, self.t_switch) + self.after * np.maximum(
                u - self.t_switch, 0.0
            )

        return anti(t) - anti(np.zeros_like(t))

    def max_rate(self, t0, t1):
        if t1 < self.t_switch:
            return self.before
        if t0 >= self.t_switch:
            return self.after
        return max(self.before, self.after)


@dataclass(frozen=True)
class Cosine(InputSignal):
    """Sinusoidally modulated rate ``base + amplitude*cos(2*pi*frequency*t)``.

    Requires ``base >= amplitude >= 0`` so the rate never turns negative.
    """

    base: float
    amplitude: float
    frequency: float

    def __post_init__(self):
        if not (self.amplitude >= 0.0):
            raise ValueError("modulation amplitude must be non-negative")
        if not (self.base >= self.amplitude):
            raise ValueError(
                f"base rate {self.base} must dominate the modulation amplitude {self.amplitude}"
            )
        if not (self.frequency > 0.0):
            raise ValueError("modulation frequency must be positive")

    @property
    def omega(self) -> float:
        return angular_frequency(self.frequency)

    def _rate(self, t):
        return self.base + self.amplitude * np.cos(self.omega * t)

    def _rate_derivative(self, t):
        return -self.amplitude * self.omega * np.sin(self.omega * t)

    def _cumulative(self, t):
        return self.base * t + self.amplitude * np.sin(self.omega * t) / self.omega

    def max_rate(self, t0, t1):
        # a crest lies inside [t0, t1] iff some integer multiple of the period does
        if math.floor(t1 * self.frequency) >= math.ceil(t0 * self.frequency):
            return self.base + self.amplitude
        return float(max(self.rate(t0), self.rate(t1)))


@dataclass(frozen=True, eq=False)
class Sampled(InputSignal):
    """Rate linearly interpolated between samples on a uniform grid.

    Evaluation outside the sampled window raises ``ValueError``.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} samples to match the grid, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("sampled rates must be finite and non-negative")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _check_domain(self, t):
        slack = 1e-9 * max(self.grid.dt, 1.0)
        if np.any(t < self.grid.t0 - slack) or np.any(t > self.grid.t_end + slack):
            raise ValueError(
                f"time outside the sampled window [{self.grid.t0}, {self.grid.t_end}]"
            )

    def _rate(self, t):
        self._check_domain(t)
        return np.interp(t, self.grid.times(), self.values)

    def _segment(self, t):
        idx = np.floor((t - self.grid.t0) / self.grid.dt).astype(int)
        return np.clip(idx, 0, self.grid.n - 2)

    def _rate_derivative(self, t):
        self._check_domain(t)
        if self.grid.n < 2:
            return np.zeros_like(t)
        slopes = np.diff(self.values) / self.grid.dt
        return slopes[self._segment(t)]

    def _cumulative(self, t):
        # exact integral of the piecewise-linear interpolant, anchored at the
        # first sample
        self._check_domain(t)
        if self.grid.n < 2:
            return self.values[0] * (t - self.grid.t0)
        cell = 0.5 * (self.values[:-1] + self.values[1:]) * self.grid.dt
        prefix = np.concatenate(([0.0], np.cumsum(cell)))
        idx = self._segment(t)
        local = t - (self.grid.t0 + idx * self.grid.dt)
        slopes = np.diff(self.values) / self.grid.dt
        return prefix[idx] + self.values[idx] * local + 0.5 * slopes[idx] * local**2

    def max_rate(self, t0, t1):
        self._check_domain(np.asarray([t0, t1]))
        times = self.grid.times()
        inside = (times >= t0) & (times <= t1)
        cand = [self.rate(t0), self.rate(t1)]
        if np.any(inside):
            cand.append(float(np.max(self.values[inside])))
        return float(max(cand))


# ---------------------------------------------------------------------------
# dead-time laws
# ---------------------------------------------------------------------------


class DeadTimeLaw:
    """Distribution of the refractory duration that follows each event.

    A law may carry an atom at zero (``atom0``); the remainder is absolutely
    continuous.  ``survivor(x)`` is the probability that the dead time
    exceeds ``x``, so ``survivor(0) == 1 - atom0``.
    """

    @property
    def atom0(self) -> float:
        return 0.0

    def mean(self) -> float:
        raise NotImplementedError

    def survivor(self, x):
        raise NotImplementedError

    def density(self, x):
        """Density of the absolutely continuous part (zero for a point mass)."""
        raise NotImplementedError

    def density_derivative(self, x):
        raise NotImplementedError

    def quantile(self, q: float) -> float:
        """Smallest ``x`` whose cumulative probability reaches ``q``."""
        raise NotImplementedError

    def support_window(self, tail: float = KERNEL_TAIL) -> float:
        """Length of the window holding all probability mass except ``tail``."""
        return self.quantile(1.0 - tail)


def _check_nonnegative_x(x):
    if np.any(np.asarray(x) < 0.0):
        raise ValueError("dead-time abscissa must be non-negative")


@dataclass(frozen=True)
class FixedDeadTime(DeadTimeLaw):
    """Deterministic dead time: a unit point mass at ``duration``."""

    duration: float

    def __post_init__(self):
        if not (self.duration >= 0.0) or not math.isfinite(self.duration):
            raise ValueError(f"dead time must be finite and non-negative, got {self.duration}")

    @property
    def atom0(self):
        # a zero-length dead time is all point mass at the origin
        return 1.0 if self.duration == 0.0 else 0.0

    def mean(self):
        return self.duration

    def survivor(self, x):
        _check_nonnegative_x(x)
        arr = np.asarray(x, dtype=float)
        return _wrap_scalar(x, np.where(arr < self.duration, 1.0, 0.0))

    def density(self, x):
        _check_nonnegative_x(x)
        return _wrap_scalar(x, np.zeros_like(np.asarray(x, dtype=float)))

    def density_derivative(self, x):
        return self.density(x)

    def quantile(self, q):
        if not (0.0 <= q <= 1.0):
            raise ValueError("quantile level must lie in [0, 1]")
        return self.duration


def _gamma_log_density(order: int, rate: float, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logx = np.where(x > 0.0, np.log(np.where(x > 0.0, x, 1.0)), -np.inf)
    out = (order + 1) * math.log(rate) - rate * x - special.gammaln(order + 1)
    if order > 0:
        out = out + order * logx
    return out


@dataclass(frozen=True)
class GammaDeadTime(DeadTimeLaw):
    """Gamma-distributed dead time with integer kernel order.

    The density is proportional to ``x**order * exp(-rate*x)``; the mean is
    ``(order + 1)/rate``.  ``order == 0`` is the exponential special case.
    """

    order: int
    rate: float

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or self.order < 0:
            raise ValueError(f"kernel order must be a non-negative integer, got {self.order}")
        if not (self.rate > 0.0) or not math.isfinite(self.rate):
            raise ValueError(f"gamma rate must be positive and finite, got {self.rate}")

    def mean(self):
        return (self.order + 1) / self.rate

    def survivor(self, x):
        _check_nonnegative_x(x)
        arr = np.asarray(x, dtype=float)
        return _wrap_scalar(x, special.gammaincc(self.order + 1, self.rate * arr))

    def density(self, x):
        _check_nonnegative_x(x)
        arr = np.asarray(x, dtype=float)
        if self.order == 0:
            return _wrap_scalar(x, self.rate * np.exp(-self.rate * arr))
        out = np.exp(_gamma_log_density(self.order, self.rate, arr))
        return _wrap_scalar(x, out)

    def density_derivative(self, x):
        _check_nonnegative_x(x)
        arr = np.asarray(x, dtype=float)
        if self.order == 0:
            return _wrap_scalar(x, -self.rate**2 * np.exp(-self.rate * arr))
        lower = np.exp(_gamma_log_density(self.order - 1, self.rate, arr))
        here = np.exp(_gamma_log_density(self.order, self.rate, arr))
        return _wrap_scalar(x, self.rate * (lower - here))

    def quantile(self, q):
        if not (0.0 <= q < 1.0):
            raise ValueError("quantile level must lie in [0, 1)")
        return float(special.gammainccinv(self.order + 1, 1.0 - q) / self.rate)


@dataclass(frozen=True, eq=False)
class TabulatedDeadTime(DeadTimeLaw):
    """Dead-time law given by density samples plus an optional atom at zero.

    Parameters
    ----------
    x : ndarray
        Strictly increasing abscissae, ``x[0] >= 0``.  Grids may be
        non-uniform (log-spaced grids are common for heavy-tailed laws).
    pdf : ndarray
        Density samples, non-negative up to a ``-1e-12`` numerical slack.
    atom_at_zero : float
        Probability mass sitting exactly at zero dead time.

    The total mass ``atom_at_zero + trapezoid(pdf)`` must equal one within
    ``1e-9``.
    """

    x: np.ndarray
    pdf: np.ndarray
    atom_at_zero: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        pdf = np.asarray(self.pdf, dtype=float)
        if x.ndim != 1 or x.size < 2 or pdf.shape != x.shape:
            raise ValueError("need matching 1-d arrays with at least two nodes")
        if x[0] < 0.0 or np.any(np.diff(x) <= 0.0):
            raise ValueError("abscissae must be non-negative and strictly increasing")
        if np.any(pdf < -1e-12) or not np.all(np.isfinite(pdf)):
            raise ValueError("density samples must be non-negative")
        pdf = np.clip(pdf, 0.0, None)
        if not (0.0 <= self.atom_at_zero <= 1.0):
            raise ValueError("atom mass must lie in [0, 1]")
        mass = self.atom_at_zero + np.trapezoid(pdf, x)
        if abs(mass - 1.0) > 1e-9:
            raise ValueError(f"law mass {mass!r} deviates from one by more than 1e-9")
        cdf = self.atom_at_zero + np.concatenate(
            ([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x)))
        )
        cdf = np.minimum(cdf, 1.0)
        for name, arr in (("x", x), ("pdf", pdf), ("_cdf", cdf)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def atom0(self):
        return self.atom_at_zero

    def mean(self):
        return float(np.trapezoid(self.x * self.pdf, self.x))

    def survivor(self, x):
        _check_nonnegative_x(x)
        arr = np.asarray(x, dtype=float)
        cdf = np.interp(arr, self.x, self._cdf, left=self.atom_at_zero, right=1.0)
        # below the first node the density has not started accruing
        out = 1.0 - np.where(arr < self.x[0], self.atom_at_zero, cdf)
        return _wrap_scalar(x, out)

    def density(self, x):
        _check_nonnegative_x(x)
        arr = np.asarray(x, dtype=float)
        return _wrap_scalar(x, np.interp(arr, self.x, self.pdf, left=0.0, right=0.0))

    def density_derivative(self, x):
        _check_nonnegative_x(x)
        arr = np.asarray(x, dtype=float)
        slopes = np.gradient(self.pdf, self.x)
        return _wrap_scalar(x, np.interp(arr, self.x, slopes, left=0.0, right=0.0))

    def quantile(self, q):
        if not (0.0 <= q <= 1.0):
            raise ValueError("quantile level must lie in [0, 1]")
        if q <= self.atom_at_zero:
            return 0.0
        return float(np.interp(q, self._cdf, self.x))


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


class Spectrum:
    """Finite Fourier series ``sum_k c_k exp(i k omega t)`` with real signal.

    Coefficients are stored for ``k = -K..K`` and must satisfy the reality
    condition ``c_{-k} == conj(c_k)`` within ``tol`` (relative to the largest
    coefficient).

    Parameters
    ----------
    omega : float
        Base angular frequency, strictly positive.
    coeffs : array_like of complex
        Odd-length coefficient vector ordered from ``-K`` to ``K``.
    """

    __slots__ = ("omega", "coeffs")

    def __init__(self, omega: float, coeffs, tol: float = 1e-9):
        if not (omega > 0.0) or not math.isfinite(omega):
            raise ValueError(f"angular frequency must be positive and finite, got {omega}")
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient vector must be 1-d with odd length")
        scale = max(float(np.max(np.abs(c))), 1.0)
        asym = float(np.max(np.abs(c[::-1].conj() - c)))
        if asym > tol * scale:
            raise ValueError(
                f"coefficients violate the reality condition by {asym:.3e} (tol {tol:.1e})"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "omega", float(omega))
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):  # immutable
        raise AttributeError("Spectrum is immutable")

    @property
    def order(self) -> int:
        return (self.coeffs.size - 1) // 2

    def coefficient(self, k: int) -> complex:
        """Coefficient ``c_k``; indices beyond the stored order read as zero."""
        if abs(k) > self.order:
            return 0.0 + 0.0j
        return complex(self.coeffs[k + self.order])

    def evaluate(self, t, max_imag: float = 1e-8):
        """Real signal value at ``t``.

        The tiny imaginary residue of the complex sum is checked against
        ``max_imag`` (relative to the signal scale) and discarded.
        """
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.arange(-self.order, self.order + 1)
        phases = np.exp(1j * self.omega * np.outer(arr, k))
        values = phases @ self.coeffs
        scale = max(float(np.max(np.abs(values))), 1.0)
        resid = float(np.max(np.abs(values.imag))) / scale
        if resid > max_imag:
            raise NumericalError(
                f"imaginary residue {resid:.3e} exceeds {max_imag:.1e}; "
                "spectrum is not consistent with a real signal"
            )
        return _wrap_scalar(t, values.real.reshape(np.shape(t)))

    def to_csv(self, path):
        """Write headerless rows ``k, re, im`` from ``-K`` to ``K``."""
        lines = [
            f"{k - self.order},{_fmt(c.real)},{_fmt(c.imag)}"
            for k, c in enumerate(self.coeffs)
        ]
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path, omega: float, tol: float = 1e-9) -> "Spectrum":
        rows = []
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                k_str, re_str, im_str = line.split(",")
                rows.append((int(k_str), float(re_str), float(im_str)))
        rows.sort()
        ks = [r[0] for r in rows]
        order = max(-ks[0], ks[-1])
        coeffs = np.zeros(2 * order + 1, dtype=complex)
        for k, re, im in rows:
            coeffs[k + order] = re + 1j * im
        return cls(omega, coeffs, tol=tol)


def signal_spectrum(sig: InputSignal, omega: float, order: int) -> Spectrum:
    """Fourier coefficients of a periodic input at base angular frequency ``omega``.

    Constant inputs are flat spectra; cosine inputs must match the requested
    frequency and produce coefficients ``base`` at zero and half the
    amplitude at ``k = +-1``.  Sampled inputs covering exactly one period are
    transformed discretely.  Aperiodic inputs (steps) are rejected.
    """
    if not (omega > 0.0):
        raise ValueError("angular frequency must be positive")
    if order < 0:
        raise ValueError("spectral order must be non-negative")
    if isinstance(sig, Constant):
        coeffs = np.zeros(2 * order + 1, dtype=complex)
        coeffs[order] = sig.level
        return Spectrum(omega, coeffs)
    if isinstance(sig, Cosine):
        if abs(sig.omega - omega) > 1e-9 * omega:
            raise ValueError(
                f"cosine frequency {sig.frequency} does not match the requested base "
                f"frequency {omega / TWO_PI}"
            )
        if order < 1 and sig.amplitude > 0.0:
            raise ValueError("order 0 cannot hold a modulated input")
        coeffs = np.zeros(2 * order + 1, dtype=complex)
        coeffs[order] = sig.base
        if order >= 1:
            coeffs[order - 1] = coeffs[order + 1] = 0.5 * sig.amplitude
        return Spectrum(omega, coeffs)
    if isinstance(sig, Sampled):
        period = TWO_PI / omega
        if abs(sig.grid.span - period) > 1e-9 * period:
            raise ValueError(
                f"sampled window {sig.grid.span} does not cover one period {period}"
            )
        n = sig.grid.n
        if order > n // 2 - 1:
            raise ValueError(f"order {order} unresolvable with {n} samples per period")
        t = sig.grid.times()
        coeffs = np.zeros(2 * order + 1, dtype=complex)
        for k in range(order + 1):
            ck = np.mean(sig.values * np.exp(-1j * k * omega * t))
            coeffs[order + k] = ck
            coeffs[order - k] = np.conj(ck)
        return Spectrum(omega, coeffs)
    raise ValueError(f"input {type(sig).__name__} is not periodic")


# ---------------------------------------------------------------------------
# traces and histories
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trace:
    """Active fraction and ensemble rate sampled on a time grid."""

    grid: TimeGrid
    active: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        active = np.asarray(self.active, dtype=float)
        rate = np.asarray(self.rate, dtype=float)
        if active.shape != (self.grid.n,) or rate.shape != (self.grid.n,):
            raise ValueError("trace arrays must match the grid length")
        if not (np.all(np.isfinite(active)) and np.all(np.isfinite(rate))):
            raise ValueError("trace values must be finite")
        if np.any(active < -1e-6) or np.any(active > 1.0 + 1e-6):
            raise ValueError("active fraction leaves [0, 1]")
        if np.any(rate < -1e-6):
            raise ValueError("ensemble rate turned negative")
        for name, arr in (("active", active), ("rate", rate)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_csv(self, path):
        """Write rows ``t, A, nu`` under a one-line header."""
        t = self.grid.times()
        lines = ["t,A,nu"]
        lines += [
            f"{_fmt(ti)},{_fmt(a)},{_fmt(r)}"
            for ti, a, r in zip(t, self.active, self.rate)
        ]
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trace":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip()
            if header != "t,A,nu":
                raise ValueError(f"unexpected trace header {header!r}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        t = data[:, 0]
        if t.size < 2:
            grid = TimeGrid(float(t[0]), 1.0, 1)
        else:
            dt = float(t[1] - t[0])
            if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(dt, 1.0):
                raise ValueError("trace times are not uniformly spaced")
            grid = TimeGrid(float(t[0]), dt, t.size)
        return cls(grid, data[:, 1], data[:, 2])


@dataclass(frozen=True)
class History:
    """Ensemble trajectory on the look-back window before integration starts.

    ``active(t)`` and ``rate(t)`` must be defined for all ``t`` up to and
    including the integration start; at the start itself they carry the left
    limits.
    """

    active: Callable[[float], float]
    rate: Callable[[float], float]


def equilibrium_history(input_rate: float, mean_dead_time: float) -> History:
    """Constant-history equilibrium for a given input rate and mean dead time.

    The stationary active fraction is ``1/(1 + rate*mean)`` and the event
    rate is the input rate times that fraction; the pair satisfies the
    occupation balance exactly.
    """
    if not (input_rate >= 0.0) or not (mean_dead_time >= 0.0):
        raise ValueError("rate and mean dead time must be non-negative")
    a = 1.0 / (1.0 + input_rate * mean_dead_time)
    nu = input_rate * a

    def _const(c):
        def f(t):
            return c + 0.0 * np.asarray(t, dtype=float)

        return f

    return History(active=_const(a), rate=_const(nu))


# ---------------------------------------------------------------------------
# density CSV (tabulated dead-time laws)
# ---------------------------------------------------------------------------


def write_law_csv(law: DeadTimeLaw, path, n_nodes: int = 2048):
    """Serialize a law as ``x, rho`` rows under a header carrying the atom mass.

    Tabulated laws are written on their own grid; analytic laws are sampled
    on a uniform grid covering their support window.
    """
    if isinstance(law, TabulatedDeadTime):
        x, pdf, atom = law.x, law.pdf, law.atom0
    elif isinstance(law, FixedDeadTime):
        raise ValueError("a deterministic dead time has no density table")
    else:
        x = np.linspace(0.0, law.support_window(), n_nodes)
        pdf, atom = law.density(x), law.atom0
    lines = [f"x,rho,atom0={_fmt(atom)}"]
    lines += [f"{_fmt(xi)},{_fmt(pi)}" for xi, pi in zip(x, pdf)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_law_csv(path) -> TabulatedDeadTime:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        parts = header.split(",")
        if len(parts) != 3 or parts[0] != "x" or parts[1] != "rho" \
                or not parts[2].startswith("atom0="):
            raise ValueError(f"unexpected density header {header!r}")
        atom = float(parts[2].split("=", 1)[1])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return TabulatedDeadTime(data[:, 0], data[:, 1], atom)
