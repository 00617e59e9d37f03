"""Periodic steady states of the refractory ensemble in the Fourier domain.

For a periodic input rate with spectrum ``Lambda`` the stationary active
fraction and output rate are Fourier series.  The refractory window enters
only through coupling coefficients ``q_k`` (the Fourier footprint of the
dead-time survivor function): the active-fraction coefficients ``alpha``
solve

    alpha_k + q_k * sum_l Lambda_l alpha_{k-l} = delta_{k,0}

and the output coefficients follow either as the convolution
``beta = Lambda * alpha`` or as ``beta_k = (delta_{k,0} - alpha_k)/q_k``
where ``q_k`` is nonzero.

Two independent solvers ship on purpose.  The truncated dense solve works
for any band-limited input and is the reference; the continued-fraction
recursion is the fast path for pure cosine drive.  Each is used to test the
other.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import (
    TWO_PI,
    DeadTimeLaw,
    FixedDeadTime,
    GammaDeadTime,
    NumericalError,
    Spectrum,
    TabulatedDeadTime,
    TimeGrid,
    Trace,
)

__all__ = [
    "HarmonicSystem",
    "qk_fixed",
    "qk_law",
    "qk_array",
    "solve_active_spectrum",
    "output_spectrum",
    "infer_input_spectrum",
    "cosine_continued_fraction",
    "periodic_rate",
]

#: Coupling coefficients smaller than this are treated as exact zeros
#: (resonant harmonics where the refractory window spans whole drive
#: periods).
Q_ZERO = 1e-12


def qk_fixed(d: float, omega: float, k: int) -> complex:
    """Coupling coefficient of a fixed dead time ``d`` at harmonic ``k``."""
    if d < 0.0:
        raise ValueError("dead time must be non-negative")
    if not (omega > 0.0):
        raise ValueError("angular frequency must be positive")
    if k == 0:
        return complex(d)
    s = 1j * k * omega
    return (1.0 - cmath.exp(-s * d)) / s


def qk_law(law: DeadTimeLaw, omega: float, k: int) -> complex:
    """Coupling coefficient of an arbitrary dead-time law at harmonic ``k``.

    This is the Fourier-Laplace transform of the survivor function at
    ``i*k*omega``; at ``k = 0`` it reduces to the mean dead time.  Gamma laws
    use their closed form, tabulated laws integrate their survivor
    numerically.
    """
    if not (omega > 0.0):
        raise ValueError("angular frequency must be positive")
    if isinstance(law, FixedDeadTime):
        return qk_fixed(law.duration, omega, k)
    if isinstance(law, GammaDeadTime):
        if k == 0:
            return complex(law.mean())
        s = 1j * k * omega
        return (1.0 - (law.rate / (law.rate + s)) ** (law.order + 1)) / s
    if isinstance(law, TabulatedDeadTime):
        return _qk_tabulated(law, omega, k)
    raise TypeError(f"unsupported dead-time law {type(law).__name__}")


def _qk_tabulated(law: TabulatedDeadTime, omega: float, k: int) -> complex:
    upper = float(law.x[-1])
    if upper <= 0.0:
        return 0.0 + 0.0j
    # resolve both the survivor's tabulation and the oscillation
    cycles = abs(k) * omega * upper / TWO_PI
    n = max(8192, 4 * law.x.size, int(64 * cycles))
    n += n % 2  # Simpson wants an even interval count
    y = np.linspace(0.0, upper, n + 1)
    surv = law.survivor(y)
    if k == 0:
        return complex(integrate.simpson(surv, x=y))
    phase = np.exp(-1j * k * omega * y)
    return complex(integrate.simpson(surv * phase, x=y))


def qk_array(law: DeadTimeLaw, omega: float, kmax: int) -> np.ndarray:
    """Coefficients ``q_k`` for ``k = -kmax .. kmax`` (Hermitian by symmetry)."""
    if kmax < 0:
        raise ValueError("kmax must be non-negative")
    q = np.zeros(2 * kmax + 1, dtype=complex)
    q[kmax] = qk_law(law, omega, 0)
    for k in range(1, kmax + 1):
        val = qk_law(law, omega, k)
        q[kmax + k] = val
        q[kmax - k] = np.conj(val)
    return q


@dataclass(frozen=True, eq=False)
class HarmonicSystem:
    """Truncated harmonic coupling problem for one periodic scenario.

    Holds the base angular frequency, the truncation order ``K``, the
    dead-time law, the input spectrum, and the coupling coefficients
    ``q_k`` for ``|k| <= 2K`` (enough for the output convolution and the
    inverse map).
    """

    omega: float
    K: int
    law: DeadTimeLaw
    input_spectrum: Spectrum
    q: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (self.omega > 0.0):
            raise ValueError("angular frequency must be positive")
        if not isinstance(self.K, (int, np.integer)) or self.K < 1:
            raise ValueError("truncation order must be a positive integer")
        if abs(self.input_spectrum.omega - self.omega) > 1e-9 * self.omega:
            raise ValueError("input spectrum frequency does not match the system")
        q = qk_array(self.law, self.omega, 2 * self.K)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def q_at(self, k: int) -> complex:
        if abs(k) > 2 * self.K:
            raise IndexError(f"harmonic {k} beyond the stored range {2 * self.K}")
        return complex(self.q[k + 2 * self.K])

    def with_truncation(self, K: int) -> "HarmonicSystem":
        return HarmonicSystem(self.omega, K, self.law, self.input_spectrum)


def _input_band(spectrum: Spectrum) -> int:
    mags = np.abs(spectrum.coeffs)
    nonzero = np.nonzero(mags > 0.0)[0]
    if nonzero.size == 0:
        return 0
    order = spectrum.order
    return int(max(abs(int(i) - order) for i in nonzero))


def _padded_coefficients(spectrum: Spectrum, halfwidth: int) -> np.ndarray:
    """Coefficient lookup table over ``-halfwidth .. halfwidth``, zero outside."""
    out = np.zeros(2 * halfwidth + 1, dtype=complex)
    o = spectrum.order
    lo = max(-halfwidth, -o)
    hi = min(halfwidth, o)
    out[lo + halfwidth : hi + halfwidth + 1] = spectrum.coeffs[lo + o : hi + o + 1]
    return out


def _solve_truncated(sys: HarmonicSystem) -> np.ndarray:
    k_range = np.arange(-sys.K, sys.K + 1)
    size = k_range.size
    lam_pad = _padded_coefficients(sys.input_spectrum, 2 * sys.K)
    diff = k_range[:, None] - k_range[None, :]
    q_rows = sys.q[k_range + 2 * sys.K].copy()
    q_rows[np.abs(q_rows) <= Q_ZERO] = 0.0
    mat = np.eye(size, dtype=complex) + q_rows[:, None] * lam_pad[diff + 2 * sys.K]
    rhs = np.zeros(size, dtype=complex)
    rhs[sys.K] = 1.0
    try:
        cond = float(abs(np.linalg.cond(mat, 1)))
    except np.linalg.LinAlgError:
        cond = math.inf
    if not math.isfinite(cond) or cond > 1e14:
        raise NumericalError(
            f"truncated harmonic system is numerically singular (cond {cond:.3e})",
            condition=cond,
        )
    return np.linalg.solve(mat, rhs)


def solve_active_spectrum(sys: HarmonicSystem) -> Spectrum:
    """Spectrum of the active fraction by truncated dense solve.

    The truncation is doubled until all coefficients in the outer half of
    the band are below 1e-12, so the returned spectrum is insensitive to the
    starting ``K``.
    """
    band = _input_band(sys.input_spectrum)
    if band > 0 and sys.K < 4 * band:
        raise ValueError(
            f"truncation {sys.K} too small for input band {band}; need at least {4 * band}"
        )
    current = sys
    while True:
        alpha = _solve_truncated(current)
        tail = np.abs(alpha[np.abs(np.arange(-current.K, current.K + 1)) > current.K // 2])
        if tail.size == 0 or float(np.max(tail)) < 1e-12:
            return Spectrum(sys.omega, alpha, tol=1e-8)
        if current.K >= 4096:
            raise NumericalError(
                "active-fraction spectrum did not decay within truncation 4096"
            )
        current = current.with_truncation(2 * current.K)


def output_spectrum(sys: HarmonicSystem, alpha: Spectrum) -> Spectrum:
    """Output-rate spectrum ``beta`` from the active-fraction spectrum.

    Computed as the convolution of the input spectrum with ``alpha``; where
    the coupling coefficient is nonzero the alternative closed form
    ``(delta - alpha_k)/q_k`` must agree, and a disagreement flags an
    assembly bug rather than a user error.
    """
    lam = sys.input_spectrum
    ka, kl = alpha.order, lam.order
    out_order = ka + kl
    beta = np.convolve(lam.coeffs, alpha.coeffs)
    assert beta.size == 2 * out_order + 1
    # cross-check against the direct form inside the solved band
    for k in range(-min(ka, 2 * sys.K), min(ka, 2 * sys.K) + 1):
        qk = sys.q_at(k)
        if abs(qk) <= Q_ZERO:
            continue
        direct = ((1.0 if k == 0 else 0.0) - alpha.coefficient(k)) / qk
        got = beta[k + out_order]
        if abs(direct - got) > 1e-10 * max(1.0, abs(got)):
            raise NumericalError(
                f"output harmonic {k} disagrees between convolution and "
                f"coupling forms by {abs(direct - got):.3e}"
            )
    return Spectrum(sys.omega, beta, tol=1e-8)


def infer_input_spectrum(
    beta: Spectrum, law: DeadTimeLaw, cond_limit: float = 1e12
) -> tuple[Spectrum, float]:
    """Invert the transmission: input spectrum from the output spectrum.

    Solves ``beta_k = sum_m Lambda_m (delta_{k,m} - q_{k-m} beta_{k-m})``
    for ``Lambda`` on the band of ``beta``.  Returns the spectrum together
    with the condition number of the (Toeplitz) system so callers can judge
    noise amplification; no regularization is applied.
    """
    b = beta.order
    q = qk_array(law, beta.omega, 2 * b)
    beta_pad = _padded_coefficients(beta, 2 * b)
    k_range = np.arange(-b, b + 1)
    diff = k_range[:, None] - k_range[None, :]
    mat = np.eye(2 * b + 1, dtype=complex) - (q * beta_pad)[diff + 2 * b]
    rhs = beta.coeffs.copy()
    try:
        cond = float(abs(np.linalg.cond(mat, 1)))
    except np.linalg.LinAlgError:
        cond = math.inf
    if not math.isfinite(cond) or cond > cond_limit:
        raise NumericalError(
            f"input inference is ill-conditioned (cond {cond:.3e})", condition=cond
        )
    lam = np.linalg.solve(mat, rhs)
    return Spectrum(beta.omega, lam, tol=1e-7), cond


def cosine_continued_fraction(
    lam0: float,
    eps: float,
    law,
    omega: float,
    tol: float = 1e-13,
    max_order: int = 512,
) -> Spectrum:
    """Active-fraction spectrum for pure cosine drive, without a linear solve.

    For input rate ``lam0 + eps*cos(omega t)`` the harmonic system becomes a
    three-term recurrence whose decaying solution is found by a backward
    continued fraction: ratios ``r_{k-1} = -1/(x_k + r_k)`` started from
    zero far out, with ``x_k = (1/q_k + lam0) * 2/eps``.  The backward start
    is pushed out geometrically until the bottom ratio stabilizes to
    ``tol``; resonant harmonics with vanishing ``q_k`` terminate the chain
    exactly.

    ``law`` may be a :class:`DeadTimeLaw` or a plain number, read as a fixed
    dead time.
    """
    if isinstance(law, (int, float)):
        law = FixedDeadTime(float(law))
    if eps < 0.0:
        raise ValueError("modulation amplitude must be non-negative")
    if lam0 < eps:
        raise ValueError("modulation must not push the rate negative")
    q0 = qk_law(law, omega, 0).real
    if eps == 0.0:
        coeffs = np.zeros(2 * 1 + 1, dtype=complex)
        coeffs[1] = 1.0 / (1.0 + lam0 * q0)
        return Spectrum(omega, coeffs)

    q_cache: dict[int, complex] = {}

    def x_at(k: int) -> complex:
        qk = q_cache.get(k)
        if qk is None:
            qk = qk_law(law, omega, k)
            q_cache[k] = qk
        if abs(qk) <= Q_ZERO:
            return complex(math.inf)
        return (1.0 / qk + lam0) * (2.0 / eps)

    def backward_r0(start: int) -> complex:
        r = 0.0 + 0.0j
        for k in range(start, 0, -1):
            x = x_at(k)
            if x == complex(math.inf):
                r = 0.0 + 0.0j
                continue
            denom = x + r
            if denom == 0.0:
                raise NumericalError("continued fraction hit a zero denominator")
            r = -1.0 / denom
        return r

    n = 32
    r0 = backward_r0(n)
    while True:
        n *= 2
        if n > 2**20:
            raise NumericalError("continued fraction did not converge by depth 2^20")
        r0_new = backward_r0(n)
        scale = max(abs(r0_new), abs(r0))
        if scale == 0.0 or abs(r0_new - r0) <= tol * scale:
            r0 = r0_new
            break
        r0 = r0_new

    alpha0 = 1.0 / (1.0 + q0 * (lam0 + eps * r0.real))
    # assemble ratios downward from the converged depth
    depth = min(n, max_order)
    ratios = np.empty(depth, dtype=complex)  # ratios[k-1] = alpha_k / alpha_{k-1}
    r = 0.0 + 0.0j
    for k in range(n, 0, -1):
        x = x_at(k)
        r = 0.0 + 0.0j if x == complex(math.inf) else -1.0 / (x + r)
        if k <= depth:
            ratios[k - 1] = r

    coeffs_pos = [complex(alpha0)]
    for k in range(depth):
        nxt = coeffs_pos[-1] * ratios[k]
        if abs(nxt) < 1e-18 * abs(alpha0):
            break
        coeffs_pos.append(nxt)
    order = len(coeffs_pos) - 1
    coeffs = np.zeros(2 * order + 1, dtype=complex)
    for k, c in enumerate(coeffs_pos):
        coeffs[order + k] = c
        coeffs[order - k] = np.conj(c)
    return Spectrum(omega, coeffs)


def periodic_rate(sys: HarmonicSystem, beta: Spectrum, grid: TimeGrid) -> Trace:
    """Sample the periodic steady state on a time grid.

    The active fraction is reconstructed from the output spectrum through
    ``alpha_k = delta_{k,0} - q_k beta_k``, which stays valid at resonant
    harmonics where ``q_k`` vanishes.
    """
    b = beta.order
    q = qk_array(sys.law, sys.omega, b)
    alpha = np.empty(2 * b + 1, dtype=complex)
    for k in range(-b, b + 1):
        alpha[k + b] = (1.0 if k == 0 else 0.0) - q[k + b] * beta.coefficient(k)
    active = Spectrum(sys.omega, alpha, tol=1e-8).evaluate(grid.times(), max_imag=1e-8)
    rate = beta.evaluate(grid.times(), max_imag=1e-8)
    return Trace(grid, np.clip(active, 0.0, 1.0), np.clip(rate, 0.0, None))
