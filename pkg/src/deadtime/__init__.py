"""Ensembles of Poisson processes with refractoriness.

Public API re-exported from the submodules:

- input signals and dead-time laws (:mod:`deadtime.core`)
- closed-form constant-input results (:mod:`deadtime.analytic_ppd`)
- state-space model for gamma dead times (:mod:`deadtime.gamma_chain`)
- periodic steady states and harmonic transfer (:mod:`deadtime.spectral`)
- delay-equation integrators (:mod:`deadtime.dde`)
- seeded Monte Carlo (:mod:`deadtime.mc_sim`)
- renewal-process representability (:mod:`deadtime.renewal_map`)
"""

from .core import (
    Constant,
    Cosine,
    DeadTimeLaw,
    FixedDeadTime,
    GammaDeadTime,
    History,
    InputSignal,
    NotRepresentableError,
    NumericalError,
    Sampled,
    Spectrum,
    Step,
    TabulatedDeadTime,
    TimeGrid,
    Trace,
    angular_frequency,
    equilibrium_history,
    signal_spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "Constant",
    "Cosine",
    "DeadTimeLaw",
    "FixedDeadTime",
    "GammaDeadTime",
    "History",
    "InputSignal",
    "NotRepresentableError",
    "NumericalError",
    "Sampled",
    "Spectrum",
    "Step",
    "TabulatedDeadTime",
    "TimeGrid",
    "Trace",
    "angular_frequency",
    "equilibrium_history",
    "signal_spectrum",
    "__version__",
]
