"""Quantum Fisher information from truncated-Wigner trajectories.

The estimator samples a Gaussian initial Wigner function, runs each sample
through a preparation and a parameter encoding, rewinds it to ``t=0`` and
weights the squared overlap of the rewound parametric derivative with the
initial-state gradient.  See :func:`estimate_qfi`.
"""
__version__ = "0.1.0"

from .dynamics import IntegrationError, Protocol, Stage, evolve, rewind_protocol, run_protocol
from .estimator import EstimationError, QfiEstimate, estimate_qfi, fd_convergence_scan
from .models import (DepletionModel, DisplacementEncoding, FreeEvolution, KerrModel, OpoModel,
                     PhaseEncoding, opo_qfi_analytic)
from .observables import ensemble_moments, number_moments, quadrature_moments
from .phase_space import (GaussianWignerSpec, ImpureStateError, LayoutError, ModeLayout,
                          SeededStream, SpecError, density, gradient, sample_initial,
                          to_amplitudes, to_quadratures)

__all__ = [
    "DepletionModel", "DisplacementEncoding", "EstimationError", "FreeEvolution",
    "GaussianWignerSpec", "ImpureStateError", "IntegrationError", "KerrModel", "LayoutError",
    "ModeLayout", "OpoModel", "PhaseEncoding", "Protocol", "QfiEstimate", "SeededStream",
    "SpecError", "Stage", "density", "ensemble_moments", "estimate_qfi", "evolve",
    "fd_convergence_scan", "gradient", "number_moments", "opo_qfi_analytic",
    "quadrature_moments", "rewind_protocol", "run_protocol", "sample_initial",
    "to_amplitudes", "to_quadratures",
]
