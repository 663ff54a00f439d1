"""Best response in finite-action games as the attractor of opinion dynamics on a ring."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .spectral import (  # noqa: F401
    ActionRing,
    CirculantOperator,
    CouplingKernel,
    build_circulant,
    dominant_mode,
    mexican_hat_kernel,
    mode_coefficients,
    project_evidence,
)
from .dynamics import NodParams, Sigmoid, DecisionState, integrate, nod_rhs, phase_readout  # noqa: F401
from .reduction import ReducedModel, evidence_threshold, reduced_coefficients, subcritical_branches  # noqa: F401
from .game import GameParams, best_response, is_projected_nash, potential, utility_kernel  # noqa: F401
