"""Numerical toolkit for the disordered 0-pi superconducting qubit.

Energies are E/h in GHz throughout; rates are in 1/s and angular
frequencies in rad/s.
"""

from .decoherence import (
    NoiseSpectrum,
    RateBreakdown,
    ThermalEnv,
    coherence_budget,
    composite_depolarization,
    golden_rule_rate,
    purcell_exact,
    purcell_perturbative,
    shot_noise_rate,
    thermal_occupation,
    tphi_1f,
)
from .dispersive import DispersiveReport, coupling_matrix, stark_lamb
from .eigen import EigenSolution, dense_oracle, lowest_eigenpairs
from .errors import (
    ConvergenceError,
    DomainError,
    LabelingError,
    ResonanceError,
    ResourceError,
    UsageError,
    ZeroPiError,
    ZeroPiWarning,
)
from .operators import (
    HermitianOperator,
    build_derivative_operator,
    build_h_2d,
    build_h_3d,
    build_h_product,
    build_h_zeta,
    build_noise_operator,
    effective_offset_charges,
)
from .params import BasisSpec, CircuitParams, derive_energies, parameter_set
from .spectrum import (
    basis_convergence,
    energy_derivatives,
    label_dressed,
    solve_2d,
    solve_3d,
    solve_dressed,
    sweep,
)

__version__ = "0.1.0"
