"""Exact propagators for time-dependent quadratic Hamiltonians.

Modules
-------
quadform
    Hamiltonian coefficients, validation and the symplectic generator.
evolution
    Fundamental matrix, Green function, classical source responses.
propagator
    Gaussian kernel coefficients, kernel evaluation, grid state evolution.
chains
    Coupling matrices of periodic / Dirichlet chains and their normal modes.
ladder
    Excitation transport, transition maps, forced-chain response.
fock
    Truncated Fock-space reference used to check the ladder results.
"""
from ._backend import BACKEND
from .chains import ChainSpec, ModeDecomposition, build_Z, chain_hamiltonian, decompose, transform_coords
from .errors import (
    CausticError,
    ConfigError,
    DimensionError,
    QuadpropError,
    QuadratureError,
    TimeRangeError,
    TruncationError,
    ValidationError,
)
from .evolution import (
    SourceResponse,
    SymplecticBlocks,
    classical_path,
    fundamental_matrix,
    green_function,
    source_response,
    symplectic_defect,
)
from .ladder import (
    LadderChain,
    TransitionMap,
    build_lambda,
    coherent_excitations,
    end_to_end,
    end_to_end_map,
    excitation_ratio,
    first_maxima,
    forced_response,
    ladder_modes,
    transition_map,
    transition_probability,
)
from .propagator import (
    GridState,
    KernelParams,
    evolve_density,
    evolve_wavefunction,
    kernel_eval,
    kernel_params,
    mode_kernel,
    phase_theta,
    propagator,
)
from .quadform import (
    Constant,
    NamedPreset,
    QuadraticHamiltonian,
    SampledTable,
    symplectic_generator,
    validate,
    w_matrix,
)

__version__ = "0.1.0"
