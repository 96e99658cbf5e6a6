"""Local-parity scattering: stationary 1D scattering over piecewise-constant
barrier arrays, mirror-symmetry decompositions, resonance design and
independent numerical verification.
"""
from . import design, oracle, potential, transfer, wavefield
from .design import (
    DesignNoConvergence,
    DesignProblem,
    DesignSolution,
    DesignTarget,
    FreeHandle,
    InfeasibleParams,
    abr_energy,
    abr_width,
    pair_spacing,
    quarter_wave_triple,
    zero_current_chain,
)
from .oracle import OracleResult, SampledPotential, cross_validate, integrate, integrate_pwc
from .potential import (
    Barrier,
    Decomposition,
    PotentialFormatError,
    PwcPotential,
    Subdomain,
    dump_potential,
    enumerate_decompositions,
    is_lp_symmetric,
    load_potential,
    parse_potential,
)
from .transfer import (
    ScanWarning,
    SMatrix,
    TransferMatrix,
    barrier_matrix,
    find_unit_transmission,
    s_matrix,
    scatter,
    total_matrix,
    transmission_spectrum,
)
from .wavefield import (
    BoundaryCondition,
    LpContradictionError,
    NonlocalInvariant,
    ScatterState,
    StateClass,
    WaveSamples,
    apply_lp_transform,
    check_lp_density,
    check_lp_phase,
    classify_state,
    mirror_property_check,
    nonlocal_invariant,
    q_profile,
    reducibility_analysis,
    solve_state,
)

__version__ = "0.1.0"
