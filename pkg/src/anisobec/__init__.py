"""Cigar-trap condensate ground states and spatial entanglement."""

from .core import (
    AtomSpecies,
    CouplingConstants,
    NaturalCouplings,
    TrapConfig,
    UnitSystem,
    eta_T,
    laguerre_eval,
    natural_couplings,
    polylog2,
    transverse_ground_width,
    transverse_overlap,
    upsilon_T,
)
from .grids import (
    AxialGrid,
    CylGrid,
    Field1D,
    FieldRZ,
    RadialField,
    RadialGrid,
    inner_product,
    laplacian_1d,
    laplacian_cyl,
    normalize,
)
from .solvers import (
    GroundState1D,
    GroundState3D,
    SolveSettings,
    solve_gp1d,
    solve_gp3d,
    solve_quintic,
)
from .schmidt import (
    LongitudinalMoments,
    SchmidtModel,
    assemble_psi1,
    build_schmidt_model,
    longitudinal_moments,
    schmidt_c1,
)
from .analysis import (
    AnalysisReport,
    concurrence,
    critical_atom_number,
    marginal_longitudinal,
    marginal_transverse,
    match_stiffness,
    probability_deficit,
    schmidt_projections,
)

__version__ = "0.1.0"
