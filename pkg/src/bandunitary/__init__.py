"""Random unitary band matrices: windows, transfer-matrix cocycles, Lyapunov
exponents, the non-compactness certificate and localization diagnostics."""

from .circle import ArcSet, circular_distance, wrap
from .disorder import (
    DisorderRealization,
    DomainError,
    PhaseDistribution,
    VerblunskiPhaseSequence,
    correlated_verblunski,
    format_distribution,
    parse_distribution,
    sample_phases,
    shift_realization,
)
from .furstenberg import FuerstenbergCertificate, group_elements, noncompactness_probe, tau_lift
from .operators import (
    BandParameters,
    BandUnitaryWindow,
    BasisChange,
    ConstructionError,
    build_basis_change,
    build_cmv,
    build_diagonal,
    build_S_plus,
    build_S_window,
    build_U_plus,
    build_U_window,
    apply_phases,
)
from .spectral import (
    SpectralMeasure,
    UnitaryEigenDecomposition,
    almost_sure_spectrum,
    eig_unitary,
    krylov_cyclicity,
    localization_report,
    spectral_averaging_experiment,
    spectral_measure,
    spectrum_of_S,
)
from .transfer import CocycleProduct, LyapunovEstimate, cocycle, lyapunov_estimate, lyapunov_sweep, transfer_matrix

__version__ = "0.1.0"
