"""Squeezed-microwave quadrature measurements: simulation, detection-chain
calibration, and maximum-likelihood state tomography at desk scale."""

from .calibration import (
    CalibrationCase,
    ChainParams,
    NoiseRun,
    conversion_factor,
    detected_variance_off,
    efficiency_eq1,
    fit_linear_run,
    planck_occupancy,
    predict_noise,
    predict_noise_off_off,
    solve_chain,
    solve_chain_bounded,
    solve_stage1,
    solve_stage2,
    solve_stage3,
    synthesize_runs,
    three_cases,
)
from .fock import (
    DensityMatrix,
    PureState,
    WignerGrid,
    beamsplitter_combine,
    best_pure_squeezed_fock,
    coherent_information,
    covariance_matrix,
    extremal_variances,
    fidelity_pure,
    fock_state,
    gaussian_to_fock,
    marginal_pdf,
    minimum_variance_axis,
    partial_trace,
    purity,
    quadrature_variance,
    quadrature_wavefunction,
    rotate,
    squeezed_thermal_state,
    squeezed_vacuum_pure,
    thermal_state,
    vacuum_state,
    von_neumann_entropy,
    wigner,
)
from .gaussian import (
    GaussianState,
    VarianceCurve,
    apply_loss,
    balanced_beamsplitter_output,
    best_pure_squeezed,
    entropy_g,
    fidelity_pure_gaussian,
    gaussian_coherent_information,
    linear_variance_inference,
    squeezed_thermal,
    symplectic_eigenvalues,
    variance_at,
)
from .homodyne import PhaseSchedule, QuadratureDataset, histogram, sample, variance_vs_phase, voltage_view
from .tomography import (
    BootstrapSummary,
    PovmSet,
    ReconstructionResult,
    bootstrap,
    build_povm,
    default_bin_edges,
    likelihood_diagnostic,
    log_likelihood,
    reconstruct,
    state_properties,
    truncation_sensitivity,
)

__version__ = "0.1.0"
