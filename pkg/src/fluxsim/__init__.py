"""Flux-tunable atom readout toolbox.

Circuit diagonalization, dispersive readout modelling, quantum-jump trace
simulation and measurement-based feedback for an inductively coupled
fluxonium-resonator system.
"""

__version__ = "0.1.0"

from .circuit import (
    CircuitParams,
    FluxBias,
    EffectiveJunction,
    HilbertTruncation,
    CoupledModel,
    DressedSpectrum,
    effective_josephson,
    build_fluxonium_hamiltonian,
    build_coupled_hamiltonian,
    diagonalize_and_label,
)
from .spectro import (
    TransitionCurve,
    DispersiveCurve,
    SweetSpot,
    transition_frequencies,
    dispersive_shift,
    dispersive_curve,
    ac_stark_shift,
    transition_sweep,
    find_sweet_spots,
)
from .readout import (
    ReadoutSettings,
    PointerState,
    snr,
    measurement_time_for_snr,
    duffing_steady_state,
    phase_response,
    phase_separation,
    extract_chi_from_phase,
    calibrate_photon_number,
    efficiency_report,
)
from .jumps import (
    JumpModel,
    IQTrace,
    RateEstimate,
    simulate_jump_trace,
    rotate_to_q,
    latching_filter,
    dwell_statistics,
    window_assignments,
    qnd_fidelity,
    thermal_population,
    effective_temperature,
    free_decay_rate,
)
from .feedback import (
    ProtocolConfig,
    StatePrepReport,
    ErrorBudget,
    run_state_prep,
    error_budget,
    gaussian_overlap_error,
    three_component_population,
)
from .config import RunConfig, load_config, loads_config, dump_config

__all__ = [
    "CircuitParams",
    "FluxBias",
    "EffectiveJunction",
    "HilbertTruncation",
    "CoupledModel",
    "DressedSpectrum",
    "effective_josephson",
    "build_fluxonium_hamiltonian",
    "build_coupled_hamiltonian",
    "diagonalize_and_label",
    "TransitionCurve",
    "DispersiveCurve",
    "SweetSpot",
    "transition_frequencies",
    "dispersive_shift",
    "dispersive_curve",
    "ac_stark_shift",
    "transition_sweep",
    "find_sweet_spots",
    "ReadoutSettings",
    "PointerState",
    "snr",
    "measurement_time_for_snr",
    "duffing_steady_state",
    "phase_response",
    "phase_separation",
    "extract_chi_from_phase",
    "calibrate_photon_number",
    "efficiency_report",
    "JumpModel",
    "IQTrace",
    "RateEstimate",
    "simulate_jump_trace",
    "rotate_to_q",
    "latching_filter",
    "dwell_statistics",
    "window_assignments",
    "qnd_fidelity",
    "thermal_population",
    "effective_temperature",
    "free_decay_rate",
    "ProtocolConfig",
    "StatePrepReport",
    "ErrorBudget",
    "run_state_prep",
    "error_budget",
    "gaussian_overlap_error",
    "three_component_population",
    "RunConfig",
    "load_config",
    "loads_config",
    "dump_config",
    "__version__",
]
