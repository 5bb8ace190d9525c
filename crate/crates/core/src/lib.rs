//! Simulation of a heralded spin-photon controlled-phase gate built on a
//! waveguide-coupled quantum emitter.
//!
//! The crate covers frequency-resolved scattering amplitudes and their
//! spectral averages, density-matrix propagation through the gate sequence
//! with its error channels, closed-form fidelity and efficiency estimates,
//! and the calibration fits used to obtain the input parameters from data.
//!
//! Units: time in ns, rates and detunings in rad/ns, power in nW.

pub mod calibration;
pub mod error;
pub mod metrics;
pub mod params;
pub mod protocol;
pub mod quadrature;
pub mod scattering;
pub mod state;

pub use calibration::{
    extract_dephasing, fit_saturation, mean_photon_number, DephasingEstimate, PhotonFlux,
    SaturationFit, SaturationGauge, SaturationPoint, VisibilityPoint,
};
pub use error::{Error, Result};
pub use metrics::{
    bootstrap_concurrence, concurrence, conditional_fidelity, contrasts_from_state,
    density_from_counts, fidelity_budget, fidelity_from_contrasts, photon_visibility,
    success_probability, BootstrapEstimate, CoincidenceCounts, Contrasts, FidelityBudget,
    SuccessProbability, Visibility,
};
pub use params::{Axis, CouplingSplit, EmitterParams, PulseParams, RotationPulse};
pub use protocol::{
    run_gate, scatter_timebin, AmplitudeSource, ChannelConfig, DepolarizingModel, GateEvolution,
    GateOutcome,
};
pub use scattering::{coefficients_at, overlap_integrals, OverlapIntegrals, OverlapMethod};
pub use state::{JointDensity, SpinDensity, Spin, TimeBin};
