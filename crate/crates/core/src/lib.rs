//! Simulation and analysis toolkit for a folded-interferometer
//! polarization-entangled photon-pair source.
//!
//! The crate models the optical chain end-to-end: Jones-calculus
//! polarization optics and corner-cube retroreflection ([`jones`], [`ccr`]),
//! quasi-phase-matched down-conversion with temperature-dependent dispersion
//! ([`dispersion`], [`phasematch`]), the two-photon source state and its
//! imperfections ([`source`]), Monte Carlo detection statistics ([`detect`]),
//! and the derived figures of merit: visibility, fidelity, QBER, power-law
//! fits, and Allan-deviation stability ([`analysis`], [`fit`], [`allan`]).

pub mod allan;
pub mod analysis;
pub mod ccr;
pub mod config;
pub mod detect;
pub mod dispersion;
pub mod error;
pub mod fit;
pub mod fresnel;
pub mod jones;
pub mod phasematch;
pub mod source;

pub use allan::{allan_deviation, default_block_sizes, loglog_slope, AllanCurve, AllanPoint, TimeSeries};
pub use analysis::{
    coincidence_fraction, correlation_curve, fidelity_from_visibilities, fit_visibility,
    qber_estimate, QberConvention, VisibilityResult,
};
pub use ccr::{ccr_polarization_sweep, ccr_reflect, CcrKind, CcrModel, SweepPoint};
pub use config::{linspace, split_seed, ExperimentConfig};
pub use detect::{
    accidental_rate, count_coincidences, power_sweep, rate_summary, simulate_tags, DetectorModel,
    PolarizerSetting, RateSummary, TagStream,
};
pub use dispersion::DispersionModel;
pub use error::{Error, Result};
pub use fit::{fit_power_model, FitResult, PowerModel};
pub use fresnel::fresnel_reflection;
pub use jones::{
    half_wave_plate, linear_polarizer, variable_retarder, PolarizationOperator, PolarizationState,
};
pub use phasematch::{
    delta_k, idler_from_energy, phase_match_map, phase_match_solve, spectral_envelope,
    CrystalSpec, DetectionBand, MapObservable, PhaseMatchPoint, SolveOptions,
};
pub use source::{
    double_pass_rate_gain, fidelity, misalignment_coupling, trace_paths, MisalignmentSetting,
    SourceConfig, TwoPhotonState, BASIS_LABELS,
};

/// Crate version, embedded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
