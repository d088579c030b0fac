//! Heralded single photons from frequency-comb pumped SPDC.
//!
//! * [`grid`]: detuning grids, the dense complex matrix type and the centred
//!   unitary 2D Fourier transform.
//! * [`jsa`]: comb-structured joint spectral amplitude, spectral filters and
//!   temporal gating.
//! * [`schmidt`]: Schmidt spectrum and spectral purity.
//! * [`visibility`]: heralded g⁽²⁾ and the analytic HOM visibility model.
//! * [`countsim`]: Monte Carlo time-tag simulation of the four-detector
//!   experiment.
//! * [`config`], [`pipeline`], [`io`]: configuration files, the commands
//!   behind the `combhom` binary, and file formats.

pub mod config;
pub mod countsim;
pub mod error;
pub mod grid;
pub mod io;
pub mod jsa;
pub mod pipeline;
pub mod schmidt;
pub mod visibility;

pub use error::{Error, Result};
pub use grid::{fft2, fwhm_to_angular_sigma, ifft2, make_grid, normalize, ComplexMatrix, Domain, FrequencyGrid, TimeGrid};
pub use jsa::{
    apply_temporal_gates, build_jsa, jta, pump_comb_amplitude, PhaseMatchSpec, PumpCombSpec,
    SpectralFilterSpec, TemporalGateSpec,
};
pub use schmidt::{purity_gaussian_closed_form, purity_gram, schmidt_decompose, SchmidtSpectrum};
pub use visibility::{coincidence_rates, g2_from_counts, hom_visibility, CountRecord, SourceStats};
