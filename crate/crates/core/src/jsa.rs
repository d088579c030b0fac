//! Comb-structured joint spectral amplitude, spectral filtering and temporal
//! gating.
//!
//! The pump amplitude is a Gaussian envelope multiplying a train of Gaussian
//! teeth spaced by the repetition rate, all in phase. Temporal gates act on
//! the joint temporal amplitude (the centred 2D transform of the JSA); the
//! gated JSA is the inverse transform, which is the 2D convolution of the JSA
//! with the transformed gate product.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, ComplexMatrix, Domain, FrequencyGrid, TimeGrid};

/// Teeth further than this many tooth standard deviations from a sample are
/// skipped when evaluating the comb (their contribution is below 1e-31).
const TOOTH_REACH_SIGMAS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpCombSpec {
    /// Mode spacing Δ/2π in GHz.
    pub rep_rate_ghz: f64,
    /// Power FWHM Γ_p of the pump envelope in GHz.
    pub envelope_fwhm_ghz: f64,
    /// Standard deviation of each tooth in GHz (ordinary frequency).
    pub tooth_sigma_ghz: f64,
    /// Teeth summed for `n ∈ [-N, N]`; `None` sums every tooth that
    /// contributes on the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tooth_truncation: Option<u32>,
}

impl PumpCombSpec {
    pub fn new(rep_rate_ghz: f64, envelope_fwhm_ghz: f64, tooth_sigma_ghz: f64) -> Result<Self> {
        let spec = Self {
            rep_rate_ghz,
            envelope_fwhm_ghz,
            tooth_sigma_ghz,
            tooth_truncation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 3.2 GHz comb, 74 GHz envelope, 0.5 GHz teeth.
    pub fn reference() -> Self {
        Self {
            rep_rate_ghz: 3.2,
            envelope_fwhm_ghz: 74.0,
            tooth_sigma_ghz: 0.5,
            tooth_truncation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Invariant {
            section: "PumpCombSpec",
            reason,
        });
        if !(self.rep_rate_ghz.is_finite() && self.rep_rate_ghz > 0.0) {
            return bad(format!("rep_rate_ghz must be > 0 (got {})", self.rep_rate_ghz));
        }
        if !(self.envelope_fwhm_ghz.is_finite() && self.envelope_fwhm_ghz > 0.0) {
            return bad(format!(
                "envelope_fwhm_ghz must be > 0 (got {})",
                self.envelope_fwhm_ghz
            ));
        }
        if !(self.tooth_sigma_ghz.is_finite() && self.tooth_sigma_ghz > 0.0) {
            return bad(format!(
                "tooth_sigma_ghz must be > 0 (got {})",
                self.tooth_sigma_ghz
            ));
        }
        if self.tooth_sigma_ghz >= self.rep_rate_ghz / 2.0 {
            return bad(format!(
                "tooth_sigma_ghz ({}) must be below half the repetition rate ({}); the teeth would merge",
                self.tooth_sigma_ghz,
                self.rep_rate_ghz / 2.0
            ));
        }
        Ok(())
    }

    /// Envelope standard deviation in GHz: `Γ_p / (2√ln2)`.
    pub fn envelope_sigma_ghz(&self) -> f64 {
        self.envelope_fwhm_ghz / (2.0 * LN_2.sqrt())
    }

    /// γ_p in rad/ns.
    pub fn envelope_angular_sigma(&self) -> f64 {
        PI * self.envelope_fwhm_ghz / LN_2.sqrt()
    }

    /// σ_p in rad/ns.
    pub fn tooth_angular_sigma(&self) -> f64 {
        2.0 * PI * self.tooth_sigma_ghz
    }

    /// Δ in rad/ns.
    pub fn angular_spacing(&self) -> f64 {
        2.0 * PI * self.rep_rate_ghz
    }

    /// Pulse period 2π/Δ in ps.
    pub fn pulse_period_ps(&self) -> f64 {
        1e3 / self.rep_rate_ghz
    }

    /// Smallest truncation whose outermost tooth sits at least five envelope
    /// widths beyond the sum-frequency range reachable on `grid`.
    pub fn required_truncation(&self, grid: &FrequencyGrid) -> u32 {
        ((grid.span() + 5.0 * self.envelope_sigma_ghz()) / self.rep_rate_ghz).ceil() as u32
    }

    /// Number of tooth centres `n·Δ/2π` inside the envelope FWHM.
    pub fn teeth_within_envelope_fwhm(&self) -> usize {
        let half = self.envelope_fwhm_ghz / 2.0;
        let n_max = (half / self.rep_rate_ghz + 1e-12).floor() as i64;
        let n_max = match self.tooth_truncation {
            Some(n) => n_max.min(n as i64),
            None => n_max,
        };
        (2 * n_max + 1) as usize
    }
}

/// Pump spectral amplitude at sum detuning `nu_sum` (GHz): envelope times the
/// in-phase tooth sum. Real and non-negative.
pub fn pump_comb_amplitude(nu_sum: f64, spec: &PumpCombSpec) -> f64 {
    let env_sigma = spec.envelope_sigma_ghz();
    let envelope = (-nu_sum * nu_sum / (2.0 * env_sigma * env_sigma)).exp();
    envelope * tooth_sum(nu_sum, spec)
}

fn tooth_sum(nu: f64, spec: &PumpCombSpec) -> f64 {
    let rep = spec.rep_rate_ghz;
    let sigma = spec.tooth_sigma_ghz;
    let reach = (TOOTH_REACH_SIGMAS * sigma / rep).ceil() as i64 + 1;
    let nearest = (nu / rep).round() as i64;
    let (lo, hi) = match spec.tooth_truncation {
        Some(n) => ((nearest - reach).max(-(n as i64)), (nearest + reach).min(n as i64)),
        None => (nearest - reach, nearest + reach),
    };
    (lo..=hi)
        .map(|n| {
            let d = nu - n as f64 * rep;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    Gaussian,
    Rectangular,
    Identity,
}

/// Spectral filter with unit peak amplitude transmission. For the Gaussian
/// shape `fwhm_ghz` is the FWHM of the power transmission `|F|²`; for the
/// rectangular shape it is the full passband width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralFilterSpec {
    pub shape: FilterShape,
    #[serde(default)]
    pub fwhm_ghz: f64,
    #[serde(default)]
    pub center_ghz: f64,
}

impl SpectralFilterSpec {
    pub fn gaussian(fwhm_ghz: f64) -> Self {
        Self {
            shape: FilterShape::Gaussian,
            fwhm_ghz,
            center_ghz: 0.0,
        }
    }

    pub fn rectangular(fwhm_ghz: f64) -> Self {
        Self {
            shape: FilterShape::Rectangular,
            fwhm_ghz,
            center_ghz: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self {
            shape: FilterShape::Identity,
            fwhm_ghz: 0.0,
            center_ghz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape != FilterShape::Identity && !(self.fwhm_ghz.is_finite() && self.fwhm_ghz > 0.0) {
            return Err(Error::Invariant {
                section: "SpectralFilterSpec",
                reason: format!("fwhm_ghz must be > 0 (got {})", self.fwhm_ghz),
            });
        }
        if !self.center_ghz.is_finite() {
            return Err(Error::Invariant {
                section: "SpectralFilterSpec",
                reason: "center_ghz must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn transmission(&self, nu_ghz: f64) -> f64 {
        let d = nu_ghz - self.center_ghz;
        match self.shape {
            FilterShape::Identity => 1.0,
            FilterShape::Gaussian => (-2.0 * LN_2 * d * d / (self.fwhm_ghz * self.fwhm_ghz)).exp(),
            FilterShape::Rectangular => {
                if d.abs() <= self.fwhm_ghz / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateShape {
    Gaussian,
    Rectangular,
    Identity,
}

/// Temporal amplitude gate. `width_ps` is the amplitude FWHM for the Gaussian
/// shape and the full width for the rectangular shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalGateSpec {
    pub shape: GateShape,
    #[serde(default)]
    pub width_ps: f64,
    #[serde(default)]
    pub center_ps: f64,
}

impl TemporalGateSpec {
    pub fn gaussian(width_ps: f64) -> Self {
        Self {
            shape: GateShape::Gaussian,
            width_ps,
            center_ps: 0.0,
        }
    }

    pub fn rectangular(width_ps: f64) -> Self {
        Self {
            shape: GateShape::Rectangular,
            width_ps,
            center_ps: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self {
            shape: GateShape::Identity,
            width_ps: 0.0,
            center_ps: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.shape == GateShape::Identity
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape != GateShape::Identity && !(self.width_ps.is_finite() && self.width_ps > 0.0) {
            return Err(Error::Invariant {
                section: "TemporalGateSpec",
                reason: format!("width_ps must be > 0 (got {})", self.width_ps),
            });
        }
        if !self.center_ps.is_finite() {
            return Err(Error::Invariant {
                section: "TemporalGateSpec",
                reason: "center_ps must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn transmission(&self, t_ps: f64) -> f64 {
        let d = t_ps - self.center_ps;
        match self.shape {
            GateShape::Identity => 1.0,
            GateShape::Gaussian => (-4.0 * LN_2 * d * d / (self.width_ps * self.width_ps)).exp(),
            GateShape::Rectangular => {
                if d.abs() <= self.width_ps / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn overlaps(&self, t: &TimeGrid) -> bool {
        if self.is_identity() {
            return true;
        }
        let lo = t.time(0);
        let hi = t.time(t.points() - 1);
        self.center_ps + self.width_ps / 2.0 >= lo && self.center_ps - self.width_ps / 2.0 <= hi
    }
}

/// Phase-matching amplitude α(ν, ν′). Identity reproduces the comb-only model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseMatchSpec {
    #[default]
    Identity,
    /// Gaussian in ν+ν′ with power FWHM `fwhm_ghz`.
    GaussianSumFrequency { fwhm_ghz: f64 },
}

impl PhaseMatchSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PhaseMatchSpec::Identity => Ok(()),
            PhaseMatchSpec::GaussianSumFrequency { fwhm_ghz } if fwhm_ghz.is_finite() && fwhm_ghz > 0.0 => Ok(()),
            PhaseMatchSpec::GaussianSumFrequency { fwhm_ghz } => Err(Error::Invariant {
                section: "PhaseMatchSpec",
                reason: format!("fwhm_ghz must be > 0 (got {fwhm_ghz})"),
            }),
        }
    }

    fn amplitude(&self, nu_sum: f64) -> f64 {
        match *self {
            PhaseMatchSpec::Identity => 1.0,
            PhaseMatchSpec::GaussianSumFrequency { fwhm_ghz } => {
                (-2.0 * LN_2 * nu_sum * nu_sum / (fwhm_ghz * fwhm_ghz)).exp()
            }
        }
    }
}

/// Checks that the grid spans at least three times the widest filter.
pub fn check_grid_coverage(
    grid: &FrequencyGrid,
    fs: &SpectralFilterSpec,
    fi: &SpectralFilterSpec,
) -> Result<()> {
    let widest = [fs, fi]
        .iter()
        .filter(|f| f.shape != FilterShape::Identity)
        .map(|f| f.fwhm_ghz)
        .fold(0.0, f64::max);
    if grid.span() < 3.0 * widest {
        return Err(Error::Invariant {
            section: "FrequencyGrid",
            reason: format!(
                "span {} GHz is less than three times the widest filter FWHM ({widest} GHz)",
                grid.span()
            ),
        });
    }
    Ok(())
}

/// `F_s(ν)·F_i(ν′)·α(ν,ν′)·β(ν+ν′)` sampled on `grid` and normalized to unit
/// discrete L2 norm. Coverage problems are logged; see [`build_jsa_strict`].
pub fn build_jsa(
    grid: &FrequencyGrid,
    pump: &PumpCombSpec,
    pm: &PhaseMatchSpec,
    fs: &SpectralFilterSpec,
    fi: &SpectralFilterSpec,
) -> Result<ComplexMatrix> {
    build(grid, pump, pm, fs, fi, false)
}

/// As [`build_jsa`] but grid-coverage warnings become errors.
pub fn build_jsa_strict(
    grid: &FrequencyGrid,
    pump: &PumpCombSpec,
    pm: &PhaseMatchSpec,
    fs: &SpectralFilterSpec,
    fi: &SpectralFilterSpec,
) -> Result<ComplexMatrix> {
    build(grid, pump, pm, fs, fi, true)
}

fn build(
    grid: &FrequencyGrid,
    pump: &PumpCombSpec,
    pm: &PhaseMatchSpec,
    fs: &SpectralFilterSpec,
    fi: &SpectralFilterSpec,
    strict: bool,
) -> Result<ComplexMatrix> {
    pump.validate()?;
    pm.validate()?;
    fs.validate()?;
    fi.validate()?;
    if let Err(e) = check_grid_coverage(grid, fs, fi) {
        if strict {
            return Err(e);
        }
        log::warn!("{e}");
    }
    if let Some(n) = pump.tooth_truncation {
        let need = pump.required_truncation(grid);
        if n < need {
            log::warn!("comb truncated at N = {n}; N >= {need} is needed to cover this grid");
        }
    }

    let n = grid.points();
    let c = grid.center() as f64;
    let res = grid.resolution();
    // ν_j + ν_k = (j + k - 2c)·Δν, so the pump only needs 2n - 1 samples.
    let sum_axis: Vec<f64> = (0..2 * n - 1)
        .map(|s| {
            let nu = (s as f64 - 2.0 * c) * res;
            pump_comb_amplitude(nu, pump) * pm.amplitude(nu)
        })
        .collect();
    let signal: Vec<f64> = (0..n).map(|j| fs.transmission(grid.detuning(j))).collect();
    let idler: Vec<f64> = (0..n).map(|k| fi.transmission(grid.detuning(k))).collect();

    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    let fill = |(j, row): (usize, &mut [Complex64])| {
        for (k, z) in row.iter_mut().enumerate() {
            *z = Complex64::new(signal[j] * idler[k] * sum_axis[j + k], 0.0);
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(n).enumerate().for_each(fill);
    }
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(n).enumerate().for_each(fill);

    let m = ComplexMatrix::from_parts(n, n, data, Domain::Frequency);
    grid::normalize(&m, grid)
}

/// Joint temporal amplitude of a JSA.
pub fn jta(jsa: &ComplexMatrix, grid: &FrequencyGrid) -> Result<(ComplexMatrix, TimeGrid)> {
    grid::fft2(jsa, grid)
}

#[derive(Debug, Clone)]
pub struct GatedJsa {
    /// Gated JSA renormalized to unit discrete L2 norm.
    pub jsa: ComplexMatrix,
    /// Fraction of the input norm that passes the gates.
    pub survival: f64,
}

/// Multiply the JTA by `G_s(t)·G_i(t′)` and transform back.
pub fn apply_temporal_gates(
    jsa: &ComplexMatrix,
    grid: &FrequencyGrid,
    gs: &TemporalGateSpec,
    gi: &TemporalGateSpec,
) -> Result<GatedJsa> {
    gs.validate()?;
    gi.validate()?;
    let input_norm = jsa.norm_sqr();
    if gs.is_identity() && gi.is_identity() {
        jsa.check_square_points(grid.points())?;
        return Ok(GatedJsa {
            jsa: grid::normalize(jsa, grid)?,
            survival: 1.0,
        });
    }
    let (mut t, tg) = grid::fft2(jsa, grid)?;
    if !gs.overlaps(&tg) {
        return Err(Error::GateOutsideGrid("signal"));
    }
    if !gi.overlaps(&tg) {
        return Err(Error::GateOutsideGrid("idler"));
    }
    let n = tg.points();
    let g_signal: Vec<f64> = (0..n).map(|j| gs.transmission(tg.time(j))).collect();
    let g_idler: Vec<f64> = (0..n).map(|k| gi.transmission(tg.time(k))).collect();
    for (j, row) in t.data_mut().chunks_mut(n).enumerate() {
        let a = g_signal[j];
        for (z, b) in row.iter_mut().zip(&g_idler) {
            *z *= a * b;
        }
    }
    let gated = grid::ifft2(&t, &tg)?;
    let out_norm = gated.norm_sqr();
    if out_norm == 0.0 {
        return Err(Error::Degenerate("no amplitude survives the temporal gates".into()));
    }
    Ok(GatedJsa {
        survival: out_norm / input_norm,
        jsa: grid::normalize(&gated, grid)?,
    })
}
