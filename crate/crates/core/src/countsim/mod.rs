//! Monte Carlo model of the two-source, four-detector counting experiment.
//!
//! Channel layout (1-based, as on the time tagger):
//!
//! | channel | detects                          |
//! |---------|----------------------------------|
//! | 1       | idler of source 1 (herald)       |
//! | 2       | idler of source 2 (herald)       |
//! | 3, 4    | the two outputs of the 50:50 beamsplitter mixing both signals |

mod counting;
mod histogram;
mod scan;
mod source;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use counting::{align_windows, apply_windows_and_count, ChannelWindow, Herald, PeakOffsets, WindowSpec};
pub use histogram::{coincidence_histogram, CoincidenceHistogram, PeakFit};
pub use scan::{simulate_hom_scan, HomScan, ScanPoint};
pub use source::{
    heralded_source_stats, mu_for_pair_rate, simulate_independent_streams, simulate_timetags,
    PhotonSource,
};

/// FWHM of a Gaussian divided by its standard deviation.
pub(crate) const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Mean pair number per pulse above which the single-pulse pair model is
/// questionable.
const MU_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatistics {
    /// Single-mode SPDC: geometric photon-number distribution.
    #[default]
    Thermal,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub rep_rate_ghz: f64,
    /// Mean pair number per pulse, source 1.
    pub mu1: f64,
    /// Mean pair number per pulse, source 2.
    pub mu2: f64,
    /// Klyshko efficiencies for channels 1-4.
    pub klyshko: [f64; 4],
    pub jitter_fwhm_ps: [f64; 4],
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub statistics: PairStatistics,
    /// Uniform dark-count rate per channel.
    #[serde(default)]
    pub dark_cps: [f64; 4],
    /// Fixed cable/electronics delay added to every tag of a channel.
    #[serde(default)]
    pub channel_delay_ps: [f64; 4],
}

impl ExperimentSpec {
    /// 3.2 GHz comb, detector jitters 148/93/141/162 ps and Klyshko
    /// efficiencies of 15 % (idlers) and 7 % (signals).
    pub fn measured_3p2ghz(mu: f64, duration_s: f64, seed: u64) -> Self {
        Self {
            rep_rate_ghz: 3.2,
            mu1: mu,
            mu2: mu,
            klyshko: [0.15, 0.15, 0.07, 0.07],
            jitter_fwhm_ps: [148.0, 93.0, 141.0, 162.0],
            duration_s,
            seed,
            statistics: PairStatistics::Thermal,
            dark_cps: [0.0; 4],
            channel_delay_ps: [0.0; 4],
        }
    }

    pub fn pulse_period_ps(&self) -> f64 {
        1e3 / self.rep_rate_ghz
    }

    pub fn pulse_count(&self) -> u64 {
        (self.duration_s * self.rep_rate_ghz * 1e9).floor() as u64
    }

    pub fn duration_ps(&self) -> i64 {
        (self.duration_s * 1e12).round() as i64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::Invariant {
                section: "ExperimentSpec",
                reason,
            })
        };
        if !(self.rep_rate_ghz.is_finite() && self.rep_rate_ghz > 0.0) {
            return bad(format!("rep_rate_ghz must be > 0 (got {})", self.rep_rate_ghz));
        }
        for (name, mu) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(mu.is_finite() && mu >= 0.0) {
                return bad(format!("{name} must be >= 0 (got {mu})"));
            }
            if mu > MU_WARN {
                log::warn!("{name} = {mu}: multi-pair emission is no longer a small correction");
            }
        }
        for (j, &eta) in self.klyshko.iter().enumerate() {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(format!("klyshko[{j}] must lie in (0, 1] (got {eta})"));
            }
        }
        for (j, &tau) in self.jitter_fwhm_ps.iter().enumerate() {
            if !(tau.is_finite() && tau >= 0.0) {
                return bad(format!("jitter_fwhm_ps[{j}] must be >= 0 (got {tau})"));
            }
        }
        for (j, &d) in self.dark_cps.iter().enumerate() {
            if !(d.is_finite() && d >= 0.0) {
                return bad(format!("dark_cps[{j}] must be >= 0 (got {d})"));
            }
        }
        if self.channel_delay_ps.iter().any(|d| !d.is_finite()) {
            return bad("channel_delay_ps must be finite".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration_s must be >= 0 (got {})", self.duration_s));
        }
        Ok(())
    }
}

/// Sorted detection times of one channel, in whole picoseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTagStream {
    channel: u8,
    tags_ps: Vec<i64>,
}

impl TimeTagStream {
    pub fn new(channel: u8, tags_ps: Vec<i64>) -> Result<Self> {
        if let Some(index) = tags_ps.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::UnsortedStream {
                channel,
                index: index + 1,
            });
        }
        Ok(Self { channel, tags_ps })
    }

    pub(crate) fn from_sorted(channel: u8, tags_ps: Vec<i64>) -> Self {
        debug_assert!(tags_ps.windows(2).all(|w| w[0] <= w[1]));
        Self { channel, tags_ps }
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    pub fn tags(&self) -> &[i64] {
        &self.tags_ps
    }

    pub fn len(&self) -> usize {
        self.tags_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags_ps.is_empty()
    }

    /// Mean click rate over `duration_s`.
    pub fn rate_cps(&self, duration_s: f64) -> f64 {
        self.tags_ps.len() as f64 / duration_s
    }
}

pub type Streams = [TimeTagStream; 4];
