//! TOML experiment configuration.
//!
//! Every physical key carries its unit as a suffix. Unknown keys are errors,
//! and every section is validated as soon as the file is parsed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::countsim::{ExperimentSpec, WindowSpec};
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, DEFAULT_MAX_STEPS};
use crate::jsa::{check_grid_coverage, PhaseMatchSpec, PumpCombSpec, SpectralFilterSpec, TemporalGateSpec};
use crate::visibility::SourceStats;

const REFERENCE: &str = include_str!("../configs/reference.toml");
const FAST: &str = include_str!("../configs/fast.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub resolution_ghz: f64,
    pub span_ghz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::with_limit(
            self.resolution_ghz,
            self.span_ghz,
            self.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPair {
    pub signal: SpectralFilterSpec,
    pub idler: SpectralFilterSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatePair {
    pub signal: TemporalGateSpec,
    pub idler: TemporalGateSpec,
}

impl GatePair {
    pub fn identity() -> Self {
        Self {
            signal: TemporalGateSpec::identity(),
            idler: TemporalGateSpec::identity(),
        }
    }
}

/// Settings of the `countsim` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsimSettings {
    #[serde(default = "default_delays")]
    pub delays_ps: Vec<f64>,
    /// Purity injected into HOM scans; computed from the JSA when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
    #[serde(default = "default_bin")]
    pub histogram_bin_ps: f64,
    #[serde(default = "default_range")]
    pub histogram_range_ps: f64,
}

fn default_delays() -> Vec<f64> {
    vec![-40.0, 0.0, 40.0]
}

fn default_bin() -> f64 {
    4.0
}

fn default_range() -> f64 {
    2000.0
}

impl Default for CountsimSettings {
    fn default() -> Self {
        Self {
            delays_ps: default_delays(),
            purity: None,
            histogram_bin_ps: default_bin(),
            histogram_range_ps: default_range(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub pump: PumpCombSpec,
    #[serde(default)]
    pub phase_match: PhaseMatchSpec,
    pub filter: FilterPair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GatePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<WindowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SourceStats>,
    #[serde(default)]
    pub countsim: CountsimSettings,
}

impl ExperimentConfig {
    /// The shipped default: 0.1 GHz / 300 GHz grid, 3.2 GHz comb with a
    /// 74 GHz envelope and 0.5 GHz teeth, 32/58 GHz filters, a 148 ps
    /// Gaussian signal gate and a 300 ps rectangular idler gate.
    pub fn reference() -> Self {
        parse_config_str(REFERENCE, Path::new("<reference>"), false).expect("shipped config is valid")
    }

    /// As [`Self::reference`] on a 0.2 GHz grid.
    pub fn fast() -> Self {
        parse_config_str(FAST, Path::new("<fast>"), false).expect("shipped config is valid")
    }

    pub fn gates(&self) -> GatePair {
        self.gate.unwrap_or_else(GatePair::identity)
    }

    pub fn source_stats(&self) -> SourceStats {
        self.stats.unwrap_or_else(SourceStats::measured_3p2ghz)
    }

    pub fn windows(&self) -> WindowSpec {
        self.windows.unwrap_or_else(WindowSpec::measured)
    }

    pub fn experiment(&self) -> Result<&ExperimentSpec> {
        self.experiment.as_ref().ok_or_else(|| Error::Invariant {
            section: "ExperimentSpec",
            reason: "the configuration has no [experiment] section".into(),
        })
    }

    /// Checks every section. With `strict`, soft warnings (grid coverage)
    /// become errors.
    pub fn validate(&self, strict: bool) -> Result<()> {
        let grid = self.grid.build().map_err(|e| Error::Invariant {
            section: "FrequencyGrid",
            reason: e.to_string(),
        })?;
        self.pump.validate()?;
        self.phase_match.validate()?;
        self.filter.signal.validate()?;
        self.filter.idler.validate()?;
        if let Some(g) = &self.gate {
            g.signal.validate()?;
            g.idler.validate()?;
        }
        if let Some(e) = &self.experiment {
            e.validate()?;
        }
        if let Some(w) = &self.windows {
            w.validate()?;
        }
        if let Some(s) = &self.stats {
            s.validate()?;
        }
        let cs = &self.countsim;
        if let Some(p) = cs.purity {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invariant {
                    section: "CountsimSettings",
                    reason: format!("purity must lie in [0, 1] (got {p})"),
                });
            }
        }
        if !(cs.histogram_bin_ps > 0.0 && cs.histogram_range_ps > 0.0) {
            return Err(Error::Invariant {
                section: "CountsimSettings",
                reason: "histogram_bin_ps and histogram_range_ps must be > 0".into(),
            });
        }
        if let Err(e) = check_grid_coverage(&grid, &self.filter.signal, &self.filter.idler) {
            if strict {
                return Err(e);
            }
            log::warn!("{e}");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }
}

/// TOML table that holds the settings checked under `section`.
fn table_for(section: &str) -> &'static [&'static str] {
    match section {
        "FrequencyGrid" => &["grid"],
        "PumpCombSpec" => &["pump"],
        "PhaseMatchSpec" => &["phase_match"],
        "SpectralFilterSpec" => &["filter.signal", "filter.idler", "filter"],
        "TemporalGateSpec" => &["gate.signal", "gate.idler", "gate"],
        "ExperimentSpec" => &["experiment"],
        "WindowSpec" => &["windows"],
        "SourceStats" => &["stats"],
        "CountsimSettings" => &["countsim"],
        _ => &[],
    }
}

/// 1-based line of the first `[table]` header among `tables` in `source`.
fn header_line(source: &str, tables: &[&str]) -> Option<usize> {
    tables.iter().find_map(|t| {
        let header = format!("[{t}]");
        source.lines().position(|l| l.trim() == header).map(|i| i + 1)
    })
}

pub fn parse_config_str(source: &str, path: &Path, strict: bool) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(source).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    cfg.validate(strict).map_err(|e| match e {
        Error::Invariant { section, reason } => {
            let at = header_line(source, table_for(section))
                .map(|l| format!("line {l}: "))
                .unwrap_or_default();
            Error::Config {
                path: path.to_path_buf(),
                message: format!("{at}{section}: {reason}"),
            }
        }
        other => other,
    })?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>, strict: bool) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|e| Error::io(PathBuf::from(path), e))?;
    parse_config_str(&source, path, strict)
}
