//! Commands behind the `combhom` binary, usable as a library.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::countsim::{
    apply_windows_and_count, coincidence_histogram, heralded_source_stats, simulate_hom_scan,
    simulate_timetags, CoincidenceHistogram, HomScan, Herald,
};
use crate::error::{Error, Result};
use crate::grid::{ComplexMatrix, FrequencyGrid};
use crate::io;
use crate::jsa::{apply_temporal_gates, build_jsa, build_jsa_strict, jta, GatedJsa};
use crate::schmidt::{purity_gram, schmidt_decompose, SchmidtSpectrum};
use crate::visibility::{g2_from_counts, hom_visibility, CountRecord};

pub struct JsaRun {
    pub grid: FrequencyGrid,
    pub jsa: ComplexMatrix,
    pub gated: Option<GatedJsa>,
}

impl JsaRun {
    /// The matrix the purity refers to: gated if gates were applied.
    pub fn effective(&self) -> &ComplexMatrix {
        self.gated.as_ref().map_or(&self.jsa, |g| &g.jsa)
    }
}

pub fn compute_jsa(cfg: &ExperimentConfig, gates: bool, strict: bool) -> Result<JsaRun> {
    let grid = cfg.grid.build()?;
    let build = if strict { build_jsa_strict } else { build_jsa };
    let jsa = build(&grid, &cfg.pump, &cfg.phase_match, &cfg.filter.signal, &cfg.filter.idler)?;
    let gated = if gates {
        if cfg.gate.is_none() {
            log::warn!("gates requested but the configuration defines none");
        }
        let g = cfg.gates();
        Some(apply_temporal_gates(&jsa, &grid, &g.signal, &g.idler)?)
    } else {
        None
    };
    Ok(JsaRun { grid, jsa, gated })
}

#[derive(Debug, Clone, Serialize)]
pub struct PurityReport {
    pub gated: bool,
    pub purity: f64,
    pub schmidt_number: f64,
    /// Norm fraction kept by the gates (1 without gates).
    pub survival: f64,
    /// Visibility predicted from this purity and the configured source
    /// statistics.
    pub v_th: f64,
    pub grid_points: usize,
    pub resolution_ghz: f64,
    pub span_ghz: f64,
    pub teeth_in_envelope: usize,
}

pub fn run_purity(cfg: &ExperimentConfig, gates: bool, strict: bool) -> Result<(PurityReport, JsaRun)> {
    let run = compute_jsa(cfg, gates, strict)?;
    let purity = purity_gram(run.effective())?;
    let report = PurityReport {
        gated: run.gated.is_some(),
        purity,
        schmidt_number: 1.0 / purity,
        survival: run.gated.as_ref().map_or(1.0, |g| g.survival),
        v_th: hom_visibility(purity.min(1.0), &cfg.source_stats())?,
        grid_points: run.grid.points(),
        resolution_ghz: run.grid.resolution(),
        span_ghz: run.grid.span(),
        teeth_in_envelope: cfg.pump.teeth_within_envelope_fwhm(),
    };
    Ok((report, run))
}

/// Full Schmidt spectrum of the run's effective JSA (SVD path).
pub fn schmidt_spectrum(run: &JsaRun) -> Result<SchmidtSpectrum> {
    schmidt_decompose(run.effective(), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    RepRate,
    GateWidth,
    SigmaP,
}

impl SweepAxis {
    pub const NAMES: [&'static str; 3] = ["rep_rate", "gate_width", "sigma_p"];

    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::RepRate => "rep_rate_ghz",
            SweepAxis::GateWidth => "gate_width_ps",
            SweepAxis::SigmaP => "sigma_p_ghz",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rep_rate" => Ok(SweepAxis::RepRate),
            "gate_width" => Ok(SweepAxis::GateWidth),
            "sigma_p" => Ok(SweepAxis::SigmaP),
            other => Err(Error::invalid(
                "axis",
                format!("unknown sweep axis `{other}`; expected one of {}", SweepAxis::NAMES.join(", ")),
            )),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = *self as usize;
        f.write_str(SweepAxis::NAMES[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub purity: f64,
    pub v_th: f64,
}

/// Configuration with one sweep parameter replaced. `gate_width` sets the
/// width of both gates.
pub fn with_axis_value(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::RepRate => c.pump.rep_rate_ghz = value,
        SweepAxis::SigmaP => c.pump.tooth_sigma_ghz = value,
        SweepAxis::GateWidth => {
            let mut g = c.gate.ok_or_else(|| {
                Error::invalid("axis", "a gate_width sweep needs a [gate] section")
            })?;
            g.signal.width_ps = value;
            g.idler.width_ps = value;
            c.gate = Some(g);
        }
    }
    c.validate(false)?;
    Ok(c)
}

/// One row per value, in input order. Points are evaluated one after the
/// other so that only one full-size JSA is alive at a time; each point is
/// internally parallel.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    gates: bool,
    strict: bool,
) -> Result<Vec<SweepRow>> {
    if values.len() < 2 {
        return Err(Error::invalid("values", "a sweep needs at least two values"));
    }
    if axis == SweepAxis::GateWidth && !gates {
        return Err(Error::invalid("axis", "a gate_width sweep needs --gates on"));
    }
    values
        .iter()
        .map(|&v| {
            let c = with_axis_value(cfg, axis, v)?;
            let (report, _) = run_purity(&c, gates, strict)?;
            Ok(SweepRow {
                parameter: v,
                purity: report.purity,
                v_th: report.v_th,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: impl AsRef<Path>, axis: SweepAxis, rows: &[SweepRow]) -> Result<()> {
    io::write_csv(
        path,
        &[axis.column(), "purity", "v_th"],
        rows.iter().map(|r| [r.parameter, r.purity, r.v_th]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountsimCommand {
    Histogram,
    G2,
    Homscan,
}

#[derive(Debug, Clone, Serialize)]
pub struct G2Report {
    /// False when a detector saw no coincidences; `value` is then 0.
    pub defined: bool,
    pub value: f64,
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
    pub counts: CountRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomScanReport {
    pub purity: f64,
    /// Analytic visibility for the simulated sources.
    pub v_th: f64,
    #[serde(flatten)]
    pub scan: HomScan,
}

#[derive(Debug, Clone)]
pub enum CountsimOutput {
    /// D1×D2 start-stop histogram and the fitted peak spacing.
    Histogram {
        histogram: CoincidenceHistogram,
        spacing_ps: Option<f64>,
    },
    G2(G2Report),
    Homscan(HomScanReport),
}

pub fn run_countsim(
    cfg: &ExperimentConfig,
    command: CountsimCommand,
    seed: Option<u64>,
    strict: bool,
) -> Result<CountsimOutput> {
    let mut spec = cfg.experiment()?.clone();
    if let Some(s) = seed {
        spec.seed = s;
    }
    let cs = &cfg.countsim;
    match command {
        CountsimCommand::Histogram => {
            let streams = simulate_timetags(&spec, 0.0, 0.0)?;
            let histogram = coincidence_histogram(&streams[0], &streams[1], cs.histogram_bin_ps, cs.histogram_range_ps)?;
            let spacing_ps = histogram.peak_spacing(spec.pulse_period_ps()).ok();
            Ok(CountsimOutput::Histogram {
                histogram,
                spacing_ps,
            })
        }
        CountsimCommand::G2 => {
            let streams = simulate_timetags(&spec, 0.0, 0.0)?;
            let windows = cfg.windows().with_herald(Herald::D1);
            let counts = apply_windows_and_count(&streams, &windows, spec.rep_rate_ghz)?;
            let report = match g2_from_counts(&counts) {
                Ok(g) => G2Report {
                    defined: true,
                    value: g.value,
                    stderr: g.stderr,
                    upper_bound: g.upper_bound,
                    counts,
                },
                Err(Error::UndefinedStatistic(msg)) => {
                    log::warn!("{msg}; reporting g2 = 0");
                    G2Report {
                        defined: false,
                        value: 0.0,
                        stderr: 0.0,
                        upper_bound: None,
                        counts,
                    }
                }
                Err(e) => return Err(e),
            };
            Ok(CountsimOutput::G2(report))
        }
        CountsimCommand::Homscan => {
            let purity = match cs.purity {
                Some(p) => p,
                None => run_purity(cfg, true, strict)?.0.purity.min(1.0),
            };
            let scan = simulate_hom_scan(&spec, purity, &cs.delays_ps, &cfg.windows(), None)?;
            let v_th = hom_visibility(purity, &heralded_source_stats(&spec)?)?;
            Ok(CountsimOutput::Homscan(HomScanReport { purity, v_th, scan }))
        }
    }
}

impl CountsimOutput {
    /// The command's tabular result: histogram or scan CSV (none for g2).
    pub fn csv(&self) -> Option<Vec<u8>> {
        let bytes = match self {
            CountsimOutput::Histogram { histogram, .. } => io::csv_bytes(
                &["bin_center_ps", "counts"],
                histogram
                    .counts
                    .iter()
                    .enumerate()
                    .map(|(i, c)| [histogram.bin_center(i).to_string(), c.to_string()]),
            ),
            CountsimOutput::G2(_) => return None,
            CountsimOutput::Homscan(r) => io::csv_bytes(
                &["delay_ps", "indistinguishability", "twofold", "fourfold", "visibility", "visibility_stderr"],
                r.scan.points.iter().map(|p| {
                    [
                        p.delay_ps.to_string(),
                        p.indistinguishability.to_string(),
                        p.twofold.to_string(),
                        p.fourfold.to_string(),
                        r.scan.visibility.to_string(),
                        r.scan.visibility_stderr.to_string(),
                    ]
                }),
            ),
        };
        Some(bytes.expect("writing CSV to memory cannot fail"))
    }

    /// Writes the command's artifacts into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if let Some(bytes) = self.csv() {
            let name = match self {
                CountsimOutput::Histogram { .. } => "histogram.csv",
                _ => "homscan.csv",
            };
            let p = dir.join(name);
            io::write_atomic(&p, &bytes)?;
            written.push(p);
        }
        match self {
            CountsimOutput::G2(r) => {
                let p = dir.join("g2.json");
                io::write_json(&p, r)?;
                written.push(p);
            }
            CountsimOutput::Homscan(r) => {
                let p = dir.join("homscan.json");
                io::write_json(&p, r)?;
                written.push(p);
            }
            CountsimOutput::Histogram { .. } => {}
        }
        Ok(written)
    }
}

/// Writes the ungated JSA, the gated JSA (when gates are on) and the joint
/// temporal amplitude of the effective JSA in `JSA1` format.
pub fn export_matrices(run: &JsaRun, dir: &Path) -> Result<Vec<PathBuf>> {
    let g = &run.grid;
    let mut written = Vec::new();
    let p = dir.join("jsa.jsa1");
    io::write_matrix(&p, &run.jsa, g.resolution(), g.span())?;
    written.push(p);
    if let Some(gated) = &run.gated {
        let p = dir.join("jsa_gated.jsa1");
        io::write_matrix(&p, &gated.jsa, g.resolution(), g.span())?;
        written.push(p);
    }
    let (t, tg) = jta(run.effective(), g)?;
    let p = dir.join("jta.jsa1");
    io::write_matrix(&p, &t, tg.resolution(), tg.span())?;
    written.push(p);
    Ok(written)
}
