//! Browser bindings for the interactive demo in `www/`.
//!
//! Everything runs on a coarse 0.5 GHz / 180 GHz grid (361 points) so a
//! slider move recomputes in well under a second.

use combhom::grid::{make_grid, FrequencyGrid};
use combhom::jsa::{apply_temporal_gates, build_jsa, PhaseMatchSpec, PumpCombSpec, SpectralFilterSpec, TemporalGateSpec};
use combhom::schmidt::purity_gram;
use combhom::visibility::SourceStats;
use wasm_bindgen::prelude::*;

const RESOLUTION_GHZ: f64 = 0.5;
const SPAN_GHZ: f64 = 180.0;
const ENVELOPE_FWHM_GHZ: f64 = 74.0;
const SIGNAL_FILTER_GHZ: f64 = 32.0;
const IDLER_FILTER_GHZ: f64 = 58.0;

/// |JSA| on the demo grid plus its purity.
#[wasm_bindgen]
pub struct JsaView {
    points: usize,
    purity: f64,
    survival: f64,
    magnitude: Vec<f32>,
}

#[wasm_bindgen]
impl JsaView {
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> usize {
        self.points
    }

    #[wasm_bindgen(getter)]
    pub fn purity(&self) -> f64 {
        self.purity
    }

    #[wasm_bindgen(getter)]
    pub fn survival(&self) -> f64 {
        self.survival
    }

    /// Row-major |JSA| scaled to a maximum of 1; rows are signal detuning.
    pub fn magnitude(&self) -> Vec<f32> {
        self.magnitude.clone()
    }
}

fn to_js(e: combhom::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn demo_grid() -> FrequencyGrid {
    make_grid(RESOLUTION_GHZ, SPAN_GHZ).expect("demo grid is valid")
}

fn gated_state(
    grid: &FrequencyGrid,
    rep_rate_ghz: f64,
    tooth_sigma_ghz: f64,
    gates: Option<(f64, f64)>,
) -> combhom::Result<(combhom::grid::ComplexMatrix, f64)> {
    let pump = PumpCombSpec::new(rep_rate_ghz, ENVELOPE_FWHM_GHZ, tooth_sigma_ghz)?;
    let jsa = build_jsa(
        grid,
        &pump,
        &PhaseMatchSpec::Identity,
        &SpectralFilterSpec::gaussian(SIGNAL_FILTER_GHZ),
        &SpectralFilterSpec::gaussian(IDLER_FILTER_GHZ),
    )?;
    match gates {
        None => Ok((jsa, 1.0)),
        Some((signal_ps, idler_ps)) => {
            let g = apply_temporal_gates(
                &jsa,
                grid,
                &TemporalGateSpec::gaussian(signal_ps),
                &TemporalGateSpec::rectangular(idler_ps),
            )?;
            Ok((g.jsa, g.survival))
        }
    }
}

fn jsa_view_inner(
    rep_rate_ghz: f64,
    tooth_sigma_ghz: f64,
    gate_signal_ps: f64,
    gate_idler_ps: f64,
    gated: bool,
) -> combhom::Result<JsaView> {
    let grid = demo_grid();
    let gates = gated.then_some((gate_signal_ps, gate_idler_ps));
    let (jsa, survival) = gated_state(&grid, rep_rate_ghz, tooth_sigma_ghz, gates)?;
    let top = jsa.max_abs();
    Ok(JsaView {
        points: grid.points(),
        purity: purity_gram(&jsa)?,
        survival,
        magnitude: jsa.data().iter().map(|z| (z.norm() / top) as f32).collect(),
    })
}

fn purity_vs_gate_width_inner(rep_rate_ghz: f64, tooth_sigma_ghz: f64, widths_ps: &[f64]) -> combhom::Result<Vec<f64>> {
    let grid = demo_grid();
    widths_ps
        .iter()
        .map(|&w| {
            let (jsa, _) = gated_state(&grid, rep_rate_ghz, tooth_sigma_ghz, Some((w, w)))?;
            purity_gram(&jsa)
        })
        .collect()
}

/// JSA magnitude map and purity. The signal gate is Gaussian, the idler gate
/// rectangular, both centred on zero delay.
#[wasm_bindgen]
pub fn jsa_view(
    rep_rate_ghz: f64,
    tooth_sigma_ghz: f64,
    gate_signal_ps: f64,
    gate_idler_ps: f64,
    gated: bool,
) -> Result<JsaView, JsError> {
    jsa_view_inner(rep_rate_ghz, tooth_sigma_ghz, gate_signal_ps, gate_idler_ps, gated).map_err(to_js)
}

/// Gated purity with both gates set to each width in turn.
#[wasm_bindgen]
pub fn purity_vs_gate_width(rep_rate_ghz: f64, tooth_sigma_ghz: f64, widths_ps: Vec<f64>) -> Result<Vec<f64>, JsError> {
    purity_vs_gate_width_inner(rep_rate_ghz, tooth_sigma_ghz, &widths_ps).map_err(to_js)
}

/// Predicted HOM visibility between two heralded sources.
#[wasm_bindgen]
pub fn hom_visibility(purity: f64, zeta: f64, g1: f64, g2: f64) -> Result<f64, JsError> {
    combhom::visibility::hom_visibility(purity, &SourceStats::from_zeta(zeta, g1, g2)).map_err(to_js)
}
