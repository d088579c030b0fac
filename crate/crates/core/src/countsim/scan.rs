use serde::{Deserialize, Serialize};

use super::{align_windows, apply_windows_and_count, simulate_timetags, ExperimentSpec, Herald, PeakOffsets, WindowSpec};
use crate::error::{Error, Result};
use crate::visibility::CountRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delay_ps: f64,
    pub indistinguishability: f64,
    /// Twofold (D1∧D2) heralds.
    pub twofold: u64,
    /// Fourfold coincidences.
    pub fourfold: u64,
    pub record: CountRecord,
}

impl ScanPoint {
    pub fn fourfold_per_herald(&self) -> f64 {
        if self.twofold == 0 {
            0.0
        } else {
            self.fourfold as f64 / self.twofold as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomScan {
    pub points: Vec<ScanPoint>,
    pub offsets: PeakOffsets,
    /// `1 − r(0)/r(∞)`, `r` being fourfold counts per twofold herald.
    pub visibility: f64,
    pub visibility_stderr: f64,
}

/// HOM delay scan. At zero delay the photons interfere with
/// `indistinguishability = purity`, elsewhere not at all, unless
/// `indistinguishability` supplies a value per delay. Cell `i` uses seed
/// `spec.seed ^ i`. The windows stay fixed during the scan: peak positions
/// are found once, on the zero-delay cell.
pub fn simulate_hom_scan(
    spec: &ExperimentSpec,
    purity: f64,
    delays_ps: &[f64],
    windows: &WindowSpec,
    indistinguishability: Option<&[f64]>,
) -> Result<HomScan> {
    spec.validate()?;
    windows.validate()?;
    if !(0.0..=1.0).contains(&purity) {
        return Err(Error::invalid("purity", format!("must lie in [0, 1] (got {purity})")));
    }
    if delays_ps.len() < 2 {
        return Err(Error::invalid("delays_ps", "a scan needs at least two delays"));
    }
    if let Some(d) = delays_ps.iter().find(|d| !d.is_finite()) {
        return Err(Error::invalid("delays_ps", format!("must be finite (got {d})")));
    }
    let ind: Vec<f64> = match indistinguishability {
        Some(v) if v.len() != delays_ps.len() => {
            return Err(Error::Shape {
                expected: format!("{} indistinguishability values", delays_ps.len()),
                actual: v.len().to_string(),
            })
        }
        Some(v) => v.to_vec(),
        None => delays_ps.iter().map(|&d| if d == 0.0 { purity } else { 0.0 }).collect(),
    };
    let zero = delays_ps
        .iter()
        .position(|&d| d == 0.0)
        .ok_or_else(|| Error::invalid("delays_ps", "the scan must include zero delay"))?;
    if !delays_ps.iter().zip(&ind).any(|(&d, &p)| d != 0.0 && p == 0.0) {
        return Err(Error::invalid(
            "delays_ps",
            "the scan needs a nonzero delay without interference as reference",
        ));
    }

    let cell = |i: usize| {
        let mut s = spec.clone();
        s.seed = spec.seed ^ i as u64;
        simulate_timetags(&s, ind[i], delays_ps[i])
    };
    let zero_streams = cell(zero)?;
    let offsets = match windows.peaks {
        Some(p) => p,
        None => align_windows(&zero_streams, spec.rep_rate_ghz)?,
    };
    let fixed = WindowSpec {
        herald: Herald::D1AndD2,
        peaks: Some(offsets),
        ..*windows
    };
    let zero_record = apply_windows_and_count(&zero_streams, &fixed, spec.rep_rate_ghz)?;
    drop(zero_streams);

    let run = |i: usize| -> Result<CountRecord> {
        if i == zero {
            return Ok(zero_record);
        }
        apply_windows_and_count(&cell(i)?, &fixed, spec.rep_rate_ghz)
    };
    let indices: Vec<usize> = (0..delays_ps.len()).collect();
    #[cfg(feature = "parallel")]
    let records: Vec<Result<CountRecord>> = {
        use rayon::prelude::*;
        indices.par_iter().map(|&i| run(i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<Result<CountRecord>> = indices.iter().map(|&i| run(i)).collect();

    let mut points = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        let record = r?;
        points.push(ScanPoint {
            delay_ps: delays_ps[i],
            indistinguishability: ind[i],
            twofold: record.heralds,
            fourfold: record.triple,
            record,
        });
    }

    let pool = |pick: &dyn Fn(&ScanPoint) -> bool| {
        points
            .iter()
            .filter(|p| pick(p))
            .fold((0u64, 0u64), |(t, f), p| (t + p.twofold, f + p.fourfold))
    };
    let (t0, f0) = pool(&|p| p.delay_ps == 0.0);
    let (ti, fi) = pool(&|p| p.delay_ps != 0.0 && p.indistinguishability == 0.0);
    if fi == 0 || t0 == 0 {
        return Err(Error::UndefinedStatistic(
            "no fourfold coincidences at the reference delay".into(),
        ));
    }
    let r0 = f0 as f64 / t0 as f64;
    let ri = fi as f64 / ti as f64;
    let ratio = r0 / ri;
    // fourfolds are a binomial subset of the twofold heralds
    let rel0 = if f0 == 0 { 1.0 } else { (1.0 - r0) / f0 as f64 };
    let stderr = ratio.max(1.0 / (t0 as f64 * ri)) * (rel0 + (1.0 - ri) / fi as f64).sqrt();
    Ok(HomScan {
        points,
        offsets,
        visibility: 1.0 - ratio,
        visibility_stderr: stderr,
    })
}
