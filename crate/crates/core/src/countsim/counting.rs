use serde::{Deserialize, Serialize};

use super::{coincidence_histogram, Streams};
use crate::error::{Error, Result};
use crate::visibility::CountRecord;

/// Acceptance window of one stop channel: tags in
/// `[t + peak + offset − width/2, t + peak + offset + width/2)` are accepted
/// for a start tag at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelWindow {
    pub width_ps: f64,
    #[serde(default)]
    pub offset_ps: f64,
}

impl ChannelWindow {
    pub fn new(width_ps: f64) -> Self {
        Self {
            width_ps,
            offset_ps: 0.0,
        }
    }
}

/// What counts as a heralding event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Herald {
    /// Clicks of channel 1; g⁽²⁾ of source 1.
    #[default]
    D1,
    /// Clicks of channel 2; g⁽²⁾ of source 2.
    D2,
    /// Channel 1 with a channel-2 click inside its window: the twofold herald
    /// of the HOM measurement, whose `triple` is the fourfold coincidence.
    D1AndD2,
}

/// Coincidence-peak positions of channels 2-4 relative to channel 1.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakOffsets {
    pub d2_ps: f64,
    pub d3_ps: f64,
    pub d4_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub d2: ChannelWindow,
    pub d3: ChannelWindow,
    pub d4: ChannelWindow,
    #[serde(default)]
    pub herald: Herald,
    /// Fixed peak positions; detected from the data when absent.
    #[serde(default)]
    pub peaks: Option<PeakOffsets>,
}

impl WindowSpec {
    pub fn new(d2_ps: f64, d3_ps: f64, d4_ps: f64) -> Self {
        Self {
            d2: ChannelWindow::new(d2_ps),
            d3: ChannelWindow::new(d3_ps),
            d4: ChannelWindow::new(d4_ps),
            herald: Herald::D1,
            peaks: None,
        }
    }

    /// 100 ps on the second herald, 300 ps on both signal detectors.
    pub fn measured() -> Self {
        Self::new(100.0, 300.0, 300.0)
    }

    pub fn with_herald(mut self, herald: Herald) -> Self {
        self.herald = herald;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("d2", self.d2), ("d3", self.d3), ("d4", self.d4)] {
            if !(w.width_ps.is_finite() && w.width_ps >= 0.0) {
                return Err(Error::Invariant {
                    section: "WindowSpec",
                    reason: format!("{name} width_ps must be >= 0 (got {})", w.width_ps),
                });
            }
            if !w.offset_ps.is_finite() {
                return Err(Error::Invariant {
                    section: "WindowSpec",
                    reason: format!("{name} offset_ps must be finite"),
                });
            }
        }
        Ok(())
    }
}

const ALIGN_BIN_PS: f64 = 2.0;

fn peak_position(streams: &Streams, start: usize, stop: usize, half_period: f64) -> Result<Option<f64>> {
    let h = coincidence_histogram(&streams[start], &streams[stop], ALIGN_BIN_PS, half_period)?;
    let Some(guess) = h.argmax_center() else {
        return Ok(None);
    };
    Ok(Some(h.fit_peak(guess, half_period).map_or(guess, |f| f.center_ps)))
}

/// Locates the true-coincidence peaks: channels 3 and 4 against channel 1,
/// and channel 2 through its own pair partner on channel 4. Only offsets
/// within half a pulse period are considered; an empty histogram leaves the
/// offset at zero.
pub fn align_windows(streams: &Streams, rep_rate_ghz: f64) -> Result<PeakOffsets> {
    if !(rep_rate_ghz.is_finite() && rep_rate_ghz > 0.0) {
        return Err(Error::invalid("rep_rate_ghz", "must be > 0"));
    }
    let half = 0.5e3 / rep_rate_ghz;
    let d3 = peak_position(streams, 0, 2, half)?;
    let d4 = peak_position(streams, 0, 3, half)?;
    let d24 = peak_position(streams, 1, 3, half)?;
    if d3.is_none() || d4.is_none() {
        log::warn!("no coincidences to align the signal windows on; using zero offsets");
    }
    let d4 = d4.unwrap_or(0.0);
    Ok(PeakOffsets {
        d2_ps: d24.map_or(0.0, |d| d4 - d),
        d3_ps: d3.unwrap_or(0.0),
        d4_ps: d4,
    })
}

struct Cursor<'a> {
    tags: &'a [i64],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(tags: &'a [i64]) -> Self {
        Self { tags, pos: 0 }
    }

    /// Whether a tag falls in `[lo, hi)`. `lo` must not decrease between
    /// calls.
    fn hit(&mut self, lo: f64, hi: f64) -> bool {
        while self.pos < self.tags.len() && (self.tags[self.pos] as f64) < lo {
            self.pos += 1;
        }
        self.pos < self.tags.len() && (self.tags[self.pos] as f64) < hi
    }
}

fn bounds(t: i64, peak: f64, w: &ChannelWindow) -> (f64, f64) {
    let c = t as f64 + peak + w.offset_ps;
    (c - w.width_ps / 2.0, c + w.width_ps / 2.0)
}

/// Heralded coincidence counts with per-channel windows. Peak positions come
/// from `windows.peaks` or, if absent, from [`align_windows`].
pub fn apply_windows_and_count(streams: &Streams, windows: &WindowSpec, rep_rate_ghz: f64) -> Result<CountRecord> {
    windows.validate()?;
    let peaks = match windows.peaks {
        Some(p) => p,
        None => align_windows(streams, rep_rate_ghz)?,
    };
    let (start, shift) = match windows.herald {
        Herald::D1 | Herald::D1AndD2 => (0, 0.0),
        Herald::D2 => (1, peaks.d2_ps),
    };
    let mut c2 = Cursor::new(streams[1].tags());
    let mut c3 = Cursor::new(streams[2].tags());
    let mut c4 = Cursor::new(streams[3].tags());
    let mut r = CountRecord::default();
    for &t in streams[start].tags() {
        if windows.herald == Herald::D1AndD2 {
            let (lo, hi) = bounds(t, peaks.d2_ps, &windows.d2);
            if !c2.hit(lo, hi) {
                continue;
            }
        }
        r.heralds += 1;
        let (lo, hi) = bounds(t, peaks.d3_ps - shift, &windows.d3);
        let hit3 = c3.hit(lo, hi);
        let (lo, hi) = bounds(t, peaks.d4_ps - shift, &windows.d4);
        let hit4 = c4.hit(lo, hi);
        r.double_3 += hit3 as u64;
        r.double_4 += hit4 as u64;
        r.triple += (hit3 && hit4) as u64;
    }
    Ok(r)
}
