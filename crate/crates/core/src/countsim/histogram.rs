use serde::{Deserialize, Serialize};

use super::{TimeTagStream, FWHM_PER_SIGMA};
use crate::error::{Error, Result};

/// Counts of `stop − start` differences in bins covering
/// `[−range_ps, −range_ps + bins·bin_ps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_ps: f64,
    pub range_ps: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub center_ps: f64,
    pub fwhm_ps: f64,
    /// Counts inside the fitted window.
    pub counts: u64,
}

fn check_sorted(s: &TimeTagStream) -> Result<()> {
    if let Some(i) = s.tags().windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::UnsortedStream {
            channel: s.channel(),
            index: i + 1,
        });
    }
    Ok(())
}

/// Start-stop histogram of every stop tag within `range_ps` of a start tag.
pub fn coincidence_histogram(
    start: &TimeTagStream,
    stop: &TimeTagStream,
    bin_ps: f64,
    range_ps: f64,
) -> Result<CoincidenceHistogram> {
    if !(bin_ps.is_finite() && bin_ps > 0.0) {
        return Err(Error::invalid("bin_ps", format!("must be > 0 (got {bin_ps})")));
    }
    if !(range_ps.is_finite() && range_ps > 0.0) {
        return Err(Error::invalid("range_ps", format!("must be > 0 (got {range_ps})")));
    }
    check_sorted(start)?;
    check_sorted(stop)?;
    let bins = (2.0 * range_ps / bin_ps).ceil() as usize;
    let mut counts = vec![0u64; bins];
    let stops = stop.tags();
    let mut first = 0;
    for &t in start.tags() {
        let lo = t as f64 - range_ps;
        while first < stops.len() && (stops[first] as f64) < lo {
            first += 1;
        }
        for &s in &stops[first..] {
            let idx = ((s as f64 - lo) / bin_ps).floor() as usize;
            if idx >= bins {
                break;
            }
            counts[idx] += 1;
        }
    }
    Ok(CoincidenceHistogram {
        bin_ps,
        range_ps,
        counts,
    })
}

impl CoincidenceHistogram {
    pub fn bin_center(&self, i: usize) -> f64 {
        -self.range_ps + (i as f64 + 0.5) * self.bin_ps
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Centre of the fullest bin, or `None` for an empty histogram.
    pub fn argmax_center(&self) -> Option<f64> {
        let (i, &c) = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        (c > 0).then(|| self.bin_center(i))
    }

    /// Gaussian fit to the peak near `guess_ps`, using the bins within
    /// `half_window_ps` that hold at least a tenth of the local maximum
    /// (weighted least squares on the log counts).
    pub fn fit_peak(&self, guess_ps: f64, half_window_ps: f64) -> Result<PeakFit> {
        let in_window: Vec<(f64, u64)> = (0..self.counts.len())
            .map(|i| (self.bin_center(i) - guess_ps, self.counts[i]))
            .filter(|(x, _)| x.abs() <= half_window_ps)
            .collect();
        let peak = in_window.iter().map(|p| p.1).max().unwrap_or(0);
        let counts = in_window.iter().map(|p| p.1).sum();
        let floor = (peak as f64 * 0.1).max(1.0);
        // normal equations for ln y = a + b x + c x², weight y
        let mut m = [[0.0f64; 3]; 3];
        let mut v = [0.0f64; 3];
        let mut used = 0;
        let scale = half_window_ps.max(self.bin_ps);
        for &(x, y) in &in_window {
            let yf = y as f64;
            if yf < floor {
                continue;
            }
            used += 1;
            let xs = x / scale;
            let basis = [1.0, xs, xs * xs];
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += yf * basis[r] * basis[c];
                }
                v[r] += yf * basis[r] * yf.ln();
            }
        }
        if used < 3 {
            return Err(Error::UndefinedStatistic(format!(
                "too few populated bins near {guess_ps} ps to fit a peak"
            )));
        }
        let [_, b, c] = solve3(m, v)
            .ok_or_else(|| Error::Numerical("singular peak-fit system".into()))?;
        if c.is_nan() || c >= 0.0 {
            return Err(Error::Numerical(format!("no peak curvature near {guess_ps} ps")));
        }
        let sigma = (-1.0 / (2.0 * c)).sqrt() * scale;
        let center = guess_ps - b / (2.0 * c) * scale;
        Ok(PeakFit {
            center_ps: center,
            fwhm_ps: FWHM_PER_SIGMA * sigma,
            counts,
        })
    }

    /// Fits every peak of a train with spacing close to `period_ps`, starting
    /// from the fullest bin. Peaks whose fit window leaves the histogram, or
    /// that cannot be fitted, are skipped. Returns `(index, fit)` pairs.
    pub fn fit_peak_train(&self, period_ps: f64) -> Result<Vec<(i64, PeakFit)>> {
        let anchor = self
            .argmax_center()
            .ok_or_else(|| Error::UndefinedStatistic("empty histogram".into()))?;
        let half = period_ps / 2.0;
        let lo = -self.range_ps;
        let hi = -self.range_ps + self.counts.len() as f64 * self.bin_ps;
        let first = ((lo + half - anchor) / period_ps).ceil() as i64;
        let last = ((hi - half - anchor) / period_ps).floor() as i64;
        Ok((first..=last)
            .filter_map(|k| {
                let guess = anchor + k as f64 * period_ps;
                self.fit_peak(guess, half).ok().map(|f| (k, f))
            })
            .collect())
    }

    /// Least-squares spacing of the fitted peak centres.
    pub fn peak_spacing(&self, period_guess_ps: f64) -> Result<f64> {
        let fits = self.fit_peak_train(period_guess_ps)?;
        if fits.len() < 2 {
            return Err(Error::UndefinedStatistic("fewer than two peaks fitted".into()));
        }
        let n = fits.len() as f64;
        let mk = fits.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
        let mc = fits.iter().map(|(_, f)| f.center_ps).sum::<f64>() / n;
        let sxy: f64 = fits.iter().map(|(k, f)| (*k as f64 - mk) * (f.center_ps - mc)).sum();
        let sxx: f64 = fits.iter().map(|(k, _)| (*k as f64 - mk).powi(2)).sum();
        Ok(sxy / sxx)
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            let pivot_row = m[col];
            for (x, p) in m[r].iter_mut().zip(pivot_row).skip(col) {
                *x -= f * p;
            }
            v[r] -= f * v[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let tail: f64 = (r + 1..3).map(|c| m[r][c] * x[c]).sum();
        x[r] = (v[r] - tail) / m[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(ch: u8, tags: &[i64]) -> TimeTagStream {
        TimeTagStream::new(ch, tags.to_vec()).unwrap()
    }

    #[test]
    fn counts_differences_in_range() {
        let a = stream(1, &[100, 1000]);
        let b = stream(2, &[90, 100, 150, 1020, 5000]);
        let h = coincidence_histogram(&a, &b, 10.0, 100.0).unwrap();
        assert_eq!(h.counts.len(), 20);
        // differences within ±100: -10, 0, 50 (from 100), 20 (from 1000)
        assert_eq!(h.total(), 4);
        let at = |d: f64| h.counts[((d + 100.0) / 10.0) as usize];
        assert_eq!(at(-10.0), 1);
        assert_eq!(at(0.0), 1);
        assert_eq!(at(20.0), 1);
        assert_eq!(at(50.0), 1);
    }

    #[test]
    fn empty_stop_gives_zero_histogram() {
        let h = coincidence_histogram(&stream(1, &[1, 2, 3]), &stream(2, &[]), 4.0, 40.0).unwrap();
        assert!(h.counts.iter().all(|&c| c == 0));
        assert_eq!(h.argmax_center(), None);
    }

    #[test]
    fn rejects_unsorted_and_bad_bins() {
        assert!(matches!(
            TimeTagStream::new(3, vec![5, 4]),
            Err(Error::UnsortedStream { channel: 3, index: 1 })
        ));
        let s = stream(1, &[1]);
        assert!(coincidence_histogram(&s, &s, 0.0, 10.0).is_err());
        assert!(coincidence_histogram(&s, &s, 1.0, -1.0).is_err());
    }

    #[test]
    fn fits_a_gaussian_peak() {
        let sigma = 40.0;
        let counts: Vec<u64> = (0..100)
            .map(|i| {
                let x = -500.0 + (i as f64 + 0.5) * 10.0 - 23.0;
                (1e4 * (-x * x / (2.0 * sigma * sigma)).exp()).round() as u64
            })
            .collect();
        let h = CoincidenceHistogram {
            bin_ps: 10.0,
            range_ps: 500.0,
            counts,
        };
        let f = h.fit_peak(h.argmax_center().unwrap(), 200.0).unwrap();
        assert!((f.center_ps - 23.0).abs() < 0.5, "{f:?}");
        assert!((f.fwhm_ps / (FWHM_PER_SIGMA * sigma) - 1.0).abs() < 0.01, "{f:?}");
    }

    #[test]
    fn solves_linear_system() {
        let x = solve3([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]], [3.0, 5.0, 5.0]).unwrap();
        for (a, b) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
