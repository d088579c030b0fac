//! Uniform detuning grids, the dense complex matrix container, and the
//! centred unitary 2D Fourier transform linking joint spectra to joint
//! temporal amplitudes.
//!
//! Frequencies are ordinary frequencies in GHz, times are in ps. The forward
//! transform uses the kernel `exp(-2πi ν t)` with zero detuning / zero time at
//! the centre index of each axis, scaled by `1/√n` per axis so that the
//! discrete L2 norm is preserved.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on `span / resolution`; a 20000-step grid is already a
/// 6.4 GB complex matrix.
pub const DEFAULT_MAX_STEPS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    resolution_ghz: f64,
    span_ghz: f64,
    points: usize,
}

/// Build a symmetric grid of odd size whose centre sample is exactly zero
/// detuning.
///
/// When `span / resolution` rounds to an odd number of steps the span is
/// widened by one step so that zero stays on-grid.
pub fn make_grid(resolution_ghz: f64, span_ghz: f64) -> Result<FrequencyGrid> {
    FrequencyGrid::with_limit(resolution_ghz, span_ghz, DEFAULT_MAX_STEPS)
}

impl FrequencyGrid {
    pub fn new(resolution_ghz: f64, span_ghz: f64) -> Result<Self> {
        make_grid(resolution_ghz, span_ghz)
    }

    pub fn with_limit(resolution_ghz: f64, span_ghz: f64, max_steps: usize) -> Result<Self> {
        if !(resolution_ghz.is_finite() && resolution_ghz > 0.0) {
            return Err(Error::invalid("resolution_ghz", "must be a positive finite number"));
        }
        if !(span_ghz.is_finite() && span_ghz > 0.0) {
            return Err(Error::invalid("span_ghz", "must be a positive finite number"));
        }
        if span_ghz < 2.0 * resolution_ghz * (1.0 - 1e-12) {
            return Err(Error::invalid(
                "span_ghz",
                format!("must be at least twice the resolution ({resolution_ghz} GHz)"),
            ));
        }
        let ratio = span_ghz / resolution_ghz;
        if ratio > max_steps as f64 + 0.5 {
            return Err(Error::Capacity {
                requested: ratio.round() as usize,
                limit: max_steps,
            });
        }
        let mut steps = ratio.round() as usize;
        if steps % 2 == 1 {
            steps += 1;
        }
        if steps > max_steps {
            return Err(Error::Capacity {
                requested: steps,
                limit: max_steps,
            });
        }
        Ok(Self {
            resolution_ghz,
            span_ghz: steps as f64 * resolution_ghz,
            points: steps + 1,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution_ghz
    }

    pub fn span(&self) -> f64 {
        self.span_ghz
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Index of zero detuning.
    pub fn center(&self) -> usize {
        self.points / 2
    }

    pub fn detuning(&self, index: usize) -> f64 {
        (index as f64 - self.center() as f64) * self.resolution_ghz
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.detuning(k)).collect()
    }

    /// Conjugate time grid of the centred DFT: `Δt = 1 / (n Δν)`.
    pub fn time_grid(&self) -> TimeGrid {
        let span_ps = 1e3 / self.resolution_ghz;
        TimeGrid {
            resolution_ps: span_ps / self.points as f64,
            span_ps,
            points: self.points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    resolution_ps: f64,
    span_ps: f64,
    points: usize,
}

impl TimeGrid {
    pub fn resolution(&self) -> f64 {
        self.resolution_ps
    }

    pub fn span(&self) -> f64 {
        self.span_ps
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn center(&self) -> usize {
        self.points / 2
    }

    pub fn time(&self, index: usize) -> f64 {
        (index as f64 - self.center() as f64) * self.resolution_ps
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.time(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Frequency,
    Time,
}

impl Domain {
    pub fn tag(self) -> u8 {
        match self {
            Domain::Frequency => 0,
            Domain::Time => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Domain::Frequency),
            1 => Some(Domain::Time),
            _ => None,
        }
    }
}

/// Dense row-major complex matrix. Rows index the signal axis, columns the
/// idler axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    domain: Domain,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: format!("{rows}x{cols} = {} values", rows * cols),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numerical(format!(
                "non-finite entry at ({}, {})",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            domain,
        })
    }

    pub fn zeros(rows: usize, cols: usize, domain: Domain) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
            domain,
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        domain: Domain,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            data,
            domain,
        }
    }

    /// Wraps raw data whose finiteness is guaranteed by construction.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<Complex64>, domain: Domain) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            data,
            domain,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self.data[r * self.cols + c]);
            }
        }
        Self::from_parts(self.cols, self.rows, out, self.domain)
    }

    /// `Σ |m_jk|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn check_square_points(&self, points: usize) -> Result<()> {
        if self.rows != points || self.cols != points {
            return Err(Error::Shape {
                expected: format!("{points}x{points}"),
                actual: format!("{}x{}", self.rows, self.cols),
            });
        }
        Ok(())
    }
}

/// Scale `m` so that `Σ|m|² · Δν² = 1` on the frequency grid `g`.
pub fn normalize(m: &ComplexMatrix, g: &FrequencyGrid) -> Result<ComplexMatrix> {
    let norm = m.norm_sqr() * g.resolution() * g.resolution();
    if norm == 0.0 {
        return Err(Error::Degenerate("cannot normalize an all-zero matrix".into()));
    }
    if !norm.is_finite() {
        return Err(Error::Numerical("matrix norm is not finite".into()));
    }
    Ok(m.scaled(Complex64::new(1.0 / norm.sqrt(), 0.0)))
}

/// Forward centred unitary 2D transform, JSA → JTA.
pub fn fft2(m: &ComplexMatrix, g: &FrequencyGrid) -> Result<(ComplexMatrix, TimeGrid)> {
    if m.domain() != Domain::Frequency {
        return Err(Error::Shape {
            expected: "frequency-domain matrix".into(),
            actual: "time-domain matrix".into(),
        });
    }
    m.check_square_points(g.points())?;
    let mut data = m.data.clone();
    transform_2d(&mut data, g.points(), FftDirection::Forward);
    Ok((
        ComplexMatrix::from_parts(m.rows, m.cols, data, Domain::Time),
        g.time_grid(),
    ))
}

/// Inverse of [`fft2`], JTA → JSA.
pub fn ifft2(m: &ComplexMatrix, t: &TimeGrid) -> Result<ComplexMatrix> {
    if m.domain() != Domain::Time {
        return Err(Error::Shape {
            expected: "time-domain matrix".into(),
            actual: "frequency-domain matrix".into(),
        });
    }
    m.check_square_points(t.points())?;
    let mut data = m.data.clone();
    transform_2d(&mut data, t.points(), FftDirection::Inverse);
    Ok(ComplexMatrix::from_parts(m.rows, m.cols, data, Domain::Frequency))
}

/// `γ = π Γ / √ln2`: angular standard-deviation parameter (rad/ns) of a
/// Gaussian amplitude `exp(-ω²/2γ²)` whose power spectrum has FWHM `Γ` GHz.
pub fn fwhm_to_angular_sigma(fwhm_ghz: f64) -> Result<f64> {
    if !(fwhm_ghz.is_finite() && fwhm_ghz > 0.0) {
        return Err(Error::invalid("fwhm_ghz", "must be a positive finite number"));
    }
    Ok(PI * fwhm_ghz / LN_2.sqrt())
}

pub fn angular_sigma_to_fwhm(sigma_rad_per_ns: f64) -> Result<f64> {
    if !(sigma_rad_per_ns.is_finite() && sigma_rad_per_ns > 0.0) {
        return Err(Error::invalid("sigma", "must be a positive finite number"));
    }
    Ok(sigma_rad_per_ns * LN_2.sqrt() / PI)
}

fn transform_2d(data: &mut [Complex64], n: usize, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(n, direction);
    let scale = 1.0 / (n as f64).sqrt();
    let center = n / 2;
    let scratch_len = fft.get_inplace_scratch_len();

    let process_row = |row: &mut [Complex64], buf: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>| {
        // Rotate so the centre sample sits at index 0, transform, rotate back.
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = row[(i + center) % n];
        }
        fft.process_with_scratch(buf, scratch);
        for (i, v) in buf.iter().enumerate() {
            row[(i + center) % n] = v * scale;
        }
    };

    for _ in 0..2 {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            data.par_chunks_mut(n).for_each_init(
                || {
                    (
                        vec![Complex64::new(0.0, 0.0); n],
                        vec![Complex64::new(0.0, 0.0); scratch_len],
                    )
                },
                |(buf, scratch), row| process_row(row, buf, scratch),
            );
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
            for row in data.chunks_mut(n) {
                process_row(row, &mut buf, &mut scratch);
            }
        }
        transpose_square(data, n);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const TILE: usize = 32;
    for bi in (0..n).step_by(TILE) {
        for bj in (bi..n).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + TILE).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(n, n, Domain::Frequency, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn rel_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        let num: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        (num / b.norm_sqr()).sqrt()
    }

    #[test]
    fn reference_grid_has_3001_points() {
        let g = make_grid(0.1, 300.0).unwrap();
        assert_eq!(g.points(), 3001);
        assert_eq!(g.detuning(g.center()), 0.0);
    }

    #[test]
    fn smallest_symmetric_grid() {
        let g = make_grid(1.0, 2.0).unwrap();
        assert_eq!(g.axis(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn half_ghz_grid_centre_index() {
        let g = make_grid(0.5, 300.0).unwrap();
        assert_eq!(g.points(), 601);
        assert_eq!(g.center(), 300);
        assert_eq!(g.detuning(300), 0.0);
    }

    #[test]
    fn odd_step_count_is_widened() {
        let g = make_grid(1.0, 3.0).unwrap();
        assert_eq!(g.points(), 5);
        assert_eq!(g.span(), 4.0);
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(matches!(make_grid(0.0, 10.0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(make_grid(1.0, -1.0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(make_grid(1.0, 1.5), Err(Error::InvalidParameter { .. })));
        match make_grid(0.001, 300.0) {
            Err(Error::Capacity { limit, .. }) => assert_eq!(limit, DEFAULT_MAX_STEPS),
            other => panic!("expected capacity error, got {other:?}"),
        }
        assert!(FrequencyGrid::with_limit(0.1, 300.0, 5000).is_ok());
    }

    #[test]
    fn time_grid_matches_transform_convention() {
        let g = make_grid(0.1, 300.0).unwrap();
        let t = g.time_grid();
        assert_eq!(t.points(), 3001);
        assert!((t.span() - 10_000.0).abs() < 1e-9);
        assert!((t.resolution() * t.points() as f64 - t.span()).abs() <= t.resolution());
        assert!((t.resolution() - 1e3 / 300.0).abs() < 0.01);
    }

    #[test]
    fn normalize_uniform_case() {
        let g = make_grid(1.0, 2.0).unwrap();
        let m = ComplexMatrix::from_fn(3, 3, Domain::Frequency, |_, _| c(1.0));
        let n = normalize(&m, &g).unwrap();
        for z in n.data() {
            assert!((z.re - 1.0 / 3.0).abs() < 1e-15 && z.im == 0.0);
        }
        let again = normalize(&n, &g).unwrap();
        assert!(rel_diff(&again, &n) < 1e-12);
    }

    #[test]
    fn normalize_random_matrix() {
        let g = make_grid(0.25, 10.0).unwrap();
        let m = random_matrix(g.points(), 3);
        let n = normalize(&m, &g).unwrap();
        let direct: f64 = n.data().iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>()
            * 0.25
            * 0.25;
        assert!((direct - 1.0).abs() < 1e-12);
        // direction preserved
        for (a, b) in m.data().iter().zip(n.data()) {
            assert!((a.arg() - b.arg()).abs() < 1e-12 || a.norm() == 0.0);
        }
    }

    #[test]
    fn normalize_rejects_zero() {
        let g = make_grid(1.0, 2.0).unwrap();
        let m = ComplexMatrix::zeros(3, 3, Domain::Frequency);
        assert!(matches!(normalize(&m, &g), Err(Error::Degenerate(_))));
    }

    #[test]
    fn centred_delta_transforms_to_constant() {
        let g = make_grid(1.0, 20.0).unwrap();
        let n = g.points();
        let mut m = ComplexMatrix::zeros(n, n, Domain::Frequency);
        m.data_mut()[g.center() * n + g.center()] = c(1.0);
        let (t, _) = fft2(&m, &g).unwrap();
        for z in t.data() {
            assert!((z.re - 1.0 / n as f64).abs() < 1e-14 && z.im.abs() < 1e-14);
        }
        // dual: the constant goes back to a centred delta
        let back = ifft2(&t, &g.time_grid()).unwrap();
        for r in 0..n {
            for col in 0..n {
                let expect = if r == g.center() && col == g.center() { 1.0 } else { 0.0 };
                assert!((back.get(r, col) - c(expect)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        for (res, span, seed) in [(1.0, 40.0, 1), (0.5, 31.0, 2), (1.0, 100.0, 3)] {
            let g = make_grid(res, span).unwrap();
            let m = random_matrix(g.points(), seed);
            let (t, tg) = fft2(&m, &g).unwrap();
            assert!((t.norm_sqr() / m.norm_sqr() - 1.0).abs() < 1e-10);
            let back = ifft2(&t, &tg).unwrap();
            assert!(rel_diff(&back, &m) < 1e-10);
        }
    }

    #[test]
    fn gaussian_maps_to_gaussian_with_inverse_width() {
        // exp(-ω²/2σ²) with ω = 2πν  ↔  exp(-t²σ²/2)
        let g = make_grid(0.5, 200.0).unwrap();
        let sigma = 2.0 * PI * 8.0; // rad/ns
        let m = ComplexMatrix::from_fn(g.points(), g.points(), Domain::Frequency, |j, k| {
            let w1 = 2.0 * PI * g.detuning(j);
            let w2 = 2.0 * PI * g.detuning(k);
            c((-(w1 * w1 + w2 * w2) / (2.0 * sigma * sigma)).exp())
        });
        let (t, tg) = fft2(&m, &g).unwrap();
        let peak = t.get(tg.center(), tg.center()).norm();
        for j in (0..tg.points()).step_by(7) {
            for k in (0..tg.points()).step_by(11) {
                let t1 = tg.time(j) * 1e-3;
                let t2 = tg.time(k) * 1e-3;
                let expect = peak * (-(t1 * t1 + t2 * t2) * sigma * sigma / 2.0).exp();
                assert!((t.get(j, k).norm() - expect).abs() < 1e-9 * peak);
            }
        }
    }

    #[test]
    fn sum_frequency_function_lives_on_time_diagonal() {
        // On a DFT grid a function of ν+ν' is periodic in the index sum; with
        // that wrap the transform is confined to t = t'.
        let g = make_grid(0.5, 100.0).unwrap();
        let n = g.points() as isize;
        let centre = g.center() as isize;
        let m = ComplexMatrix::from_fn(g.points(), g.points(), Domain::Frequency, |j, k| {
            let u = (j as isize + k as isize - 2 * centre).rem_euclid(n);
            let u = if u > centre { u - n } else { u };
            let s = u as f64 * g.resolution();
            c((-s * s / 50.0).exp())
        });
        let (t, tg) = fft2(&m, &g).unwrap();
        let diag: f64 = (0..tg.points()).map(|j| t.get(j, j).norm_sqr()).sum();
        let off = 1.0 - diag / t.norm_sqr();
        assert!(off < 1e-6, "off-diagonal fraction {off}");
    }

    #[test]
    fn shape_errors() {
        let g = make_grid(1.0, 4.0).unwrap();
        let m = ComplexMatrix::zeros(3, 3, Domain::Frequency);
        assert!(matches!(fft2(&m, &g), Err(Error::Shape { .. })));
        let t = ComplexMatrix::zeros(5, 5, Domain::Frequency);
        assert!(matches!(ifft2(&t, &g.time_grid()), Err(Error::Shape { .. })));
    }

    #[test]
    fn fwhm_conversion() {
        let g = fwhm_to_angular_sigma(74.0).unwrap();
        assert!((g - PI * 74.0 / LN_2.sqrt()).abs() < 1e-12);
        let unit = 2.0 * LN_2.sqrt() / (2.0 * PI);
        assert!((fwhm_to_angular_sigma(unit).unwrap() - 1.0).abs() < 1e-15);
        for f in [0.01, 1.0, 32.0, 74.0, 1e4] {
            let back = angular_sigma_to_fwhm(fwhm_to_angular_sigma(f).unwrap()).unwrap();
            assert!((back / f - 1.0).abs() < 1e-12);
        }
        assert!(fwhm_to_angular_sigma(0.0).is_err());
        assert!(fwhm_to_angular_sigma(-3.0).is_err());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let data = vec![c(1.0), Complex64::new(f64::NAN, 0.0)];
        assert!(ComplexMatrix::new(1, 2, data, Domain::Frequency).is_err());
        assert!(ComplexMatrix::new(1, 3, vec![c(1.0); 2], Domain::Frequency).is_err());
    }

    proptest::proptest! {
        #[test]
        fn normalize_is_scale_covariant(re in -5.0f64..5.0, im in -5.0f64..5.0, seed in 0u64..1000) {
            proptest::prop_assume!(re.abs() + im.abs() > 1e-3);
            let g = make_grid(1.0, 10.0).unwrap();
            let m = random_matrix(g.points(), seed);
            let factor = Complex64::new(re, im);
            let a = normalize(&m.scaled(factor), &g).unwrap();
            let b = normalize(&m, &g).unwrap().scaled(factor / factor.norm());
            proptest::prop_assert!(rel_diff(&a, &b) < 1e-12);
        }

        #[test]
        fn grid_is_odd_and_centred(res in 0.01f64..5.0, mult in 2.0f64..500.0) {
            let g = make_grid(res, res * mult).unwrap();
            proptest::prop_assert_eq!(g.points() % 2, 1);
            proptest::prop_assert_eq!(g.detuning(g.center()), 0.0);
            proptest::prop_assert!(g.span() >= res * mult - res * 0.5 - 1e-9);
        }
    }
}
