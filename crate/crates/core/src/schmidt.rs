//! Schmidt decomposition and spectral purity of a joint spectral amplitude.
//!
//! Two independent routes give the purity `P = Σ λ_j²`:
//!
//! * [`schmidt_decompose`] takes the singular values `s_j` of the sampled JSA
//!   and sets `λ_j = s_j² / Σ s_k²`.
//! * [`purity_gram`] evaluates `Tr[(A†A)²] / Tr[A†A]²` from one Hermitian
//!   Gram product without forming singular vectors; it is the fast path for
//!   3001×3001 grids.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexMatrix;

/// Coefficients smaller than this fraction of the largest are reported as
/// numerical noise (they still count towards the normalization).
const COEFFICIENT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    /// λ_j in non-increasing order, summing to one.
    pub coefficients: Vec<f64>,
    pub purity: f64,
    pub schmidt_number: f64,
    #[serde(skip)]
    pub modes: Option<SchmidtModes>,
}

/// Leading Schmidt mode functions sampled on the grid: `signal[j]` is the
/// j-th left singular vector, `idler[j]` the matching (conjugated) right one.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtModes {
    pub signal: Vec<Vec<Complex64>>,
    pub idler: Vec<Vec<Complex64>>,
}

impl SchmidtSpectrum {
    fn from_singular_values(mut singular: Vec<f64>, modes: Option<SchmidtModes>) -> Result<Self> {
        singular.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = singular.iter().map(|s| s * s).sum();
        if total == 0.0 {
            return Err(Error::Degenerate("JSA has no weight".into()));
        }
        let all: Vec<f64> = singular.iter().map(|s| s * s / total).collect();
        let purity: f64 = all.iter().map(|l| l * l).sum();
        let floor = all.first().copied().unwrap_or(0.0) * COEFFICIENT_FLOOR;
        let coefficients = all.into_iter().take_while(|&l| l >= floor).collect();
        Ok(Self {
            coefficients,
            purity,
            schmidt_number: 1.0 / purity,
            modes,
        })
    }
}

fn to_faer(jsa: &ComplexMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(jsa.rows(), jsa.cols(), |i, j| jsa.get(i, j))
}

/// Full Schmidt spectrum from the singular values of the JSA. With
/// `keep_modes = Some(k)` the leading `k` mode pairs are returned as well.
pub fn schmidt_decompose(jsa: &ComplexMatrix, keep_modes: Option<usize>) -> Result<SchmidtSpectrum> {
    if jsa.rows() == 0 || jsa.cols() == 0 || jsa.norm_sqr() == 0.0 {
        return Err(Error::Degenerate("cannot decompose an all-zero JSA".into()));
    }
    let a = to_faer(jsa);
    match keep_modes {
        None => {
            let s = a.singular_values().map_err(|e| {
                Error::Numerical(format!(
                    "singular value iteration did not converge on a {}x{} matrix: {e:?}",
                    jsa.rows(),
                    jsa.cols()
                ))
            })?;
            SchmidtSpectrum::from_singular_values(s, None)
        }
        Some(k) => {
            let svd = a.thin_svd().map_err(|e| {
                Error::Numerical(format!(
                    "SVD did not converge on a {}x{} matrix: {e:?}",
                    jsa.rows(),
                    jsa.cols()
                ))
            })?;
            let s: Vec<f64> = (0..svd.S().dim()).map(|i| svd.S()[i].re).collect();
            let u = svd.U();
            let v = svd.V();
            let k = k.min(s.len());
            let signal = (0..k)
                .map(|m| (0..u.nrows()).map(|i| u[(i, m)]).collect())
                .collect();
            let idler = (0..k)
                .map(|m| (0..v.nrows()).map(|i| v[(i, m)].conj()).collect())
                .collect();
            SchmidtSpectrum::from_singular_values(s, Some(SchmidtModes { signal, idler }))
        }
    }
}

/// Purity `Tr[(A†A)²] / Tr[A†A]²` via the Gram matrix of the shorter axis.
pub fn purity_gram(jsa: &ComplexMatrix) -> Result<f64> {
    if jsa.rows() == 0 || jsa.cols() == 0 {
        return Err(Error::Degenerate("empty JSA".into()));
    }
    // Vectors are the columns when the matrix is tall, the rows otherwise;
    // both Gram matrices share their nonzero spectrum.
    let by_columns = jsa.rows() >= jsa.cols();
    let (count, len) = if by_columns {
        (jsa.cols(), jsa.rows())
    } else {
        (jsa.rows(), jsa.cols())
    };
    let mut re = vec![0.0f64; count * len];
    let mut im = vec![0.0f64; count * len];
    for r in 0..jsa.rows() {
        for (c, z) in jsa.row(r).iter().enumerate() {
            let idx = if by_columns { c * len + r } else { r * len + c };
            re[idx] = z.re;
            im[idx] = z.im;
        }
    }
    let trace: f64 = re.iter().chain(im.iter()).map(|x| x * x).sum();
    if trace == 0.0 {
        return Err(Error::Degenerate("cannot take the purity of an all-zero JSA".into()));
    }
    let frob = gram_frobenius_sqr(&re, &im, count, len);
    let purity = frob / (trace * trace);
    if !purity.is_finite() {
        return Err(Error::Numerical("purity is not finite".into()));
    }
    Ok(purity)
}

const TILE: usize = 64;
const CHUNK: usize = 512;

/// `Σ_jk |⟨v_j, v_k⟩|²` for `count` complex vectors of length `len` stored
/// as split real/imaginary rows.
fn gram_frobenius_sqr(re: &[f64], im: &[f64], count: usize, len: usize) -> f64 {
    let tiles = count.div_ceil(TILE);
    let tile_pairs: Vec<(usize, usize)> = (0..tiles)
        .flat_map(|a| (a..tiles).map(move |b| (a, b)))
        .collect();
    let work = |&(a, b): &(usize, usize)| tile_block(re, im, count, len, a, b);
    #[cfg(feature = "parallel")]
    let partial: Vec<f64> = {
        use rayon::prelude::*;
        tile_pairs.par_iter().map(work).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<f64> = tile_pairs.iter().map(work).collect();
    partial.iter().sum()
}

fn tile_block(re: &[f64], im: &[f64], count: usize, len: usize, a: usize, b: usize) -> f64 {
    let j_range = a * TILE..((a + 1) * TILE).min(count);
    let k_range = b * TILE..((b + 1) * TILE).min(count);
    let nk = k_range.len();
    let mut acc_re = vec![0.0f64; j_range.len() * nk];
    let mut acc_im = vec![0.0f64; j_range.len() * nk];
    for start in (0..len).step_by(CHUNK) {
        let end = (start + CHUNK).min(len);
        for (jj, j) in j_range.clone().enumerate() {
            let rj = &re[j * len + start..j * len + end];
            let ij = &im[j * len + start..j * len + end];
            let k_first = if a == b { j } else { k_range.start };
            for k in k_first..k_range.end {
                let rk = &re[k * len + start..k * len + end];
                let ik = &im[k * len + start..k * len + end];
                let (dr, di) = dot_split(rj, ij, rk, ik);
                let slot = jj * nk + (k - k_range.start);
                acc_re[slot] += dr;
                acc_im[slot] += di;
            }
        }
    }
    let mut total = 0.0;
    for (jj, j) in j_range.enumerate() {
        for kk in 0..nk {
            let k = k_range.start + kk;
            if a == b && k < j {
                continue;
            }
            let m = acc_re[jj * nk + kk].powi(2) + acc_im[jj * nk + kk].powi(2);
            total += if j == k { m } else { 2.0 * m };
        }
    }
    total
}

/// `(Σ rj·rk + ij·ik, Σ rj·ik − ij·rk)`, unrolled four-wide.
#[inline]
fn dot_split(rj: &[f64], ij: &[f64], rk: &[f64], ik: &[f64]) -> (f64, f64) {
    let mut sr = [0.0f64; 4];
    let mut si = [0.0f64; 4];
    let n4 = rj.len() / 4 * 4;
    for (((a, b), c), d) in rj[..n4]
        .chunks_exact(4)
        .zip(ij[..n4].chunks_exact(4))
        .zip(rk[..n4].chunks_exact(4))
        .zip(ik[..n4].chunks_exact(4))
    {
        for l in 0..4 {
            sr[l] += a[l] * c[l] + b[l] * d[l];
            si[l] += a[l] * d[l] - b[l] * c[l];
        }
    }
    let mut r = sr[0] + sr[1] + sr[2] + sr[3];
    let mut i = si[0] + si[1] + si[2] + si[3];
    for t in n4..rj.len() {
        r += rj[t] * rk[t] + ij[t] * ik[t];
        i += rj[t] * ik[t] - ij[t] * rk[t];
    }
    (r, i)
}

/// Purity of the double-Gaussian JSA
/// `exp(-(ω+ω′)²/4σ₊²)·exp(-(ω-ω′)²/4σ₋²)`: `2σ₊σ₋ / (σ₊² + σ₋²)`.
pub fn purity_gaussian_closed_form(sigma_plus: f64, sigma_minus: f64) -> Result<f64> {
    if !(sigma_plus.is_finite() && sigma_plus > 0.0) {
        return Err(Error::invalid("sigma_plus", "must be positive"));
    }
    if !(sigma_minus.is_finite() && sigma_minus > 0.0) {
        return Err(Error::invalid("sigma_minus", "must be positive"));
    }
    Ok(2.0 * sigma_plus * sigma_minus / (sigma_plus * sigma_plus + sigma_minus * sigma_minus))
}
