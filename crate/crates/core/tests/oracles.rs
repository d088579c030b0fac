//! Library results against direct, unoptimized evaluations.

use std::f64::consts::{LN_2, PI};

use combhom::config::ExperimentConfig;
use combhom::grid::{fft2, make_grid, ComplexMatrix, Domain, FrequencyGrid};
use combhom::jsa::*;
use combhom::pipeline::{run_sweep, SweepAxis};
use combhom::schmidt::{purity_gram, schmidt_decompose};
use num_complex::Complex64;

fn gauss_power_fwhm(nu: f64, fwhm: f64) -> f64 {
    (-2.0 * LN_2 * nu * nu / (fwhm * fwhm)).exp()
}

/// Full comb: every tooth from -N to N, no reach cutoff.
fn direct_jsa(grid: &FrequencyGrid, pump: &PumpCombSpec, fs: f64, fi: f64, teeth: i64) -> ComplexMatrix {
    let n = grid.points();
    let env_sigma = pump.envelope_fwhm_ghz / (2.0 * LN_2.sqrt());
    let comb = |s: f64| {
        let teeth_sum: f64 = (-teeth..=teeth)
            .map(|k| {
                let d = s - k as f64 * pump.rep_rate_ghz;
                (-d * d / (2.0 * pump.tooth_sigma_ghz.powi(2))).exp()
            })
            .sum();
        (-s * s / (2.0 * env_sigma * env_sigma)).exp() * teeth_sum
    };
    let raw = ComplexMatrix::from_fn(n, n, Domain::Frequency, |j, k| {
        let (a, b) = (grid.detuning(j), grid.detuning(k));
        Complex64::new(gauss_power_fwhm(a, fs) * gauss_power_fwhm(b, fi) * comb(a + b), 0.0)
    });
    combhom::grid::normalize(&raw, grid).unwrap()
}

fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn jsa_matches_direct_evaluation() {
    let grid = make_grid(0.5, 32.0).unwrap();
    assert_eq!(grid.points(), 65);
    let pump = PumpCombSpec::new(3.2, 74.0, 0.5).unwrap();
    let fs = SpectralFilterSpec::gaussian(8.0);
    let fi = SpectralFilterSpec::gaussian(14.0);
    let lib = build_jsa(&grid, &pump, &PhaseMatchSpec::Identity, &fs, &fi).unwrap();
    let oracle = direct_jsa(&grid, &pump, 8.0, 14.0, 200);
    assert!(max_diff(&lib, &oracle) < 1e-12 * oracle.max_abs(), "{}", max_diff(&lib, &oracle));
}

#[test]
fn jta_matches_direct_dft() {
    let grid = make_grid(1.0, 32.0).unwrap();
    let n = grid.points();
    let pump = PumpCombSpec::new(3.2, 20.0, 0.8).unwrap();
    let jsa = build_jsa(
        &grid,
        &pump,
        &PhaseMatchSpec::Identity,
        &SpectralFilterSpec::gaussian(10.0),
        &SpectralFilterSpec::gaussian(6.0),
    )
    .unwrap();
    let (t, tg) = fft2(&jsa, &grid).unwrap();
    assert!((tg.resolution() - 1e3 / (n as f64 * grid.resolution())).abs() < 1e-9);
    let c = grid.center() as f64;
    let phase = |a: usize, j: usize| {
        let x = -2.0 * PI * (a as f64 - c) * (j as f64 - c) / n as f64;
        Complex64::new(x.cos(), x.sin())
    };
    let mut worst = 0.0f64;
    for j in (0..n).step_by(3) {
        for k in (0..n).step_by(5) {
            let mut s = Complex64::new(0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    s += jsa.get(a, b) * phase(a, j) * phase(b, k);
                }
            }
            worst = worst.max((s / n as f64 - t.get(j, k)).norm());
        }
    }
    assert!(worst < 1e-12 * t.max_abs(), "{worst}");
}

#[test]
fn gram_purity_matches_explicit_reduced_state() {
    let grid = make_grid(0.5, 32.0).unwrap();
    let pump = PumpCombSpec::new(3.2, 74.0, 0.5).unwrap();
    let jsa = build_jsa(
        &grid,
        &pump,
        &PhaseMatchSpec::Identity,
        &SpectralFilterSpec::gaussian(8.0),
        &SpectralFilterSpec::gaussian(14.0),
    )
    .unwrap();
    // 64x64 sub-block so the brute force stays cheap
    let sub = ComplexMatrix::from_fn(64, 64, Domain::Frequency, |j, k| jsa.get(j, k));
    let n = 64;
    let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            rho[a * n + b] = (0..n).map(|k| sub.get(a, k) * sub.get(b, k).conj()).sum();
        }
    }
    let tr: f64 = (0..n).map(|a| rho[a * n + a].re).sum();
    let tr2: f64 = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| (rho[a * n + b] * rho[b * n + a]).re)
        .sum();
    let p = tr2 / (tr * tr);
    assert!((purity_gram(&sub).unwrap() - p).abs() < 1e-12);
    assert!((schmidt_decompose(&sub, None).unwrap().purity - p).abs() < 1e-10);
}

#[test]
fn single_broad_tooth_gives_a_separable_state() {
    // one tooth far wider than both filters: the JSA factorizes
    let grid = make_grid(0.25, 60.0).unwrap();
    let pump = PumpCombSpec::new(1000.0, 10_000.0, 300.0).unwrap();
    let jsa = build_jsa(
        &grid,
        &pump,
        &PhaseMatchSpec::Identity,
        &SpectralFilterSpec::gaussian(10.0),
        &SpectralFilterSpec::gaussian(10.0),
    )
    .unwrap();
    let p = purity_gram(&jsa).unwrap();
    assert!((p - 1.0).abs() < 1e-3, "{p}");
}

#[test]
fn gating_matches_explicit_convolution() {
    let grid = make_grid(1.0, 24.0).unwrap();
    let n = grid.points();
    let pump = PumpCombSpec::new(3.2, 20.0, 0.8).unwrap();
    let jsa = build_jsa(
        &grid,
        &pump,
        &PhaseMatchSpec::Identity,
        &SpectralFilterSpec::gaussian(8.0),
        &SpectralFilterSpec::gaussian(6.0),
    )
    .unwrap();
    let gs = TemporalGateSpec::gaussian(150.0);
    let gi = TemporalGateSpec::rectangular(300.0);
    let gated = apply_temporal_gates(&jsa, &grid, &gs, &gi).unwrap();

    // circular convolution with the discrete transforms of the gates
    let c = grid.center() as f64;
    let dt = 1e3 / (n as f64 * grid.resolution());
    let kernel = |g: &TemporalGateSpec| -> Vec<Complex64> {
        (0..n)
            .map(|m| {
                (0..n)
                    .map(|j| {
                        let x = 2.0 * PI * (m as f64) * (j as f64 - c) / n as f64;
                        Complex64::new(x.cos(), x.sin()) * g.transmission((j as f64 - c) * dt)
                    })
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect()
    };
    let (ks, ki) = (kernel(&gs), kernel(&gi));
    let raw = ComplexMatrix::from_fn(n, n, Domain::Frequency, |a, b| {
        let mut s = Complex64::new(0.0, 0.0);
        for p in 0..n {
            for q in 0..n {
                s += jsa.get(p, q) * ks[(a + n - p) % n] * ki[(b + n - q) % n];
            }
        }
        s
    });
    let survival = raw.norm_sqr() / jsa.norm_sqr();
    let oracle = combhom::grid::normalize(&raw, &grid).unwrap();
    assert!(max_diff(&gated.jsa, &oracle) < 1e-10 * oracle.max_abs());
    assert!((gated.survival - survival).abs() < 1e-12);
}

#[test]
fn narrowing_the_gates_never_lowers_purity() {
    let mut cfg = ExperimentConfig::fast();
    cfg.grid.resolution_ghz = 0.4;
    let widths = [60.0, 100.0, 148.0, 300.0, 600.0, 1000.0];
    let rows = run_sweep(&cfg, SweepAxis::GateWidth, &widths, true, false).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].purity <= w[0].purity + 1e-9, "{rows:?}");
    }
}

#[test]
fn identity_gates_return_the_input() {
    let grid = make_grid(1.0, 24.0).unwrap();
    let pump = PumpCombSpec::new(3.2, 20.0, 0.8).unwrap();
    let jsa = build_jsa(
        &grid,
        &pump,
        &PhaseMatchSpec::Identity,
        &SpectralFilterSpec::gaussian(8.0),
        &SpectralFilterSpec::gaussian(6.0),
    )
    .unwrap();
    let g = apply_temporal_gates(&jsa, &grid, &TemporalGateSpec::identity(), &TemporalGateSpec::identity()).unwrap();
    assert_eq!(g.survival, 1.0);
    assert!(max_diff(&g.jsa, &jsa) < 1e-15);
}
