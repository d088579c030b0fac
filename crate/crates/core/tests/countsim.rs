use combhom::countsim::*;
use combhom::visibility::{g2_from_counts, hom_visibility};
use combhom::Error;
use proptest::prelude::*;

fn measured_rates(duration_s: f64, seed: u64) -> ExperimentSpec {
    let mut s = ExperimentSpec::measured_3p2ghz(0.0, duration_s, seed);
    s.mu1 = mu_for_pair_rate(1.51e5, 3.2, 0.15, 0.07, PairStatistics::Thermal).unwrap();
    s.mu2 = mu_for_pair_rate(1.35e5, 3.2, 0.15, 0.07, PairStatistics::Thermal).unwrap();
    s
}

#[test]
fn fixed_seed_is_deterministic() {
    let spec = measured_rates(0.002, 7);
    let a = simulate_timetags(&spec, 0.9, 0.0).unwrap();
    let b = simulate_timetags(&spec, 0.9, 0.0).unwrap();
    assert_eq!(a, b);
    let ha = coincidence_histogram(&a[0], &a[2], 4.0, 1000.0).unwrap();
    let hb = coincidence_histogram(&b[0], &b[2], 4.0, 1000.0).unwrap();
    assert_eq!(ha, hb);
    let c = simulate_timetags(&ExperimentSpec { seed: 8, ..spec }, 0.9, 0.0).unwrap();
    assert_ne!(a, c);
}

#[test]
fn no_generation_or_no_time_gives_empty_streams() {
    let mut spec = measured_rates(0.001, 1);
    spec.mu1 = 0.0;
    spec.mu2 = 0.0;
    assert!(simulate_timetags(&spec, 0.5, 0.0).unwrap().iter().all(|s| s.is_empty()));
    let spec = measured_rates(0.0, 1);
    assert!(simulate_timetags(&spec, 0.5, 0.0).unwrap().iter().all(|s| s.is_empty()));
}

#[test]
fn streams_are_sorted_and_in_range() {
    let spec = measured_rates(0.001, 3);
    for (i, s) in simulate_timetags(&spec, 0.5, 30.0).unwrap().iter().enumerate() {
        assert_eq!(s.channel() as usize, i + 1);
        assert!(s.tags().windows(2).all(|w| w[0] <= w[1]));
        assert!(s.tags().iter().all(|&t| (0..=spec.duration_ps()).contains(&t)));
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let spec = measured_rates(0.001, 3);
    assert!(matches!(simulate_timetags(&spec, 1.5, 0.0), Err(Error::InvalidParameter { .. })));
    let bad = ExperimentSpec {
        klyshko: [0.0, 0.1, 0.1, 0.1],
        ..spec.clone()
    };
    assert!(matches!(simulate_timetags(&bad, 0.5, 0.0), Err(Error::Invariant { .. })));
    let w = WindowSpec::measured();
    assert!(simulate_hom_scan(&spec, 0.5, &[0.0], &w, None).is_err());
    assert!(simulate_hom_scan(&spec, 0.5, &[10.0, 20.0], &w, None).is_err());
}

#[test]
fn singles_rates_match_pair_statistics() {
    let spec = measured_rates(0.05, 11);
    let streams = simulate_timetags(&spec, 0.0, 0.0).unwrap();
    let rep = spec.rep_rate_ghz * 1e9;
    let expected = [
        rep * spec.mu1 * spec.klyshko[0],
        rep * spec.mu2 * spec.klyshko[1],
        rep * (spec.mu1 + spec.mu2) * spec.klyshko[2] / 2.0,
        rep * (spec.mu1 + spec.mu2) * spec.klyshko[3] / 2.0,
    ];
    for (s, e) in streams.iter().zip(expected) {
        let r = s.rate_cps(spec.duration_s);
        assert!((r / e - 1.0).abs() < 0.05, "channel {}: {r} vs {e}", s.channel());
    }
}

#[test]
fn pair_rate_back_out_reproduces_target() {
    let spec = measured_rates(0.05, 12);
    let streams = simulate_timetags(&spec, 0.0, 0.0).unwrap();
    // wide windows: every true coincidence, negligible accidentals
    let w = WindowSpec::new(600.0, 600.0, 600.0);
    let r = apply_windows_and_count(&streams, &w, spec.rep_rate_ghz).unwrap();
    let pairs = (r.double_3 + r.double_4 - r.triple) as f64 / spec.duration_s;
    assert!((pairs / 1.51e5 - 1.0).abs() < 0.10, "{pairs}");
}

#[test]
fn accidental_peaks_follow_the_pulse_period_and_jitter() {
    let spec = measured_rates(2.0, 5);
    let streams = simulate_timetags(&spec, 0.0, 0.0).unwrap();
    let h = coincidence_histogram(&streams[0], &streams[1], 4.0, 2000.0).unwrap();
    let spacing = h.peak_spacing(spec.pulse_period_ps()).unwrap();
    assert!((spacing - 312.5).abs() < 1.0, "{spacing}");
    // count-weighted mean width over the whole train
    let train = h.fit_peak_train(spec.pulse_period_ps()).unwrap();
    let n: u64 = train.iter().map(|(_, p)| p.counts).sum();
    let fwhm = train.iter().map(|(_, p)| p.fwhm_ps * p.counts as f64).sum::<f64>() / n as f64;
    let expected = (148.0f64.powi(2) + 93.0f64.powi(2)).sqrt();
    assert!((fwhm / expected - 1.0).abs() < 0.15, "{fwhm} from {} peaks", train.len());
}

#[test]
fn histogram_total_counts_pairs_in_range() {
    let spec = measured_rates(0.005, 2);
    let s = simulate_timetags(&spec, 0.0, 0.0).unwrap();
    let h = coincidence_histogram(&s[0], &s[2], 5.0, 500.0).unwrap();
    let brute = s[0]
        .tags()
        .iter()
        .map(|&a| s[2].tags().iter().filter(|&&b| b - a >= -500 && b - a < 500).count() as u64)
        .sum::<u64>();
    assert_eq!(h.total(), brute);
}

#[test]
fn wide_windows_admit_neighbour_pulse_accidentals() {
    let spec = measured_rates(0.05, 9);
    let streams = simulate_timetags(&spec, 0.0, 0.0).unwrap();
    let peaks = align_windows(&streams, spec.rep_rate_ghz).unwrap();
    let count = |w: f64| {
        let windows = WindowSpec {
            peaks: Some(peaks),
            ..WindowSpec::new(w, w, w).with_herald(Herald::D1AndD2)
        };
        apply_windows_and_count(&streams, &windows, spec.rep_rate_ghz).unwrap()
    };
    let narrow = count(100.0);
    let wide = count(1000.0);
    assert!(wide.heralds > narrow.heralds);
    assert!(wide.double_3 > narrow.double_3);
    assert!(wide.double_4 > narrow.double_4);
}

#[test]
fn alignment_finds_channel_delays() {
    let mut spec = measured_rates(0.05, 4);
    spec.channel_delay_ps = [0.0, 37.0, -55.0, 80.0];
    let streams = simulate_timetags(&spec, 0.0, 0.0).unwrap();
    let p = align_windows(&streams, spec.rep_rate_ghz).unwrap();
    assert!((p.d2_ps - 37.0).abs() < 5.0, "{p:?}");
    assert!((p.d3_ps + 55.0).abs() < 5.0, "{p:?}");
    assert!((p.d4_ps - 80.0).abs() < 5.0, "{p:?}");
}

#[test]
fn heralded_g2_matches_the_analytic_prediction_at_measured_rates() {
    // both sources feed D3/D4, so block source 2 as in a single-source
    // g2 measurement
    let mut spec = measured_rates(1.0, 21);
    spec.mu2 = 0.0;
    let streams = simulate_timetags(&spec, 0.0, 0.0).unwrap();
    let r = apply_windows_and_count(&streams, &WindowSpec::measured(), spec.rep_rate_ghz).unwrap();
    let g = g2_from_counts(&r).unwrap();
    let s = heralded_source_stats(&ExperimentSpec { mu2: spec.mu1, ..spec.clone() }).unwrap();
    assert!((g.value - s.g1).abs() < 3.0 * g.stderr, "{g:?} vs {}", s.g1);
}

#[test]
fn distinguishable_photons_show_no_dip() {
    let mut spec = ExperimentSpec::measured_3p2ghz(0.05, 0.03, 77);
    spec.klyshko = [1.0, 1.0, 0.05, 0.05];
    spec.jitter_fwhm_ps = [30.0; 4];
    let scan = simulate_hom_scan(&spec, 0.0, &[0.0, 40.0], &WindowSpec::measured(), None).unwrap();
    assert!(scan.visibility.abs() < 3.0 * scan.visibility_stderr, "{scan:?}");
    let again = simulate_hom_scan(&spec, 0.0, &[0.0, 40.0], &WindowSpec::measured(), None).unwrap();
    assert_eq!(scan, again);
}

#[test]
fn intermediate_indistinguishability_overrides() {
    let mut spec = ExperimentSpec::measured_3p2ghz(0.05, 0.03, 78);
    spec.klyshko = [1.0, 1.0, 0.05, 0.05];
    spec.jitter_fwhm_ps = [30.0; 4];
    let delays = [0.0, 10.0, 40.0];
    let scan = simulate_hom_scan(&spec, 1.0, &delays, &WindowSpec::measured(), Some(&[1.0, 0.5, 0.0])).unwrap();
    assert_eq!(scan.points[1].indistinguishability, 0.5);
    let r = |i: usize| scan.points[i].fourfold_per_herald();
    assert!(r(0) < r(1) && r(1) < r(2), "{scan:?}");
    assert!(simulate_hom_scan(&spec, 1.0, &delays, &WindowSpec::measured(), Some(&[1.0])).is_err());
}

#[test]
fn hom_dip_matches_model_at_intermediate_purity() {
    let mut spec = ExperimentSpec::measured_3p2ghz(0.05, 0.05, 79);
    spec.klyshko = [1.0, 1.0, 0.05, 0.05];
    spec.jitter_fwhm_ps = [30.0; 4];
    let scan = simulate_hom_scan(&spec, 0.7, &[0.0, 40.0], &WindowSpec::measured(), None).unwrap();
    let v = hom_visibility(0.7, &heralded_source_stats(&spec).unwrap()).unwrap();
    assert!((scan.visibility - v).abs() < 3.0 * scan.visibility_stderr, "{} vs {v}", scan.visibility);
}

fn small_streams() -> (ExperimentSpec, Streams) {
    let mut spec = measured_rates(0.003, 31);
    spec.mu1 = 0.05;
    spec.mu2 = 0.05;
    let s = simulate_timetags(&spec, 0.5, 0.0).unwrap();
    (spec, s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn widening_a_window_never_loses_counts(
        base in proptest::array::uniform3(0.0f64..600.0),
        extra in 0.0f64..400.0,
        which in 0usize..3,
        herald in prop_oneof![Just(Herald::D1), Just(Herald::D2), Just(Herald::D1AndD2)],
    ) {
        let (spec, streams) = small_streams();
        let peaks = align_windows(&streams, spec.rep_rate_ghz).unwrap();
        let narrow = WindowSpec {
            peaks: Some(peaks),
            ..WindowSpec::new(base[0], base[1], base[2]).with_herald(herald)
        };
        let mut wide = narrow;
        match which {
            0 => wide.d2.width_ps += extra,
            1 => wide.d3.width_ps += extra,
            _ => wide.d4.width_ps += extra,
        }
        let a = apply_windows_and_count(&streams, &narrow, spec.rep_rate_ghz).unwrap();
        let b = apply_windows_and_count(&streams, &wide, spec.rep_rate_ghz).unwrap();
        prop_assert!(b.heralds >= a.heralds);
        prop_assert!(b.double_3 >= a.double_3);
        prop_assert!(b.double_4 >= a.double_4);
        prop_assert!(b.triple >= a.triple);
        a.validate().unwrap();
    }
}
