use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};

use super::{ExperimentSpec, PairStatistics, Streams, TimeTagStream, FWHM_PER_SIGMA};
use crate::error::{Error, Result};
use crate::visibility::SourceStats;

/// Photon-number distribution of one SPDC source per pulse.
#[derive(Debug, Clone, Copy)]
pub struct PhotonSource {
    statistics: PairStatistics,
    mu: f64,
}

impl PhotonSource {
    pub fn new(statistics: PairStatistics, mu: f64) -> Self {
        Self { statistics, mu }
    }

    /// p(n).
    pub fn probability(&self, n: u32) -> f64 {
        let mu = self.mu;
        match self.statistics {
            PairStatistics::Thermal => {
                let q = mu / (1.0 + mu);
                (1.0 - q) * q.powi(n as i32)
            }
            PairStatistics::Poisson => {
                let ln = -mu + n as f64 * mu.ln() - ln_factorial(n);
                if mu == 0.0 {
                    if n == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    ln.exp()
                }
            }
        }
    }

    /// `E[x^n]`.
    pub fn generating(&self, x: f64) -> f64 {
        match self.statistics {
            PairStatistics::Thermal => 1.0 / (1.0 + self.mu * (1.0 - x)),
            PairStatistics::Poisson => (-self.mu * (1.0 - x)).exp(),
        }
    }

    /// Probability of at least one pair in a pulse.
    pub fn emission_probability(&self) -> f64 {
        1.0 - self.generating(0.0)
    }

    /// Probability that a threshold detector of efficiency `eta` clicks.
    pub fn click_probability(&self, eta: f64) -> f64 {
        1.0 - self.generating(1.0 - eta)
    }

    /// Draws `n` conditioned on `n >= 1`.
    fn sample_nonzero<R: Rng>(&self, rng: &mut R) -> u32 {
        match self.statistics {
            PairStatistics::Thermal => {
                let q = self.mu / (1.0 + self.mu);
                let extra = Geometric::new(1.0 - q).map(|g| g.sample(rng)).unwrap_or(0);
                1 + extra.min(u32::MAX as u64 - 1) as u32
            }
            PairStatistics::Poisson => {
                let target = rng.gen::<f64>() * self.emission_probability();
                let mut acc = 0.0;
                let mut n = 1;
                loop {
                    acc += self.probability(n);
                    if acc >= target || n > 10_000 {
                        return n;
                    }
                    n += 1;
                }
            }
        }
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Pulses that carry at least one pair, drawn by geometric skipping.
struct EmissionTrain {
    source: PhotonSource,
    gap: Option<Geometric>,
    next: Option<u64>,
    pulses: u64,
}

impl EmissionTrain {
    fn new<R: Rng>(source: PhotonSource, pulses: u64, rng: &mut R) -> Self {
        let p = source.emission_probability();
        let gap = (p > 0.0).then(|| Geometric::new(p.min(1.0)).expect("probability in (0, 1]"));
        let mut train = Self {
            source,
            gap,
            next: None,
            pulses,
        };
        train.next = train.draw_after(None, rng);
        train
    }

    fn draw_after<R: Rng>(&self, current: Option<u64>, rng: &mut R) -> Option<u64> {
        let gap = self.gap.as_ref()?;
        let start = current.map_or(0, |c| c + 1);
        let k = start.checked_add(gap.sample(rng))?;
        (k < self.pulses).then_some(k)
    }

    fn advance<R: Rng>(&mut self, rng: &mut R) -> u32 {
        let n = self.source.sample_nonzero(rng);
        self.next = self.draw_after(self.next, rng);
        n
    }
}

struct Detectors {
    period_ps: f64,
    eta: [f64; 4],
    delay_ps: [f64; 4],
    jitter: [Option<Normal<f64>>; 4],
    tags: [Vec<i64>; 4],
}

impl Detectors {
    fn new(spec: &ExperimentSpec) -> Self {
        Self {
            period_ps: spec.pulse_period_ps(),
            eta: spec.klyshko,
            delay_ps: spec.channel_delay_ps,
            jitter: spec.jitter_fwhm_ps.map(|f| {
                (f > 0.0).then(|| Normal::new(0.0, f / FWHM_PER_SIGMA).expect("finite sigma"))
            }),
            tags: Default::default(),
        }
    }

    fn click<R: Rng>(&mut self, ch: usize, t_ps: f64, rng: &mut R) {
        let jitter = self.jitter[ch].map_or(0.0, |d| d.sample(rng));
        self.tags[ch].push((t_ps + self.delay_ps[ch] + jitter).round() as i64);
    }

    /// Threshold detection of `n` photons arriving at `t_ps`.
    fn detect<R: Rng>(&mut self, ch: usize, n: u32, t_ps: f64, rng: &mut R) {
        if n > 0 && rng.gen::<f64>() < 1.0 - (1.0 - self.eta[ch]).powi(n as i32) {
            self.click(ch, t_ps, rng);
        }
    }

    fn add_dark_counts<R: Rng>(&mut self, dark_cps: &[f64; 4], duration_s: f64, rng: &mut R) {
        let span = duration_s * 1e12;
        for (ch, &rate) in dark_cps.iter().enumerate() {
            let mean = rate * duration_s;
            if mean <= 0.0 || span <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
            for _ in 0..count {
                let t = rng.gen::<f64>() * span;
                self.tags[ch].push(t.round() as i64);
            }
        }
    }

    fn finish(self, duration_ps: i64) -> Streams {
        let mut channel = 0u8;
        self.tags.map(|mut tags| {
            channel += 1;
            tags.retain(|&t| (0..=duration_ps).contains(&t));
            tags.sort_unstable();
            TimeTagStream::from_sorted(channel, tags)
        })
    }
}

fn binomial<R: Rng>(n: u32, p: f64, rng: &mut R) -> u32 {
    if p >= 1.0 {
        return n;
    }
    (0..n).filter(|_| rng.gen::<f64>() < p).count() as u32
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Distribution of the photon number in output 3 when `|k, l⟩` enters a
/// balanced beamsplitter (`b3 = (a1 + a2)/√2`, `b4 = (a1 − a2)/√2`).
pub(crate) fn beamsplitter_distribution(k: u32, l: u32) -> Vec<f64> {
    let total = k + l;
    let norm = 2f64.powi(total as i32) * factorial(k) * factorial(l);
    (0..=total)
        .map(|m| {
            let lo = m.saturating_sub(l);
            let hi = m.min(k);
            let coef: f64 = (lo..=hi)
                .map(|i| {
                    let j = m - i;
                    let sign = if (l - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                    sign * binomial_coefficient(k, i) * binomial_coefficient(l, j)
                })
                .sum();
            coef * coef * factorial(m) * factorial(total - m) / norm
        })
        .collect()
}

fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Splits the signal photons of one pulse over the two beamsplitter outputs.
/// Returns `[[from source 1, from source 2]; output 3, output 4]`.
///
/// Each photon independently carries the single-mode, interfering part of
/// its state with probability `amplitude = √P`. Interfering photons leave
/// according to the exact two-mode Fock-state transformation; the rest are
/// routed 50:50 at random.
fn route_signals<R: Rng>(n1: u32, n2: u32, amplitude: f64, rng: &mut R) -> [[u32; 2]; 2] {
    let k = binomial(n1, amplitude, rng);
    let l = binomial(n2, amplitude, rng);
    let classical1 = binomial(n1 - k, 0.5, rng);
    let classical2 = binomial(n2 - l, 0.5, rng);
    let mut out3 = [classical1, classical2];
    if k + l > 0 {
        let m = if k == 0 || l == 0 {
            binomial(k + l, 0.5, rng)
        } else {
            sample_index(&beamsplitter_distribution(k, l), rng) as u32
        };
        // which source each of the m photons came from only matters for its
        // arrival time
        let mut left1 = k;
        let mut left = k + l;
        for _ in 0..m {
            if rng.gen_range(0..left) < left1 {
                out3[0] += 1;
                left1 -= 1;
            } else {
                out3[1] += 1;
            }
            left -= 1;
        }
    }
    [out3, [n1 - out3[0], n2 - out3[1]]]
}

fn check_indistinguishability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(
            "indistinguishability",
            format!("must lie in [0, 1] (got {p})"),
        ));
    }
    Ok(())
}

/// Time tags of the four detectors for one run. `indistinguishability` is
/// the interfering fraction `P` of a photon pair at the beamsplitter and
/// `delay_ps` shifts the arrival of source 2's signal photons.
pub fn simulate_timetags(spec: &ExperimentSpec, indistinguishability: f64, delay_ps: f64) -> Result<Streams> {
    spec.validate()?;
    check_indistinguishability(indistinguishability)?;
    if !delay_ps.is_finite() {
        return Err(Error::invalid("delay_ps", "must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pulses = spec.pulse_count();
    let mut sources = [
        EmissionTrain::new(PhotonSource::new(spec.statistics, spec.mu1), pulses, &mut rng),
        EmissionTrain::new(PhotonSource::new(spec.statistics, spec.mu2), pulses, &mut rng),
    ];
    let mut det = Detectors::new(spec);
    let amplitude = indistinguishability.sqrt();

    loop {
        let pulse = match (sources[0].next, sources[1].next) {
            (None, None) => break,
            (a, b) => a.unwrap_or(u64::MAX).min(b.unwrap_or(u64::MAX)),
        };
        let mut n = [0u32; 2];
        for (s, train) in sources.iter_mut().enumerate() {
            if train.next == Some(pulse) {
                n[s] = train.advance(&mut rng);
            }
        }
        let t = pulse as f64 * det.period_ps;
        det.detect(0, n[0], t, &mut rng);
        det.detect(1, n[1], t, &mut rng);

        let outputs = route_signals(n[0], n[1], amplitude, &mut rng);
        for (ch, [from1, from2]) in [(2, outputs[0]), (3, outputs[1])] {
            let hit1 = binomial(from1, det.eta[ch], &mut rng) > 0;
            let hit2 = binomial(from2, det.eta[ch], &mut rng) > 0;
            let arrival = match (hit1, hit2) {
                (true, true) => t + delay_ps.min(0.0),
                (true, false) => t,
                (false, true) => t + delay_ps,
                (false, false) => continue,
            };
            det.click(ch, arrival, &mut rng);
        }
    }
    det.add_dark_counts(&spec.dark_cps, spec.duration_s, &mut rng);
    Ok(det.finish(spec.duration_ps()))
}

/// Mutually independent streams: every channel clicks in each pulse with its
/// own probability, plus Gaussian jitter.
pub fn simulate_independent_streams(
    rep_rate_ghz: f64,
    click_probability: [f64; 4],
    jitter_fwhm_ps: [f64; 4],
    duration_s: f64,
    seed: u64,
) -> Result<Streams> {
    let spec = ExperimentSpec {
        rep_rate_ghz,
        mu1: 0.0,
        mu2: 0.0,
        klyshko: [1.0; 4],
        jitter_fwhm_ps,
        duration_s,
        seed,
        statistics: PairStatistics::Poisson,
        dark_cps: [0.0; 4],
        channel_delay_ps: [0.0; 4],
    };
    spec.validate()?;
    for &p in &click_probability {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("click_probability", format!("must lie in [0, 1] (got {p})")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut det = Detectors::new(&spec);
    let pulses = spec.pulse_count();
    for (ch, &p) in click_probability.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let gap = Geometric::new(p).expect("probability in (0, 1]");
        let mut k = gap.sample(&mut rng);
        while k < pulses {
            det.click(ch, k as f64 * det.period_ps, &mut rng);
            k = match k.checked_add(1 + gap.sample(&mut rng)) {
                Some(next) => next,
                None => break,
            };
        }
    }
    Ok(det.finish(spec.duration_ps()))
}

/// Heralded photon-number moments of both sources: `s_i` is the mean and
/// `g_i = ⟨n(n−1)⟩ / s_i²` over the distribution conditioned on a click of
/// the source's herald detector. Signal efficiencies are copied from the
/// spec.
pub fn heralded_source_stats(spec: &ExperimentSpec) -> Result<SourceStats> {
    spec.validate()?;
    let moments = |mu: f64, eta_herald: f64| -> Result<(f64, f64)> {
        if mu == 0.0 {
            return Err(Error::Degenerate("a source with mu = 0 heralds nothing".into()));
        }
        let source = PhotonSource::new(spec.statistics, mu);
        let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for n in 1..100_000u32 {
            let p = source.probability(n);
            let h = 1.0 - (1.0 - eta_herald).powi(n as i32);
            let nf = n as f64;
            w += p * h;
            m1 += p * h * nf;
            m2 += p * h * nf * (nf - 1.0);
            if p * nf * nf < 1e-18 * m1.max(f64::MIN_POSITIVE) && nf > mu {
                break;
            }
        }
        let s = m1 / w;
        Ok((s, m2 / w / (s * s)))
    };
    let (s1, g1) = moments(spec.mu1, spec.klyshko[0])?;
    let (s2, g2) = moments(spec.mu2, spec.klyshko[1])?;
    Ok(SourceStats {
        s1,
        s2,
        g1,
        g2,
        eta3: spec.klyshko[2],
        eta4: spec.klyshko[3],
    })
}

/// Mean pair number per pulse that produces `target_cps` coincidences
/// between a herald of efficiency `eta_idler` and either signal detector,
/// `eta_signal` being the per-photon probability of a signal click.
pub fn mu_for_pair_rate(
    target_cps: f64,
    rep_rate_ghz: f64,
    eta_idler: f64,
    eta_signal: f64,
    statistics: PairStatistics,
) -> Result<f64> {
    for (name, eta) in [("eta_idler", eta_idler), ("eta_signal", eta_signal)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(name, format!("must lie in (0, 1] (got {eta})")));
        }
    }
    if !(rep_rate_ghz > 0.0 && rep_rate_ghz.is_finite()) {
        return Err(Error::invalid("rep_rate_ghz", "must be > 0"));
    }
    let rep = rep_rate_ghz * 1e9;
    if !(target_cps >= 0.0 && target_cps < 0.5 * rep) {
        return Err(Error::invalid(
            "target_cps",
            format!("must lie in [0, {}) (got {target_cps})", 0.5 * rep),
        ));
    }
    let rate = |mu: f64| {
        let s = PhotonSource::new(statistics, mu);
        let both = 1.0 - s.generating(1.0 - eta_idler) - s.generating(1.0 - eta_signal)
            + s.generating((1.0 - eta_idler) * (1.0 - eta_signal));
        rep * both
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while rate(hi) < target_cps {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical(format!("no mean pair number reaches {target_cps} cps")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target_cps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
