//! Analytic HOM visibility between two heralded photons.
//!
//! Each heralded photon is split into a single-mode part that interferes
//! (weight √P per photon, so P per pair) and a part that does not. In the
//! low-efficiency limit the D3∧D4 coincidence probability is proportional to
//! the normally ordered photon-number product at the beamsplitter outputs,
//! giving
//!
//! ```text
//! C0   ∝ η3 η4 (s1² g1 + s2² g2 + 2(1 − P) s1 s2) / 4
//! C∞   ∝ η3 η4 (s1² g1 + s2² g2 + 2 s1 s2) / 4
//! V    = 1 − C0/C∞ = P / (1 + (ζ g1 + g2/ζ) / 2),   ζ = s1/s2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw counts behind a heralded g⁽²⁾ measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountRecord {
    pub heralds: u64,
    pub double_3: u64,
    pub double_4: u64,
    pub triple: u64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        if self.triple > self.double_3.min(self.double_4)
            || self.double_3.max(self.double_4) > self.heralds
        {
            return Err(Error::Invariant {
                section: "CountRecord",
                reason: format!("counts must satisfy triple <= doubles <= heralds: {self:?}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub value: f64,
    /// Poissonian standard error; zero when no triples were recorded.
    pub stderr: f64,
    /// One-sided 95 % upper bound, reported when no triples were recorded.
    pub upper_bound: Option<f64>,
}

/// Heralded second-order correlation
/// `g² = N(Dᵢ)·N(Dᵢ∩D3∩D4) / (N(Dᵢ∩D3)·N(Dᵢ∩D4))`.
pub fn g2_from_counts(r: &CountRecord) -> Result<G2Estimate> {
    r.validate()?;
    if r.double_3 == 0 || r.double_4 == 0 {
        return Err(Error::UndefinedStatistic(
            "g2 needs at least one coincidence on each of D3 and D4".into(),
        ));
    }
    let ratio = r.heralds as f64 / (r.double_3 as f64 * r.double_4 as f64);
    if r.triple == 0 {
        // -ln(0.05) ≈ 3 expected triples bounds the Poisson mean at 95 %.
        return Ok(G2Estimate {
            value: 0.0,
            stderr: 0.0,
            upper_bound: Some(-(0.05f64.ln()) * ratio),
        });
    }
    let value = ratio * r.triple as f64;
    let rel = (1.0 / r.triple as f64
        + 1.0 / r.heralds as f64
        + 1.0 / r.double_3 as f64
        + 1.0 / r.double_4 as f64)
        .sqrt();
    Ok(G2Estimate {
        value,
        stderr: value * rel,
        upper_bound: None,
    })
}

/// Heralded source parameters entering the visibility model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceStats {
    pub s1: f64,
    pub s2: f64,
    pub g1: f64,
    pub g2: f64,
    pub eta3: f64,
    pub eta4: f64,
}

impl SourceStats {
    /// Parameters with `s1/s2 = zeta` and `s2 = 1`.
    pub fn from_zeta(zeta: f64, g1: f64, g2: f64) -> Self {
        Self {
            s1: zeta,
            s2: 1.0,
            g1,
            g2,
            eta3: 0.07,
            eta4: 0.07,
        }
    }

    /// ζ = 1.12, g1 = 2.98e-2, g2 = 2.71e-2 (measured on the 3.2 GHz source).
    pub fn measured_3p2ghz() -> Self {
        Self::from_zeta(1.12, 2.98e-2, 2.71e-2)
    }

    pub fn zeta(&self) -> f64 {
        self.s1 / self.s2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Invariant {
            section: "SourceStats",
            reason,
        });
        if !(self.s1 > 0.0 && self.s2 > 0.0 && self.s1.is_finite() && self.s2.is_finite()) {
            return bad(format!("s1 and s2 must be > 0 (got {}, {})", self.s1, self.s2));
        }
        if !(self.g1 >= 0.0 && self.g2 >= 0.0 && self.g1.is_finite() && self.g2.is_finite()) {
            return bad(format!("g1 and g2 must be >= 0 (got {}, {})", self.g1, self.g2));
        }
        for (name, eta) in [("eta3", self.eta3), ("eta4", self.eta4)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(format!("{name} must lie in (0, 1] (got {eta})"));
            }
            if eta > 0.2 {
                log::warn!("{name} = {eta}: the visibility model assumes efficiencies well below 1");
            }
        }
        Ok(())
    }
}

fn check_purity(purity: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&purity) {
        return Err(Error::invalid("purity", format!("must lie in [0, 1] (got {purity})")));
    }
    Ok(())
}

/// `(C0, C∞)` with a common unit proportionality constant, so their ratio is
/// exact.
pub fn coincidence_rates(purity: f64, stats: &SourceStats) -> Result<(f64, f64)> {
    check_purity(purity)?;
    stats.validate()?;
    let SourceStats {
        s1,
        s2,
        g1,
        g2,
        eta3,
        eta4,
    } = *stats;
    let same_source = s1 * s1 * g1 + s2 * s2 * g2;
    let c0 = eta3 * eta4 * (same_source + 2.0 * (1.0 - purity) * s1 * s2) / 4.0;
    let cinf = eta3 * eta4 * (same_source + 2.0 * s1 * s2) / 4.0;
    Ok((c0, cinf))
}

/// `V = P / (1 + (ζ g1 + g2/ζ)/2)`.
pub fn hom_visibility(purity: f64, stats: &SourceStats) -> Result<f64> {
    check_purity(purity)?;
    stats.validate()?;
    let zeta = stats.zeta();
    Ok(purity / (1.0 + (zeta * stats.g1 + stats.g2 / zeta) / 2.0))
}
