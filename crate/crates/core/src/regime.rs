//! Closed-form regime theory: the four-regime exponent, the order-of-magnitude
//! capacity estimate, per-scheme exponents and the phase diagram.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{check_alpha, snr_long, snr_short, PhysicalParams};

/// Distance to a regime boundary below which the point is flagged as on it.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Bandwidth-limited: `beta >= alpha/2 - 1`.
    I,
    /// Power-limited, slow decay: `2 <= alpha <= 3`.
    II,
    /// Power-limited, fast decay, low nearest-neighbour SNR.
    III,
    /// Power-limited, fast decay, high nearest-neighbour SNR.
    IV,
}

impl Regime {
    pub fn id(self) -> u8 {
        match self {
            Regime::I => 1,
            Regime::II => 2,
            Regime::III => 3,
            Regime::IV => 4,
        }
    }

    /// Scheme that achieves the optimal exponent in this regime.
    pub fn optimal_scheme(self) -> Scheme {
        match self {
            Regime::I => Scheme::HierarchicalCooperation,
            Regime::II => Scheme::BurstyHierarchicalCooperation,
            Regime::III => Scheme::Multihop,
            Regime::IV => Scheme::Hybrid,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::I => "I",
            Regime::II => "II",
            Regime::III => "III",
            Regime::IV => "IV",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Multihop,
    HierarchicalCooperation,
    BurstyHierarchicalCooperation,
    Hybrid,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Multihop => "multihop",
            Scheme::HierarchicalCooperation => "hc",
            Scheme::BurstyHierarchicalCooperation => "bursty-hc",
            Scheme::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFlags {
    /// `beta = alpha/2 - 1`
    pub snr_long_0db: bool,
    /// `beta = 0`
    pub snr_short_0db: bool,
    /// `alpha = 3`
    pub alpha_three: bool,
}

impl BoundaryFlags {
    pub fn any(&self) -> bool {
        self.snr_long_0db || self.snr_short_0db || self.alpha_three
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    pub alpha: f64,
    pub beta: f64,
    pub regime: Regime,
    pub exponent: f64,
    pub boundary: BoundaryFlags,
}

/// Classify `(alpha, beta)` into one of the four regimes and return the
/// capacity scaling exponent. Inequalities are taken verbatim: the first row
/// is closed at `beta = alpha/2 - 1`, the second at `alpha = 3`, the third at
/// `beta = 0`.
pub fn classify(alpha: f64, beta: f64) -> Result<RegimePoint> {
    check_alpha(alpha)?;
    let knee = alpha / 2.0 - 1.0;
    let (regime, exponent) = if beta >= knee {
        (Regime::I, 1.0)
    } else if alpha <= 3.0 {
        (Regime::II, 2.0 - alpha / 2.0 + beta)
    } else if beta <= 0.0 {
        (Regime::III, 0.5 + beta)
    } else {
        (Regime::IV, 0.5 + beta / (alpha - 2.0))
    };
    let boundary = BoundaryFlags {
        snr_long_0db: (beta - knee).abs() <= BOUNDARY_TOL,
        snr_short_0db: beta.abs() <= BOUNDARY_TOL && alpha > 3.0,
        alpha_three: (alpha - 3.0).abs() <= BOUNDARY_TOL && beta < knee,
    };
    Ok(RegimePoint {
        alpha,
        beta,
        regime,
        exponent,
        boundary,
    })
}

/// Order-of-magnitude total capacity in bits/s together with its regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapacityEstimate {
    pub capacity: f64,
    pub regime: Regime,
    pub snr_short: f64,
    pub snr_long: f64,
    /// Received power at the nearest-neighbour distance.
    pub received_power: f64,
}

/// Evaluate the four-row capacity approximation. This is an order estimate,
/// not an accurate capacity. 0 dB thresholds are `SNR >= 1` comparisons;
/// `SNR_s = 1` falls in regime III, where rows III and IV coincide.
pub fn capacity_estimate(params: &PhysicalParams, n: usize, area: f64) -> Result<CapacityEstimate> {
    params.validate()?;
    if n == 0 || !(area > 0.0) {
        return Err(crate::Error::invalid("capacity_estimate needs n >= 1 and area > 0"));
    }
    let alpha = params.alpha;
    let nf = n as f64;
    let pr = params.gain * params.power * (area / nf).powf(-alpha / 2.0);
    let pr_n0 = pr / params.noise_density;
    let w = params.bandwidth;
    let snr_s = snr_short(params, n, area);
    let snr_l = snr_long(snr_s, n, alpha);
    let (regime, capacity) = if snr_l >= 1.0 {
        (Regime::I, nf * w)
    } else if alpha <= 3.0 {
        (Regime::II, nf.powf(2.0 - alpha / 2.0) * pr_n0)
    } else if snr_s <= 1.0 {
        (Regime::III, nf.sqrt() * pr_n0)
    } else {
        (
            Regime::IV,
            nf.sqrt() * w.powf((alpha - 3.0) / (alpha - 2.0)) * pr_n0.powf(1.0 / (alpha - 2.0)),
        )
    };
    Ok(CapacityEstimate {
        capacity,
        regime,
        snr_short: snr_s,
        snr_long: snr_l,
        received_power: pr,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchemeExponents {
    pub multihop: f64,
    pub hierarchical: f64,
    /// `None` outside `0 < beta <= alpha/2 - 1`, where the hybrid scheme is not
    /// defined.
    pub hybrid: Option<f64>,
    pub optimal: Scheme,
}

impl SchemeExponents {
    pub fn best(&self) -> f64 {
        self.multihop.max(self.hierarchical).max(self.hybrid.unwrap_or(f64::NEG_INFINITY))
    }
}

pub fn multihop_exponent(beta: f64) -> f64 {
    if beta > 0.0 {
        0.5
    } else {
        0.5 + beta
    }
}

/// Exponent of (bursty, when power-limited) hierarchical cooperation.
pub fn hc_exponent(alpha: f64, beta: f64) -> f64 {
    if beta >= alpha / 2.0 - 1.0 {
        1.0
    } else {
        2.0 - alpha / 2.0 + beta
    }
}

pub fn hybrid_exponent(alpha: f64, beta: f64) -> Option<f64> {
    (alpha > 2.0 && beta > 0.0 && beta <= alpha / 2.0 - 1.0).then(|| 0.5 + beta / (alpha - 2.0))
}

pub fn scheme_exponents(alpha: f64, beta: f64) -> Result<SchemeExponents> {
    let point = classify(alpha, beta)?;
    Ok(SchemeExponents {
        multihop: multihop_exponent(beta),
        hierarchical: hc_exponent(alpha, beta),
        hybrid: hybrid_exponent(alpha, beta),
        optimal: point.regime.optimal_scheme(),
    })
}

/// Inclusive linear grid; a single point sits at `lo`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCell {
    pub point: RegimePoint,
    pub schemes: SchemeExponents,
}

/// Row-major grid of classifications: one row per `beta`, one column per
/// `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn cell(&self, beta_idx: usize, alpha_idx: usize) -> &PhaseCell {
        &self.cells[beta_idx * self.alphas.len() + alpha_idx]
    }

    /// CSV with columns
    /// `alpha,beta,regime,exponent,e_multihop,e_hc,e_hybrid,optimal_scheme`.
    pub fn to_csv(&self) -> String {
        use crate::stats::fmt17;
        let mut out = String::from("alpha,beta,regime,exponent,e_multihop,e_hc,e_hybrid,optimal_scheme\n");
        for c in &self.cells {
            let p = &c.point;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt17(p.alpha),
                fmt17(p.beta),
                p.regime,
                fmt17(p.exponent),
                fmt17(c.schemes.multihop),
                fmt17(c.schemes.hierarchical),
                c.schemes.hybrid.map(fmt17).unwrap_or_else(|| "NA".into()),
                c.schemes.optimal,
            ));
        }
        out
    }

    /// Plot-ready matrix of regime ids: first row holds the alpha values, each
    /// following row starts with its beta value.
    pub fn to_plot_grid(&self) -> String {
        use crate::stats::fmt17;
        let mut out = String::from("beta\\alpha");
        for a in &self.alphas {
            out.push(',');
            out.push_str(&fmt17(*a));
        }
        out.push('\n');
        for (bi, b) in self.betas.iter().enumerate() {
            out.push_str(&fmt17(*b));
            for ai in 0..self.alphas.len() {
                out.push(',');
                out.push_str(&self.cell(bi, ai).point.regime.id().to_string());
            }
            out.push('\n');
        }
        out
    }
}

pub fn phase_diagram(
    alpha_range: (f64, f64),
    beta_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<PhaseDiagram> {
    use rayon::prelude::*;
    check_alpha(alpha_range.0)?;
    if alpha_range.1 < alpha_range.0 || beta_range.1 < beta_range.0 {
        return Err(crate::Error::invalid("ranges must be given as (low, high)"));
    }
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(crate::Error::invalid("resolution must be at least 1x1"));
    }
    let alphas = linspace(alpha_range.0, alpha_range.1, resolution.0);
    let betas = linspace(beta_range.0, beta_range.1, resolution.1);
    let cells = (0..alphas.len() * betas.len())
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (alphas[idx % alphas.len()], betas[idx / alphas.len()]);
            Ok(PhaseCell {
                point: classify(a, b)?,
                schemes: scheme_exponents(a, b)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram { alphas, betas, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_examples() {
        let p = classify(3.0, 2.0).unwrap();
        assert_eq!((p.regime, p.exponent), (Regime::I, 1.0));
        let p = classify(2.5, 0.0).unwrap();
        assert_eq!(p.regime, Regime::II);
        assert!((p.exponent - 0.75).abs() < 1e-15);
        let p = classify(4.0, -0.5).unwrap();
        assert_eq!((p.regime, p.exponent), (Regime::III, 0.0));
        let p = classify(4.0, 0.5).unwrap();
        assert_eq!((p.regime, p.exponent), (Regime::IV, 0.75));
    }

    #[test]
    fn rejects_small_alpha() {
        assert!(classify(1.99, 0.0).is_err());
        assert!(scheme_exponents(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn boundary_flags() {
        assert!(classify(4.0, 1.0).unwrap().boundary.snr_long_0db);
        assert!(classify(4.0, 0.0).unwrap().boundary.snr_short_0db);
        assert!(classify(3.0, 0.1).unwrap().boundary.alpha_three);
        assert!(!classify(4.0, 0.3).unwrap().boundary.any());
    }

    #[test]
    fn closures_follow_the_theorem() {
        // row 1 closed at the knee, row 3 closed at beta = 0, row 2 closed at alpha = 3
        assert_eq!(classify(4.0, 1.0).unwrap().regime, Regime::I);
        assert_eq!(classify(4.0, 0.0).unwrap().regime, Regime::III);
        assert_eq!(classify(3.0, 0.0).unwrap().regime, Regime::II);
        assert_eq!(classify(2.0, 0.0).unwrap().regime, Regime::I);
    }

    #[test]
    fn dense_and_extended_special_cases() {
        for i in 0..50 {
            let a = 2.0 + 0.08 * i as f64;
            assert_eq!(classify(a, a / 2.0).unwrap().exponent, 1.0);
            let e0 = classify(a, 0.0).unwrap().exponent;
            let expect = if a <= 3.0 { 2.0 - a / 2.0 } else { 0.5 };
            assert!((e0 - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn scheme_exponent_examples() {
        let s = scheme_exponents(4.0, 1.0).unwrap();
        assert_eq!(s.multihop, 0.5);
        assert_eq!(s.hierarchical, 1.0);
        assert_eq!(s.hybrid, Some(1.0));
        let s = scheme_exponents(4.0, -1.0).unwrap();
        assert_eq!(s.multihop, -0.5);
        assert_eq!(s.multihop, classify(4.0, -1.0).unwrap().exponent);
        assert_eq!(s.hybrid, None);
        assert_eq!(s.optimal, Scheme::Multihop);
        assert_eq!(scheme_exponents(2.0, 0.0).unwrap().hierarchical, 1.0);
        assert_eq!(scheme_exponents(4.0, 0.5).unwrap().optimal, Scheme::Hybrid);
        assert_eq!(scheme_exponents(2.5, -0.5).unwrap().optimal, Scheme::BurstyHierarchicalCooperation);
    }

    #[test]
    fn capacity_estimate_rows() {
        // Regime I: SNR_l = 100 with alpha = 2 (SNR_l = SNR_s).
        let p = PhysicalParams::unit(2.0).unwrap();
        let n = 64;
        let area = p.area_for_snr(n, 100.0).unwrap();
        let est = capacity_estimate(&p, n, area).unwrap();
        assert_eq!(est.regime, Regime::I);
        assert!((est.snr_long - 100.0).abs() < 1e-9);
        assert_eq!(est.capacity, 64.0);

        let p4 = PhysicalParams::unit(4.0).unwrap();
        let area = p4.area_for_snr(n, 0.5).unwrap();
        let est = capacity_estimate(&p4, n, area).unwrap();
        assert_eq!(est.regime, Regime::III);
        assert!((est.capacity - 8.0 * est.received_power / p4.noise_density).abs() < 1e-12);

        let area = p4.area_for_snr(n, 4.0).unwrap();
        assert_eq!(capacity_estimate(&p4, n, area).unwrap().regime, Regime::IV);
        let p25 = PhysicalParams::unit(2.5).unwrap();
        let area = p25.area_for_snr(n, 1.0).unwrap();
        assert_eq!(capacity_estimate(&p25, n, area).unwrap().regime, Regime::II);
    }

    #[test]
    fn capacity_estimate_homogeneity() {
        let n = 256;
        // Row I is linear in W.
        let p = PhysicalParams::new(1.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        let area = p.area_for_snr(n, 10.0).unwrap();
        let c1 = capacity_estimate(&p, n, area).unwrap();
        let p2 = PhysicalParams { bandwidth: 2.0, ..p };
        let c2 = capacity_estimate(&p2, n, area).unwrap();
        assert_eq!((c1.regime, c2.regime), (Regime::I, Regime::I));
        assert!((c2.capacity / c1.capacity - 2.0).abs() < 1e-12);
        // Row III is linear in P.
        let p = PhysicalParams::unit(4.0).unwrap();
        let area = p.area_for_snr(n, 0.2).unwrap();
        let c1 = capacity_estimate(&p, n, area).unwrap();
        let c2 = capacity_estimate(&PhysicalParams { power: 2.0, ..p }, n, area).unwrap();
        assert_eq!((c1.regime, c2.regime), (Regime::III, Regime::III));
        assert!((c2.capacity / c1.capacity - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rows_three_and_four_meet_at_unit_snr() {
        let p = PhysicalParams::new(1.0, 1.0, 3.0, 5.0, 1.0).unwrap();
        let n = 1000;
        let area = p.area_for_snr(n, 1.0).unwrap();
        let est = capacity_estimate(&p, n, area).unwrap();
        let pr_n0 = est.received_power / p.noise_density;
        let row4 = (n as f64).sqrt() * p.bandwidth.powf(2.0 / 3.0) * pr_n0.powf(1.0 / 3.0);
        assert!((est.capacity / row4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_diagram_contains_examples() {
        let d = phase_diagram((2.0, 6.0), (-1.0, 3.0), (9, 9)).unwrap();
        // alphas step 0.5, betas step 0.5
        let ai = d.alphas.iter().position(|&a| a == 2.5).unwrap();
        let bi = d.betas.iter().position(|&b| b == 2.0).unwrap();
        assert_eq!(d.cell(bi, ai).point.regime, Regime::I);
        for (a, b, r) in [(3.0, 2.0, Regime::I), (2.5, 0.0, Regime::II), (4.0, -0.5, Regime::III), (4.0, 0.5, Regime::IV)] {
            let ai = d.alphas.iter().position(|&x| x == a).unwrap();
            let bi = d.betas.iter().position(|&x| x == b).unwrap();
            assert_eq!(d.cell(bi, ai).point.regime, r, "({a}, {b})");
        }
        let single = phase_diagram((4.0, 4.0), (0.5, 0.5), (1, 1)).unwrap();
        assert_eq!(single.cells.len(), 1);
        assert_eq!(single.cells[0].point.regime, Regime::IV);
        assert!(single.to_csv().lines().nth(1).unwrap().contains(",IV,"));
    }
}
