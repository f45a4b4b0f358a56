//! Bisection cutset bound.
//!
//! The network is cut at its vertical midline `x = sqrt(A)`. Right-hand nodes
//! are split into a strip `V_D` of high received SNR, whose transfer is bounded
//! by degrees of freedom, and the far set `D \ V_D`, whose transfer is bounded
//! by total received power. The split width `w_hat` is in units of the
//! nearest-neighbour distance `sqrt(A/n)`.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::linalg::log2_det_identity_plus;
use crate::network::{channel_matrix, check_alpha, snr_short, NetworkInstance, PhysicalParams};
use crate::percolation::{percolation_cut, CutPolyline, PercolationGrid};
use crate::rng::{derive_seed, tag};
use crate::stats::{self, fmt17, neumaier_sum};

/// Relative tolerance for treating `w_hat` as `sqrt(n)` or 1.
const W_HAT_TOL: f64 = 1e-12;

/// Rescaled width of the high-SNR strip:
/// `sqrt(n)` if `SNR_s >= n^(alpha/2 - 1)`, `1` if `SNR_s < 1`, otherwise
/// `sqrt(n)` for `alpha = 2` and `SNR_s^(1/(alpha-2))` for `alpha > 2`.
pub fn select_cut_width(snr_s: f64, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::invalid("select_cut_width needs n >= 2"));
    }
    let nf = n as f64;
    Ok(if snr_s >= nf.powf(alpha / 2.0 - 1.0) {
        nf.sqrt()
    } else if snr_s < 1.0 {
        1.0
    } else if alpha == 2.0 {
        nf.sqrt()
    } else {
        snr_s.powf(1.0 / (alpha - 2.0))
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMode {
    /// Straight cut at the midline; right-hand nodes within one rescaled unit
    /// of it (the set `E`) are set aside and reported.
    #[default]
    Idealized,
    /// Node-free percolation cut through the middle slab.
    Percolation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutPartition {
    pub mode: CutMode,
    /// The midline `x = sqrt(A)`.
    pub cut_x: f64,
    pub w_hat: f64,
    pub left: Vec<usize>,
    /// `V_D`
    pub strip: Vec<usize>,
    /// `D \ V_D`
    pub far: Vec<usize>,
    /// Idealized mode: right-hand nodes closer than one rescaled unit to the cut.
    pub excluded: Vec<usize>,
    /// Percolation mode: right-hand nodes inside the slab.
    pub b_set: Vec<usize>,
    /// Rescaled signed horizontal offset of every node from the midline.
    pub x_hat: Vec<f64>,
}

impl CutPartition {
    /// `D = V_D u (D \ V_D)`.
    pub fn right(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.strip.iter().chain(&self.far).copied().collect();
        r.sort_unstable();
        r
    }
}

fn check_w_hat(w_hat: f64, n: usize) -> Result<()> {
    let max = (n as f64).sqrt();
    if !(w_hat >= 1.0 - W_HAT_TOL && w_hat <= max * (1.0 + W_HAT_TOL)) {
        return Err(Error::invalid(format!("w_hat must lie in [1, sqrt(n)] = [1, {max}], got {w_hat}")));
    }
    Ok(())
}

fn x_hat_all(instance: &NetworkInstance) -> Vec<f64> {
    let (mid, unit) = (instance.side(), instance.nn_distance());
    instance.positions.iter().map(|p| (p.x - mid) / unit).collect()
}

fn in_strip(x_hat: f64, w_hat: f64) -> bool {
    w_hat > 1.0 + W_HAT_TOL && x_hat <= w_hat
}

/// Idealized-mode partition around the midline.
pub fn partition_nodes(instance: &NetworkInstance, w_hat: f64) -> Result<CutPartition> {
    check_w_hat(w_hat, instance.n_pairs)?;
    let x_hat = x_hat_all(instance);
    let mid = instance.side();
    let mut part = CutPartition {
        mode: CutMode::Idealized,
        cut_x: mid,
        w_hat,
        left: Vec::new(),
        strip: Vec::new(),
        far: Vec::new(),
        excluded: Vec::new(),
        b_set: Vec::new(),
        x_hat: Vec::new(),
    };
    for (i, p) in instance.positions.iter().enumerate() {
        let xh = x_hat[i];
        if p.x < mid {
            part.left.push(i);
        } else if xh < 1.0 {
            part.excluded.push(i);
        } else if in_strip(xh, w_hat) {
            part.strip.push(i);
        } else {
            part.far.push(i);
        }
    }
    part.x_hat = x_hat;
    check_halves(&part)?;
    Ok(part)
}

/// Percolation-mode partition: sides are decided by a certified cut. The
/// strip holds right-hand nodes with `x_hat <= w_hat` (including the slab
/// nodes left of the midline but right of the cut); it is empty for
/// `w_hat = 1`.
pub fn partition_with_cut(
    instance: &NetworkInstance,
    w_hat: f64,
    grid: &PercolationGrid,
    cut: &CutPolyline,
) -> Result<CutPartition> {
    check_w_hat(w_hat, instance.n_pairs)?;
    let x_hat = x_hat_all(instance);
    let mut part = CutPartition {
        mode: CutMode::Percolation,
        cut_x: instance.side(),
        w_hat,
        left: Vec::new(),
        strip: Vec::new(),
        far: Vec::new(),
        excluded: Vec::new(),
        b_set: Vec::new(),
        x_hat: Vec::new(),
    };
    for (i, p) in instance.positions.iter().enumerate() {
        if cut.is_left(grid, p) {
            part.left.push(i);
            continue;
        }
        if p.x <= grid.slab_right() {
            part.b_set.push(i);
        }
        if in_strip(x_hat[i], w_hat) {
            part.strip.push(i);
        } else {
            part.far.push(i);
        }
    }
    part.x_hat = x_hat;
    check_halves(&part)?;
    Ok(part)
}

fn check_halves(part: &CutPartition) -> Result<()> {
    if part.left.is_empty() {
        return Err(Error::EmptyHalf { side: "left" });
    }
    if part.strip.is_empty() && part.far.is_empty() {
        return Err(Error::EmptyHalf { side: "right" });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerSample {
    pub node: usize,
    /// `d_hat_i = sum_{k in S} r_hat_ik^-alpha`
    pub d_hat: f64,
    /// `x_hat_i^(2 - alpha)`; `None` when the node is not right of the midline.
    pub d_hat_approx: Option<f64>,
}

/// Exact received-power profile `d_hat` of `targets` from the left set.
pub fn power_profile(
    instance: &NetworkInstance,
    partition: &CutPartition,
    alpha: f64,
    targets: &[usize],
) -> Vec<PowerSample> {
    let unit = instance.nn_distance();
    let pos = &instance.positions;
    targets
        .iter()
        .map(|&i| {
            let d_hat = neumaier_sum(partition.left.iter().map(|&k| (pos[i].dist(&pos[k]) / unit).powf(-alpha)));
            let xh = partition.x_hat[i];
            PowerSample {
                node: i,
                d_hat,
                d_hat_approx: (xh > 0.0).then(|| xh.powf(2.0 - alpha)),
            }
        })
        .collect()
}

/// `SNR_tot = SNR_s * sum_{i in D \ V_D} d_hat_i`; zero when the far set is
/// empty.
pub fn snr_total(instance: &NetworkInstance, partition: &CutPartition, snr_s: f64, alpha: f64) -> f64 {
    let profile = power_profile(instance, partition, alpha, &partition.far);
    snr_s * neumaier_sum(profile.iter().map(|s| s.d_hat))
}

/// Received SNR of the slab nodes right of a percolation cut,
/// `SNR_s * sum_{i in B} d_hat_i`.
pub fn b_set_snr(instance: &NetworkInstance, partition: &CutPartition, snr_s: f64, alpha: f64) -> f64 {
    let profile = power_profile(instance, partition, alpha, &partition.b_set);
    snr_s * neumaier_sum(profile.iter().map(|s| s.d_hat))
}

/// Closed-form upper bound on `SNR_tot` (natural logarithms):
///
/// | alpha        | bound                                        |
/// |--------------|----------------------------------------------|
/// | 2            | `K1 SNR_s n (ln n)^3`                        |
/// | (2, 3)       | `K1 SNR_s n^(2 - alpha/2) (ln n)^2`          |
/// | 3            | `K1 SNR_s sqrt(n) (ln n)^3`                  |
/// | > 3          | `K1 SNR_s w_hat^(3 - alpha) sqrt(n) (ln n)^2` |
pub fn closed_form_snr_total_bound(snr_s: f64, n: usize, alpha: f64, w_hat: f64, k1: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::invalid("closed-form bound needs n >= 2"));
    }
    if !(k1 > 0.0) {
        return Err(Error::invalid("K1 must be > 0"));
    }
    let nf = n as f64;
    if (w_hat - nf.sqrt()).abs() <= W_HAT_TOL * nf.sqrt() {
        return Err(Error::TableNotApplicable);
    }
    let ln = nf.ln();
    let base = k1 * snr_s;
    Ok(if alpha == 2.0 {
        base * nf * ln.powi(3)
    } else if alpha < 3.0 {
        base * nf.powf(2.0 - alpha / 2.0) * ln.powi(2)
    } else if alpha == 3.0 {
        base * nf.sqrt() * ln.powi(3)
    } else {
        base * w_hat.powf(3.0 - alpha) * nf.sqrt() * ln.powi(2)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DofTerm {
    /// `|V_D| log2(1 + n^(1 + alpha (1/2 + delta)) SNR_s)`
    pub realized: f64,
    /// `(w_hat - 1) sqrt(n) ln n log2(1 + n^(1 + alpha (1/2 + delta)) SNR_s)`
    pub whp: f64,
    pub size_vd: usize,
}

pub fn dof_term(partition: &CutPartition, snr_s: f64, n: usize, alpha: f64, delta: f64) -> Result<DofTerm> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be > 0"));
    }
    let nf = n as f64;
    let per_node = (1.0 + nf.powf(1.0 + alpha * (0.5 + delta)) * snr_s).log2();
    let size_vd = partition.strip.len();
    Ok(DofTerm {
        realized: size_vd as f64 * per_node,
        whp: (partition.w_hat - 1.0) * nf.sqrt() * nf.ln() * per_node,
        size_vd,
    })
}

/// `n^epsilon SNR_tot`, converted to bits (`/ ln 2`) to bound `log2 det`.
pub fn power_term(snr_total: f64, n: usize, epsilon: f64) -> f64 {
    (n as f64).powf(epsilon) * snr_total / LN_2
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McLogdet {
    pub mean: f64,
    pub stderr: f64,
    pub per_trial: Vec<f64>,
    /// Trials dropped because the determinant was not finite.
    pub discarded: usize,
}

/// Monte-Carlo average over phase draws of `log2 det(I + SNR_s H H^*)` for the
/// rescaled left-to-right channel `H` with identity input covariance. Trial
/// `t` uses phase key `derive_seed(phase_seed, [PHASE, t])`.
pub fn mc_cutset_logdet(
    instance: &NetworkInstance,
    partition: &CutPartition,
    params: &PhysicalParams,
    trials: usize,
    phase_seed: u64,
) -> Result<McLogdet> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let snr_s = snr_short(params, instance.n_pairs, instance.area);
    let rx = partition.right();
    let per_trial: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let key = derive_seed(phase_seed, &[tag::PHASE, t as u64]);
            let h = channel_matrix(instance, params, &partition.left, &rx, key, true)?;
            Ok(log2_det_identity_plus(&h.entries, snr_s))
        })
        .collect::<Result<_>>()?;
    let discarded = per_trial.iter().filter(|v| v.is_none()).count();
    if discarded > 0 {
        log::warn!("{discarded} of {trials} log-det trials were not finite and were dropped");
    }
    let kept: Vec<f64> = per_trial.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::Numerical("every log-det trial failed".into()));
    }
    let (mean, stderr) = stats::mean_stderr(&kept);
    Ok(McLogdet {
        mean,
        stderr,
        per_trial: kept,
        discarded,
    })
}

/// Upper bound on the scaling exponent:
/// `1` if `beta >= alpha/2 - 1`; `2 - alpha/2 + beta` if `2 <= alpha < 3`;
/// `1/2 + beta` if `beta <= 0`; `1/2 + beta/(alpha - 2)` otherwise
/// (the last two for `alpha >= 3`).
pub fn upper_bound_exponent(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 3.0 && beta < 0.5 {
        // The classifier places alpha = 3 in the slow-decay row, this table in
        // the fast-decay rows. Both give 1/2 + beta there.
        log::debug!("alpha = 3: upper-bound rows 3/4 used where the classifier uses row 2");
    }
    Ok(if beta >= alpha / 2.0 - 1.0 {
        1.0
    } else if alpha < 3.0 {
        2.0 - alpha / 2.0 + beta
    } else if beta <= 0.0 {
        0.5 + beta
    } else {
        0.5 + beta / (alpha - 2.0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutsetOptions {
    pub constants: Constants,
    pub trials: usize,
    pub phase_seed: u64,
    pub mode: CutMode,
}

impl Default for CutsetOptions {
    fn default() -> Self {
        Self {
            constants: Constants::default(),
            trials: 20,
            phase_seed: 0,
            mode: CutMode::Idealized,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutsetReport {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub snr_s: f64,
    pub w_hat: f64,
    pub size_vd: usize,
    pub size_far: usize,
    pub size_excluded: usize,
    pub size_b: usize,
    /// Percolation mode only.
    pub b_set_snr: Option<f64>,
    pub dof_term: f64,
    pub dof_whp: f64,
    pub snr_total: f64,
    pub power_term: f64,
    pub mc_logdet: f64,
    pub mc_stderr: f64,
    /// `None` when `w_hat = sqrt(n)`, where the closed form does not apply.
    pub closed_form_bound: Option<f64>,
    pub trials: usize,
    pub discarded: usize,
    pub seed: u64,
    /// Every kept trial satisfied `log2 det <= dof_term + power_term`.
    pub chain_holds: bool,
    pub max_trial_logdet: f64,
}

impl CutsetReport {
    pub const CSV_HEADER: &'static str =
        "n,alpha,beta,w_hat,size_VD,dof_term,snr_total,power_term,mc_logdet,mc_stderr,closed_form_bound,trials,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            fmt17(self.alpha),
            fmt17(self.beta),
            fmt17(self.w_hat),
            self.size_vd,
            fmt17(self.dof_term),
            fmt17(self.snr_total),
            fmt17(self.power_term),
            fmt17(self.mc_logdet),
            fmt17(self.mc_stderr),
            self.closed_form_bound.map(fmt17).unwrap_or_else(|| "NA".into()),
            self.trials,
            self.seed,
        )
    }
}

/// Full cutset evaluation of one instance.
pub fn evaluate_cutset(
    instance: &NetworkInstance,
    params: &PhysicalParams,
    options: &CutsetOptions,
) -> Result<CutsetReport> {
    options.constants.validate()?;
    let n = instance.n_pairs;
    let alpha = params.alpha;
    let snr_s = snr_short(params, n, instance.area);
    let w_hat = select_cut_width(snr_s, n, alpha)?;
    let partition = match options.mode {
        CutMode::Idealized => partition_nodes(instance, w_hat)?,
        CutMode::Percolation => {
            let (grid, cut) = percolation_cut(instance, options.constants.c)?;
            let cut = cut.ok_or_else(|| Error::Experiment("no open crossing in the middle slab".into()))?;
            partition_with_cut(instance, w_hat, &grid, &cut)?
        }
    };
    let dof = dof_term(&partition, snr_s, n, alpha, options.constants.delta)?;
    let snr_tot = snr_total(instance, &partition, snr_s, alpha);
    let power = power_term(snr_tot, n, options.constants.epsilon);
    let mc = mc_cutset_logdet(instance, &partition, params, options.trials, options.phase_seed)?;
    let closed_form_bound = match closed_form_snr_total_bound(snr_s, n, alpha, w_hat, options.constants.k1) {
        Ok(b) => Some(b),
        Err(Error::TableNotApplicable) => None,
        Err(e) => return Err(e),
    };
    let max_trial_logdet = mc.per_trial.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CutsetReport {
        n,
        alpha,
        beta: snr_s.ln() / (n as f64).ln(),
        snr_s,
        w_hat,
        size_vd: dof.size_vd,
        size_far: partition.far.len(),
        size_excluded: partition.excluded.len(),
        size_b: partition.b_set.len(),
        b_set_snr: (partition.mode == CutMode::Percolation).then(|| b_set_snr(instance, &partition, snr_s, alpha)),
        dof_term: dof.realized,
        dof_whp: dof.whp,
        snr_total: snr_tot,
        power_term: power,
        mc_logdet: mc.mean,
        mc_stderr: mc.stderr,
        closed_form_bound,
        trials: mc.per_trial.len(),
        discarded: mc.discarded,
        seed: instance.seed,
        chain_holds: max_trial_logdet <= dof.realized + power,
        max_trial_logdet,
    })
}
