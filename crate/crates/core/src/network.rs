//! Random network instances, physical parameters and channel matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag, CounterStream};

/// How many reseeded attempts `generate_network` makes before giving up on a
/// draw with coincident nodes.
const MAX_PLACEMENT_ATTEMPTS: u64 = 16;

/// Link-budget parameters: transmit power `P` (W), noise density `N0` (W/Hz),
/// bandwidth `W` (Hz), path-loss exponent `alpha` and antenna/path-loss gain `G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub power: f64,
    pub noise_density: f64,
    pub bandwidth: f64,
    pub alpha: f64,
    pub gain: f64,
}

impl PhysicalParams {
    pub fn new(power: f64, noise_density: f64, bandwidth: f64, alpha: f64, gain: f64) -> Result<Self> {
        let p = Self {
            power,
            noise_density,
            bandwidth,
            alpha,
            gain,
        };
        p.validate()?;
        Ok(p)
    }

    /// `P = N0 = W = G = 1`.
    pub fn unit(alpha: f64) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, alpha, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        for (name, v) in [
            ("power", self.power),
            ("noise_density", self.noise_density),
            ("bandwidth", self.bandwidth),
            ("gain", self.gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Network area `A` for which `snr_short(self, n, A) == snr_s`.
    pub fn area_for_snr(&self, n: usize, snr_s: f64) -> Result<f64> {
        if n == 0 || !(snr_s > 0.0) {
            return Err(Error::invalid("area_for_snr needs n >= 1 and snr_s > 0"));
        }
        let ratio = self.gain * self.power / (self.noise_density * self.bandwidth * snr_s);
        Ok(n as f64 * ratio.powf(2.0 / self.alpha))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("path-loss exponent must be >= 2, got {alpha}")))
    }
}

/// A point in the plane, in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Destination,
}

/// One random draw of the network: `2n` nodes, `n` of them sources, each
/// source paired with one destination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    #[serde(rename = "n")]
    pub n_pairs: usize,
    #[serde(rename = "area_A")]
    pub area: f64,
    pub seed: u64,
    pub positions: Vec<Point>,
    pub roles: Vec<Role>,
    /// `pairing[i]` is the partner of node `i`; an involution that maps every
    /// source to a destination.
    pub pairing: Vec<usize>,
}

impl NetworkInstance {
    /// Build an instance from explicit data, checking every invariant.
    pub fn from_parts(
        n_pairs: usize,
        area: f64,
        seed: u64,
        positions: Vec<Point>,
        roles: Vec<Role>,
        pairing: Vec<usize>,
    ) -> Result<Self> {
        let inst = Self {
            n_pairs,
            area,
            seed,
            positions,
            roles,
            pairing,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_pairs;
        if n == 0 {
            return Err(Error::invalid("n_pairs must be >= 1"));
        }
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(Error::invalid(format!("area must be > 0, got {}", self.area)));
        }
        if self.positions.len() != 2 * n || self.roles.len() != 2 * n || self.pairing.len() != 2 * n {
            return Err(Error::invalid("positions, roles and pairing must all have 2n entries"));
        }
        let (w, h) = (self.width(), self.height());
        if let Some(p) = self
            .positions
            .iter()
            .find(|p| !(p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= h))
        {
            return Err(Error::invalid(format!("node at ({}, {}) outside the rectangle", p.x, p.y)));
        }
        let sources = self.roles.iter().filter(|r| **r == Role::Source).count();
        if sources != n {
            return Err(Error::invalid(format!("expected {n} sources, found {sources}")));
        }
        for (i, &j) in self.pairing.iter().enumerate() {
            if j >= 2 * n || self.pairing[j] != i || self.roles[i] == self.roles[j] {
                return Err(Error::invalid(format!("pairing is not a source/destination bijection at node {i}")));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// Side `sqrt(A)`; the rectangle is `2 sqrt(A)` wide and `sqrt(A)` high.
    pub fn side(&self) -> f64 {
        self.area.sqrt()
    }

    pub fn width(&self) -> f64 {
        2.0 * self.side()
    }

    pub fn height(&self) -> f64 {
        self.side()
    }

    /// Typical nearest-neighbour distance `sqrt(A/n)`.
    pub fn nn_distance(&self) -> f64 {
        (self.area / self.n_pairs as f64).sqrt()
    }

    /// Source node indices in increasing order.
    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Role::Source)
            .map(|(i, _)| i)
    }

    /// `(source, destination)` pairs ordered by source index.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.sources().map(|s| (s, self.pairing[s])).collect()
    }

    /// Distance between two nodes rescaled by `sqrt(A/n)`.
    pub fn rescaled_distance(&self, i: usize, k: usize) -> f64 {
        self.positions[i].dist(&self.positions[k]) / self.nn_distance()
    }

    /// Smallest rescaled distance between any two nodes (plane sweep on x).
    pub fn min_rescaled_separation(&self) -> f64 {
        let mut pts = self.positions.clone();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[j].x - pts[i].x >= best {
                    break;
                }
                best = best.min(pts[i].dist(&pts[j]));
            }
        }
        best / self.nn_distance()
    }

    /// Compare the realised minimum separation with the high-probability floor
    /// `n^-(1/2 + delta)`. Diagnostic only.
    pub fn separation_diagnostic(&self, delta: f64) -> SeparationDiagnostic {
        let min = self.min_rescaled_separation();
        let floor = (self.n_pairs as f64).powf(-(0.5 + delta));
        SeparationDiagnostic {
            min_rescaled_separation: min,
            floor,
            above_floor: min >= floor,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationDiagnostic {
    pub min_rescaled_separation: f64,
    pub floor: f64,
    pub above_floor: bool,
}

/// Draw `2n` i.i.d. uniform nodes in the `2 sqrt(A) x sqrt(A)` rectangle, pick
/// `n` of them as sources and pair sources with destinations uniformly at
/// random. Draws with coincident nodes are retried under `seed + attempt`.
pub fn generate_network(n_pairs: usize, area: f64, seed: u64) -> Result<NetworkInstance> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be >= 1"));
    }
    if !(area.is_finite() && area > 0.0) {
        return Err(Error::invalid(format!("area must be > 0, got {area}")));
    }
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let effective = seed.wrapping_add(attempt);
        let inst = draw(n_pairs, area, effective);
        if has_coincident_nodes(&inst.positions) {
            log::warn!("seed {effective}: coincident nodes, retrying with seed {}", effective.wrapping_add(1));
            continue;
        }
        return Ok(inst);
    }
    Err(Error::DegenerateInstance(format!(
        "coincident nodes in {MAX_PLACEMENT_ATTEMPTS} consecutive draws from seed {seed}"
    )))
}

fn draw(n: usize, area: f64, seed: u64) -> NetworkInstance {
    let mut rng = rng::substream(seed, &[tag::NETWORK]);
    let side = area.sqrt();
    let positions: Vec<Point> = (0..2 * n)
        .map(|_| {
            let x = rng.random::<f64>() * 2.0 * side;
            let y = rng.random::<f64>() * side;
            Point::new(x, y)
        })
        .collect();

    let mut order: Vec<usize> = (0..2 * n).collect();
    order.shuffle(&mut rng);
    let (src, dst) = order.split_at(n);
    let mut sources = src.to_vec();
    sources.sort_unstable();
    let mut destinations = dst.to_vec();
    destinations.shuffle(&mut rng);

    let mut roles = vec![Role::Destination; 2 * n];
    let mut pairing = vec![0; 2 * n];
    for (&s, &d) in sources.iter().zip(&destinations) {
        roles[s] = Role::Source;
        pairing[s] = d;
        pairing[d] = s;
    }
    NetworkInstance {
        n_pairs: n,
        area,
        seed,
        positions,
        roles,
        pairing,
    }
}

fn has_coincident_nodes(positions: &[Point]) -> bool {
    let mut keys: Vec<(u64, u64)> = positions.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
    keys.sort_unstable();
    keys.windows(2).any(|w| w[0] == w[1])
}

/// Nearest-neighbour SNR `G P / (N0 W (A/n)^(alpha/2))`.
pub fn snr_short(params: &PhysicalParams, n: usize, area: f64) -> f64 {
    let nn_sq = area / n as f64;
    params.gain * params.power / (params.noise_density * params.bandwidth * nn_sq.powf(params.alpha / 2.0))
}

/// Long-distance SNR `n^(1 - alpha/2) * SNR_s`.
pub fn snr_long(snr_s: f64, n: usize, alpha: f64) -> f64 {
    (n as f64).powf(1.0 - alpha / 2.0) * snr_s
}

/// Finite-`n` SNR exponent `ln(SNR_s) / ln(n)`.
pub fn beta_of(snr_s: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("beta_of needs n >= 2"));
    }
    if !(snr_s > 0.0) {
        return Err(Error::invalid(format!("snr_s must be > 0, got {snr_s}")));
    }
    Ok(snr_s.ln() / (n as f64).ln())
}

/// Channel gains between a transmit and a receive node set for one fading
/// realisation. Rows index receivers, columns transmitters.
#[derive(Clone, Debug)]
pub struct ChannelMatrix {
    pub rx: Vec<usize>,
    pub tx: Vec<usize>,
    pub entries: DMatrix<Complex64>,
    pub phase_seed: u64,
    pub rescaled: bool,
}

/// Phase of link `(rx, tx)` under `phase_seed`, uniform on `[0, 2 pi)`.
///
/// Keyed on node indices rather than matrix position, so any sub-matrix of the
/// same realisation sees identical phases.
pub fn link_phase(stream: &mut CounterStream, rx: usize, tx: usize) -> f64 {
    2.0 * PI * rng::unit_f64(stream.word(rx as u64, tx as u64))
}

/// Raw (`sqrt(G) r^-alpha/2 e^{j theta}`) or rescaled (`r_hat^-alpha/2 e^{j theta}`)
/// channel matrix from `tx_set` to `rx_set`.
pub fn channel_matrix(
    instance: &NetworkInstance,
    params: &PhysicalParams,
    tx_set: &[usize],
    rx_set: &[usize],
    phase_seed: u64,
    rescaled: bool,
) -> Result<ChannelMatrix> {
    params.validate()?;
    if tx_set.is_empty() || rx_set.is_empty() {
        return Err(Error::invalid("tx and rx sets must be non-empty"));
    }
    if tx_set.iter().any(|t| rx_set.contains(t)) {
        return Err(Error::invalid("tx and rx sets must be disjoint"));
    }
    let scale = if rescaled { instance.nn_distance() } else { 1.0 };
    let amp = if rescaled { 1.0 } else { params.gain.sqrt() };
    let half_alpha = params.alpha / 2.0;
    let mut stream = CounterStream::new(phase_seed);
    let mut entries = DMatrix::<Complex64>::zeros(rx_set.len(), tx_set.len());
    for (col, &k) in tx_set.iter().enumerate() {
        for (row, &i) in rx_set.iter().enumerate() {
            let r = instance.positions[i].dist(&instance.positions[k]) / scale;
            if r == 0.0 {
                return Err(Error::DegenerateInstance(format!("nodes {i} and {k} coincide")));
            }
            let theta = link_phase(&mut stream, i, k);
            entries[(row, col)] = Complex64::from_polar(amp * r.powf(-half_alpha), theta);
        }
    }
    Ok(ChannelMatrix {
        rx: rx_set.to_vec(),
        tx: tx_set.to_vec(),
        entries,
        phase_seed,
        rescaled,
    })
}
