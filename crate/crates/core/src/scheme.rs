//! Throughput of the multihop, hierarchical-cooperation and hybrid schemes.
//!
//! Multihop and hierarchical cooperation are closed-form. The hybrid scheme is
//! simulated: the rectangle is tiled with square cells holding `M` nodes on
//! average, every S-D line is routed cell by cell along its straight segment,
//! and each traversed cell hands the line to one of its nodes. Relay shares
//! use the realized per-node assignment counts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::network::{check_alpha, NetworkInstance};
use crate::regime::Scheme;
use crate::rng::{substream, tag};
use crate::stats::fmt17;

/// Relative slack when testing `snr_s <= n^(alpha/2 - 1)`, so points generated
/// as `n^beta` exactly on the boundary stay feasible.
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsUsed {
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub epsilon: f64,
}

impl From<&Constants> for ConstantsUsed {
    fn from(c: &Constants) -> Self {
        Self {
            k2: c.k2,
            k3: c.k3,
            k4: c.k4,
            epsilon: c.epsilon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThroughputEstimate {
    pub scheme: Scheme,
    /// Total throughput `T = n R` in bits/s/Hz.
    pub aggregate_t: f64,
    pub per_pair_r: f64,
    /// Flat index of the most loaded cell; only set for simulated schemes.
    pub bottleneck_cell: Option<usize>,
    pub constants_used: ConstantsUsed,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("{name} must be a positive finite number, got {v}")));
    }
    Ok(())
}

/// `T = sqrt(n) log2(1 + SNR_s / (1 + K2 SNR_s))`.
pub fn multihop_throughput(n: usize, snr_s: f64, constants: &Constants) -> Result<ThroughputEstimate> {
    check_n(n)?;
    check_positive("snr_s", snr_s)?;
    check_positive("K2", constants.k2)?;
    let nf = n as f64;
    let t = nf.sqrt() * (1.0 + snr_s / (1.0 + constants.k2 * snr_s)).log2();
    Ok(ThroughputEstimate {
        scheme: Scheme::Multihop,
        aggregate_t: t,
        per_pair_r: t / nf,
        bottleneck_cell: None,
        constants_used: constants.into(),
    })
}

/// `T = K3 n^(1-eps) log2(1 + SNR_l)` with `SNR_l = n^(1 - alpha/2) SNR_s`.
///
/// The bursty variant runs the scheme a fraction `f = SNR_l` of the time at
/// power `1/f` when `SNR_l < 1`, giving `T = f K3 n^(1-eps)`.
pub fn hc_throughput(
    n: usize,
    snr_s: f64,
    alpha: f64,
    constants: &Constants,
    bursty: bool,
) -> Result<ThroughputEstimate> {
    check_n(n)?;
    check_alpha(alpha)?;
    check_positive("snr_s", snr_s)?;
    check_positive("epsilon", constants.epsilon)?;
    check_positive("K3", constants.k3)?;
    let nf = n as f64;
    let snr_l = nf.powf(1.0 - alpha / 2.0) * snr_s;
    let base = constants.k3 * nf.powf(1.0 - constants.epsilon);
    let (scheme, t) = if bursty && snr_l < 1.0 {
        let duty = snr_l;
        (Scheme::BurstyHierarchicalCooperation, duty * base * (1.0 + snr_l / duty).log2())
    } else {
        (Scheme::HierarchicalCooperation, base * (1.0 + snr_l).log2())
    };
    Ok(ThroughputEstimate {
        scheme,
        aggregate_t: t,
        per_pair_r: t / nf,
        bottleneck_cell: None,
        constants_used: constants.into(),
    })
}

/// Nodes per cell `M = round(SNR_s^(1/(alpha/2 - 1)))`, clamped to `[1, n]`.
/// Defined only for `alpha > 2` and `1 < SNR_s <= n^(alpha/2 - 1)`.
pub fn hybrid_cell_size(snr_s: f64, alpha: f64, n: usize) -> Result<usize> {
    check_alpha(alpha)?;
    check_n(n)?;
    check_positive("snr_s", snr_s)?;
    if alpha <= 2.0 {
        return Err(Error::OutOfRegime(format!("alpha = {alpha} must exceed 2")));
    }
    let knee = (n as f64).powf(alpha / 2.0 - 1.0);
    if snr_s <= 1.0 {
        return Err(Error::OutOfRegime(format!("SNR_s = {snr_s} <= 1; use multihop")));
    }
    if snr_s > knee * (1.0 + FEASIBILITY_TOL) {
        return Err(Error::OutOfRegime(format!(
            "SNR_s = {snr_s} > n^(alpha/2-1) = {knee}; use hierarchical cooperation"
        )));
    }
    let m = snr_s.powf(1.0 / (alpha / 2.0 - 1.0)).round();
    Ok((m as usize).clamp(1, n))
}

/// Square cells of area `M A / n` tiling the `2 sqrt(A) x sqrt(A)` rectangle.
/// Cells on the top and right edges are partial when the side does not divide
/// the rectangle. Cells are indexed `row * columns + col`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellGrid {
    pub cell_side: f64,
    pub columns: usize,
    pub rows: usize,
    pub m_target: usize,
    pub cell_of_node: Vec<usize>,
    pub nodes_of_cell: Vec<Vec<usize>>,
    /// Nodes eligible to relay a line through each cell: the cell's own nodes,
    /// or for an empty cell the nodes of every occupied cell at the smallest
    /// 4-neighbour distance.
    pub relay_pool: Vec<Vec<usize>>,
}

impl CellGrid {
    pub fn cell_count(&self) -> usize {
        self.columns * self.rows
    }

    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.columns, cell % self.columns)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.columns + col
    }

    pub fn mean_occupancy(&self) -> f64 {
        self.cell_of_node.len() as f64 / self.cell_count() as f64
    }

    pub fn empty_cells(&self) -> usize {
        self.nodes_of_cell.iter().filter(|c| c.is_empty()).count()
    }

    fn coords(&self, p: &crate::Point) -> (f64, f64) {
        (p.x / self.cell_side, p.y / self.cell_side)
    }

    fn cell_at(&self, cx: f64, cy: f64) -> (usize, usize) {
        let col = (cx.floor().max(0.0) as usize).min(self.columns - 1);
        let row = (cy.floor().max(0.0) as usize).min(self.rows - 1);
        (row, col)
    }

    /// 4-neighbours in the order left, right, down, up.
    fn neighbours(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.row_col(cell);
        let left = (c > 0).then(|| self.index(r, c - 1));
        let right = (c + 1 < self.columns).then(|| self.index(r, c + 1));
        let down = (r > 0).then(|| self.index(r - 1, c));
        let up = (r + 1 < self.rows).then(|| self.index(r + 1, c));
        [left, right, down, up].into_iter().flatten()
    }

    /// Relay pools of every cell, by breadth-first search over 4-neighbours
    /// that stops at the first layer holding an occupied cell.
    fn compute_relay_pools(&self) -> Vec<Vec<usize>> {
        let count = self.cell_count();
        let mut pools = self.nodes_of_cell.clone();
        if self.nodes_of_cell.iter().all(Vec::is_empty) {
            return pools;
        }
        let mut seen = vec![false; count];
        let mut touched = Vec::new();
        for start in (0..count).filter(|&c| self.nodes_of_cell[c].is_empty()) {
            let mut layer = vec![start];
            seen[start] = true;
            touched.push(start);
            loop {
                let hosts: Vec<usize> = layer.iter().copied().filter(|&c| !self.nodes_of_cell[c].is_empty()).collect();
                if !hosts.is_empty() {
                    pools[start] = hosts.iter().flat_map(|&c| self.nodes_of_cell[c].iter().copied()).collect();
                    break;
                }
                let mut next = Vec::new();
                for &cur in &layer {
                    for nb in self.neighbours(cur) {
                        if !seen[nb] {
                            seen[nb] = true;
                            touched.push(nb);
                            next.push(nb);
                        }
                    }
                }
                layer = next;
            }
            for c in touched.drain(..) {
                seen[c] = false;
            }
        }
        pools
    }
}

pub fn build_cell_grid(instance: &NetworkInstance, m: usize) -> Result<CellGrid> {
    let n = instance.n_pairs;
    if m == 0 || m > n {
        return Err(Error::invalid(format!("cell size M must lie in [1, n = {n}], got {m}")));
    }
    let cell_side = (m as f64 * instance.area / n as f64).sqrt();
    // Guard the ceil against round-off when the side divides the rectangle.
    let count = |len: f64| ((len / cell_side) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let columns = count(instance.width());
    let rows = count(instance.height());
    let mut grid = CellGrid {
        cell_side,
        columns,
        rows,
        m_target: m,
        cell_of_node: Vec::with_capacity(instance.node_count()),
        nodes_of_cell: vec![Vec::new(); columns * rows],
        relay_pool: Vec::new(),
    };
    for (i, p) in instance.positions.iter().enumerate() {
        let (cx, cy) = grid.coords(p);
        let (r, c) = grid.cell_at(cx, cy);
        let cell = grid.index(r, c);
        grid.cell_of_node.push(cell);
        grid.nodes_of_cell[cell].push(i);
    }
    grid.relay_pool = grid.compute_relay_pools();
    Ok(grid)
}

/// Cells crossed by the segment `a -> b`, in order: a 4-connected supercover
/// where a step that could go either way goes horizontally first.
pub fn supercover_path(grid: &CellGrid, a: &crate::Point, b: &crate::Point) -> Vec<usize> {
    let (ax, ay) = grid.coords(a);
    let (bx, by) = grid.coords(b);
    let (mut r, mut c) = grid.cell_at(ax, ay);
    let (er, ec) = grid.cell_at(bx, by);
    let (dx, dy) = (bx - ax, by - ay);
    let step_c: isize = if ec > c { 1 } else { -1 };
    let step_r: isize = if er > r { 1 } else { -1 };
    // Parametric distance to the next vertical / horizontal grid line.
    let t_next = |pos: f64, cell: usize, step: isize, d: f64| {
        if d == 0.0 {
            f64::INFINITY
        } else {
            let boundary = if step > 0 { cell as f64 + 1.0 } else { cell as f64 };
            (boundary - pos) / d
        }
    };
    let mut t_max_x = t_next(ax, c, step_c, dx);
    let mut t_max_y = t_next(ay, r, step_r, dy);
    let t_delta_x = if dx == 0.0 { f64::INFINITY } else { 1.0 / dx.abs() };
    let t_delta_y = if dy == 0.0 { f64::INFINITY } else { 1.0 / dy.abs() };

    let mut path = Vec::with_capacity(r.abs_diff(er) + c.abs_diff(ec) + 1);
    path.push(grid.index(r, c));
    while (r, c) != (er, ec) {
        let horizontal = if c == ec {
            false
        } else if r == er {
            true
        } else {
            t_max_x <= t_max_y
        };
        if horizontal {
            c = c.wrapping_add_signed(step_c);
            t_max_x += t_delta_x;
        } else {
            r = r.wrapping_add_signed(step_r);
            t_max_y += t_delta_y;
        }
        path.push(grid.index(r, c));
    }
    path
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelayPlan {
    /// `(source, destination)` per line, ordered by source.
    pub pairs: Vec<(usize, usize)>,
    /// Cell sequence of each line.
    pub paths: Vec<Vec<usize>>,
    /// Node handling each step of each line. Equal in length to the path,
    /// except for single-cell paths, which carry `[source, destination]`.
    pub assignments: Vec<Vec<usize>>,
    /// Number of lines whose path contains each cell.
    pub cell_loads: Vec<u32>,
    /// Number of assignments of each node.
    pub node_loads: Vec<u32>,
    /// Assignments that had to be moved out of an empty cell.
    pub reroutes: usize,
}

impl RelayPlan {
    pub fn max_cell_load(&self) -> u32 {
        self.cell_loads.iter().copied().max().unwrap_or(0)
    }

    pub fn max_node_load(&self) -> u32 {
        self.node_loads.iter().copied().max().unwrap_or(0)
    }

    /// Most loaded cell; the lowest index wins ties.
    pub fn bottleneck_cell(&self) -> Option<usize> {
        let max = self.max_cell_load();
        self.cell_loads.iter().position(|&l| l == max)
    }
}

/// Route every S-D line along its supercover and hand each step to a node.
/// Intermediate cells draw a uniform node of their relay pool from a substream
/// keyed by `seed`; for an empty cell that pool lies in the nearest occupied
/// cells.
pub fn route_sd_lines(grid: &CellGrid, instance: &NetworkInstance, seed: u64) -> Result<RelayPlan> {
    if grid.cell_of_node.len() != instance.node_count() {
        return Err(Error::invalid("cell grid was built for a different instance"));
    }
    let mut rng = substream(seed, &[tag::ROUTE]);
    let pairs = instance.pairs();
    let mut plan = RelayPlan {
        pairs: pairs.clone(),
        paths: Vec::with_capacity(pairs.len()),
        assignments: Vec::with_capacity(pairs.len()),
        cell_loads: vec![0; grid.cell_count()],
        node_loads: vec![0; instance.node_count()],
        reroutes: 0,
    };
    for &(src, dst) in &pairs {
        let path = supercover_path(grid, &instance.positions[src], &instance.positions[dst]);
        let assigned = if path.len() == 1 {
            vec![src, dst]
        } else {
            let last = path.len() - 1;
            let mut assigned = Vec::with_capacity(path.len());
            for (k, &cell) in path.iter().enumerate() {
                let node = if k == 0 {
                    src
                } else if k == last {
                    dst
                } else {
                    if grid.nodes_of_cell[cell].is_empty() {
                        plan.reroutes += 1;
                    }
                    let pool = &grid.relay_pool[cell];
                    pool[rng.random_range(0..pool.len())]
                };
                assigned.push(node);
            }
            assigned
        };
        for &cell in &path {
            plan.cell_loads[cell] += 1;
        }
        for &node in &assigned {
            plan.node_loads[node] += 1;
        }
        plan.paths.push(path);
        plan.assignments.push(assigned);
    }
    Ok(plan)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HybridEstimate {
    pub estimate: ThroughputEstimate,
    pub m: usize,
    /// `(K3/4) M^-eps log2(1 + M^(1 - alpha/2) SNR_s)`
    pub relay_rate: f64,
    pub min_pair_rate: f64,
    pub max_cell_load: u32,
    pub max_node_load: u32,
    pub reroutes: usize,
    /// `n K4 sqrt(M) n^(-1/2 - eps)`
    pub analytic_t: f64,
}

/// Analytic hybrid aggregate `n K4 sqrt(M) n^(-1/2 - eps)`.
pub fn hybrid_analytic_throughput(n: usize, m: usize, constants: &Constants) -> f64 {
    let nf = n as f64;
    nf * constants.k4 * (m as f64).sqrt() * nf.powf(-0.5 - constants.epsilon)
}

/// Rates of a routed plan. Each node splits its relay rate evenly over its
/// assignments; a pair runs at the smallest share along its line.
pub fn hybrid_throughput(
    plan: &RelayPlan,
    m: usize,
    n: usize,
    snr_s: f64,
    alpha: f64,
    constants: &Constants,
) -> Result<HybridEstimate> {
    check_n(n)?;
    check_alpha(alpha)?;
    check_positive("snr_s", snr_s)?;
    check_positive("epsilon", constants.epsilon)?;
    check_positive("K3", constants.k3)?;
    if m == 0 || m > n {
        return Err(Error::invalid(format!("cell size M must lie in [1, n = {n}], got {m}")));
    }
    if plan.pairs.len() != n {
        return Err(Error::invalid(format!("plan has {} lines, expected n = {n}", plan.pairs.len())));
    }
    let mf = m as f64;
    let relay_rate = constants.k3 / 4.0 * mf.powf(-constants.epsilon) * (1.0 + mf.powf(1.0 - alpha / 2.0) * snr_s).log2();
    let rates: Vec<f64> = plan
        .assignments
        .iter()
        .map(|nodes| {
            let worst = nodes.iter().map(|&v| plan.node_loads[v]).max().unwrap_or(1).max(1);
            relay_rate / worst as f64
        })
        .collect();
    let aggregate = crate::stats::neumaier_sum(rates.iter().copied());
    let min_pair_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(HybridEstimate {
        estimate: ThroughputEstimate {
            scheme: Scheme::Hybrid,
            aggregate_t: aggregate,
            per_pair_r: aggregate / n as f64,
            bottleneck_cell: plan.bottleneck_cell(),
            constants_used: constants.into(),
        },
        m,
        relay_rate,
        min_pair_rate,
        max_cell_load: plan.max_cell_load(),
        max_node_load: plan.max_node_load(),
        reroutes: plan.reroutes,
        analytic_t: hybrid_analytic_throughput(n, m, constants),
    })
}

/// Build the grid, route, and evaluate one instance. `m` overrides the cell
/// size chosen by [`hybrid_cell_size`].
pub fn simulate_hybrid(
    instance: &NetworkInstance,
    snr_s: f64,
    alpha: f64,
    constants: &Constants,
    route_seed: u64,
    m: Option<usize>,
) -> Result<HybridEstimate> {
    let n = instance.n_pairs;
    let m = match m {
        Some(m) => m,
        None => hybrid_cell_size(snr_s, alpha, n)?,
    };
    let grid = build_cell_grid(instance, m)?;
    let plan = route_sd_lines(&grid, instance, route_seed)?;
    hybrid_throughput(&plan, m, n, snr_s, alpha, constants)
}

/// One row of the scheme-comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeRow {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub scheme: Scheme,
    pub m: Option<usize>,
    pub aggregate_t: f64,
    pub per_pair_r: f64,
    pub max_cell_load: Option<u32>,
    pub reroutes: Option<usize>,
    pub seed: u64,
}

impl SchemeRow {
    pub const CSV_HEADER: &'static str = "n,alpha,beta,scheme,M,aggregate_T,per_pair_R,max_cell_load,reroutes,seed";

    pub fn closed_form(n: usize, alpha: f64, beta: f64, est: &ThroughputEstimate, seed: u64) -> Self {
        Self {
            n,
            alpha,
            beta,
            scheme: est.scheme,
            m: None,
            aggregate_t: est.aggregate_t,
            per_pair_r: est.per_pair_r,
            max_cell_load: None,
            reroutes: None,
            seed,
        }
    }

    pub fn hybrid(n: usize, alpha: f64, beta: f64, est: &HybridEstimate, seed: u64) -> Self {
        Self {
            n,
            alpha,
            beta,
            scheme: Scheme::Hybrid,
            m: Some(est.m),
            aggregate_t: est.estimate.aggregate_t,
            per_pair_r: est.estimate.per_pair_r,
            max_cell_load: Some(est.max_cell_load),
            reroutes: Some(est.reroutes),
            seed,
        }
    }

    pub fn csv_row(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n,
            fmt17(self.alpha),
            fmt17(self.beta),
            self.scheme.as_str(),
            opt(self.m),
            fmt17(self.aggregate_t),
            fmt17(self.per_pair_r),
            opt(self.max_cell_load),
            opt(self.reroutes),
            self.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_network, Point, Role};

    fn consts() -> Constants {
        Constants::default()
    }

    fn two_pair_instance(pts: &[(f64, f64)], n: usize, area: f64) -> NetworkInstance {
        let positions = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let roles = [Role::Source, Role::Destination].repeat(n);
        let pairing = (0..2 * n).map(|i| i ^ 1).collect();
        NetworkInstance::from_parts(n, area, 0, positions, roles, pairing).unwrap()
    }

    #[test]
    fn multihop_examples() {
        let t = multihop_throughput(100, 1.0, &consts()).unwrap();
        assert!((t.aggregate_t - 10.0 * 1.5f64.log2()).abs() < 1e-12);
        assert!((t.aggregate_t - 5.85).abs() < 0.01);
        assert!((t.per_pair_r - t.aggregate_t / 100.0).abs() < 1e-15);
        // high-SNR per-hop limit log2(1 + 1/K2)
        let t = multihop_throughput(1, 1e12, &consts()).unwrap();
        assert!((t.aggregate_t - 1.0).abs() < 1e-9);
        let a = multihop_throughput(64, 0.7, &consts()).unwrap().aggregate_t;
        let b = multihop_throughput(4096, 0.7, &consts()).unwrap().aggregate_t;
        assert!(((b / a).ln() / 64f64.ln() - 0.5).abs() < 1e-12);
        let bad = Constants { k2: 0.0, ..consts() };
        assert!(multihop_throughput(4, 1.0, &bad).is_err());
    }

    #[test]
    fn hc_examples() {
        // boundary: n^(1 - alpha/2) snr_s = 1
        let t = hc_throughput(256, 16.0, 3.0, &consts(), false).unwrap();
        assert!((t.aggregate_t - 256f64.powf(0.95)).abs() < 1e-9);
        // alpha = 2: log2(1 + snr_s)
        let t = hc_throughput(256, 1.0, 2.0, &consts(), false).unwrap();
        assert!((t.aggregate_t - 256f64.powf(0.95)).abs() < 1e-9);
        assert!((t.aggregate_t - 194.0).abs() < 0.1);
        let a = hc_throughput(1 << 8, 1.0, 2.0, &consts(), false).unwrap().aggregate_t;
        let b = hc_throughput(1 << 14, 1.0, 2.0, &consts(), false).unwrap().aggregate_t;
        assert!(((b / a).ln() / 64f64.ln() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn bursty_hc_exponent() {
        let (alpha, beta) = (4.0, 0.5);
        let t = |n: usize| {
            hc_throughput(n, (n as f64).powf(beta), alpha, &consts(), true)
                .unwrap()
                .aggregate_t
        };
        let slope = (t(1 << 14) / t(1 << 8)).ln() / 64f64.ln();
        assert!((slope - (2.0 - alpha / 2.0 + beta - 0.05)).abs() < 1e-9);
        let est = hc_throughput(1024, 1.0, 4.0, &consts(), true).unwrap();
        assert_eq!(est.scheme, Scheme::BurstyHierarchicalCooperation);
        // not power-limited: identical to the plain scheme
        let a = hc_throughput(64, 1e4, 4.0, &consts(), true).unwrap();
        let b = hc_throughput(64, 1e4, 4.0, &consts(), false).unwrap();
        assert_eq!(a.aggregate_t, b.aggregate_t);
        // same order as the plain formula in the power-limited range: f vs log2(1 + f)
        let plain = hc_throughput(1024, 1.0, 4.0, &consts(), false).unwrap();
        let f = 1.0 / 1024.0;
        assert!((est.aggregate_t / plain.aggregate_t - f / (1.0f64 + f).log2()).abs() < 1e-12);
    }

    #[test]
    fn cell_size_examples() {
        assert_eq!(hybrid_cell_size(16.0, 4.0, 1024).unwrap(), 16);
        assert_eq!(hybrid_cell_size(100.0, 6.0, 1024).unwrap(), 10);
        assert!(16f64.powf(-1.0) * 16.0 >= 1.0);
        assert!(matches!(hybrid_cell_size(1.0, 4.0, 1024), Err(Error::OutOfRegime(_))));
        assert!(matches!(hybrid_cell_size(2000.0, 4.0, 1024), Err(Error::OutOfRegime(_))));
        assert!(matches!(hybrid_cell_size(2.0, 2.0, 1024), Err(Error::OutOfRegime(_))));
        // boundary beta = alpha/2 - 1 stays feasible and clamps to n
        let n = 256usize;
        assert_eq!(hybrid_cell_size((n as f64).powf(1.0), 4.0, n).unwrap(), n);
    }

    #[test]
    fn grid_extremes() {
        let inst = generate_network(64, 64.0, 1).unwrap();
        let g = build_cell_grid(&inst, 64).unwrap();
        assert_eq!((g.columns, g.rows), (2, 1));
        let g = build_cell_grid(&inst, 1).unwrap();
        assert_eq!((g.columns, g.rows), (16, 8));
        assert!((g.mean_occupancy() - 1.0).abs() < 1e-12);
        assert_eq!(g.nodes_of_cell.iter().map(Vec::len).sum::<usize>(), 128);
        for (i, &cell) in g.cell_of_node.iter().enumerate() {
            assert!(g.nodes_of_cell[cell].contains(&i));
        }
        assert!(build_cell_grid(&inst, 0).is_err());
        assert!(build_cell_grid(&inst, 65).is_err());
    }

    #[test]
    fn occupancy_mean_matches_target() {
        let mut means = Vec::new();
        for seed in 0..100 {
            let inst = generate_network(1024, 1024.0, seed).unwrap();
            let g = build_cell_grid(&inst, 16).unwrap();
            let occ: Vec<f64> = g.nodes_of_cell.iter().map(|c| c.len() as f64).collect();
            means.push(occ.iter().sum::<f64>() / occ.len() as f64);
        }
        let (m, se) = crate::stats::mean_stderr(&means);
        // 2048 nodes over 16 x 8 full cells: exactly 16 per cell on average
        assert!((m - 16.0).abs() <= 3.0 * se + 1e-9, "{m} +- {se}");
    }

    #[test]
    fn supercover_straight_and_same_cell() {
        // n = 8, A = 8, M = 1: unit cells, 6 x 3 grid (sqrt(8) ~ 2.83)
        let inst = two_pair_instance(
            &[
                (0.5, 0.5), (2.5, 0.5), // two cells apart horizontally
                (1.2, 1.2), (1.8, 1.7), // same cell
                (0.5, 2.5), (0.5, 0.2), // vertical
                (5.0, 2.0), (3.2, 0.3), // diagonal
                (4.1, 1.1), (4.2, 1.2),
                (5.5, 2.7), (0.1, 0.1),
                (2.2, 2.2), (3.3, 2.4),
                (4.4, 0.4), (5.6, 0.6),
            ],
            8,
            8.0,
        );
        let g = build_cell_grid(&inst, 1).unwrap();
        assert_eq!((g.columns, g.rows), (6, 3));
        let p = |i: usize| inst.positions[i];
        assert_eq!(supercover_path(&g, &p(0), &p(1)), vec![0, 1, 2]);
        assert_eq!(supercover_path(&g, &p(2), &p(3)), vec![g.index(1, 1)]);
        assert_eq!(
            supercover_path(&g, &p(4), &p(5)),
            vec![g.index(2, 0), g.index(1, 0), g.index(0, 0)]
        );
        let plan = route_sd_lines(&g, &inst, 3).unwrap();
        let same = plan.pairs.iter().position(|&(s, _)| s == 2 || s == 3).unwrap();
        assert_eq!(plan.paths[same].len(), 1);
        let (s, d) = plan.pairs[same];
        assert_eq!(plan.assignments[same], vec![s, d]);
    }

    #[test]
    fn supercover_diagonal_tie_goes_horizontal() {
        let inst = generate_network(8, 8.0, 0).unwrap();
        let g = build_cell_grid(&inst, 1).unwrap();
        // exact corner crossing at (1, 1)
        let path = supercover_path(&g, &Point::new(0.5, 0.5), &Point::new(1.5, 1.5));
        assert_eq!(path, vec![g.index(0, 0), g.index(0, 1), g.index(1, 1)]);
    }

    fn is_four_connected(g: &CellGrid, path: &[usize]) -> bool {
        path.windows(2).all(|w| {
            let (a, b) = (g.row_col(w[0]), g.row_col(w[1]));
            a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1
        })
    }

    #[test]
    fn plan_invariants_on_random_instances() {
        for seed in 0..10 {
            let inst = generate_network(512, 512.0, seed).unwrap();
            for m in [1, 4, 16] {
                let g = build_cell_grid(&inst, m).unwrap();
                let plan = route_sd_lines(&g, &inst, seed).unwrap();
                let total: usize = plan.paths.iter().map(Vec::len).sum();
                assert_eq!(plan.cell_loads.iter().map(|&l| l as usize).sum::<usize>(), total);
                for (k, (&(s, d), path)) in plan.pairs.iter().zip(&plan.paths).enumerate() {
                    let a = &plan.assignments[k];
                    assert_eq!((a[0], *a.last().unwrap()), (s, d));
                    assert_eq!(path[0], g.cell_of_node[s]);
                    assert_eq!(*path.last().unwrap(), g.cell_of_node[d]);
                    assert!(is_four_connected(&g, path));
                    let (r0, c0) = g.row_col(path[0]);
                    let (r1, c1) = g.row_col(*path.last().unwrap());
                    assert_eq!(path.len(), r0.abs_diff(r1) + c0.abs_diff(c1) + 1);
                }
                let mut loads = vec![0u32; inst.node_count()];
                plan.assignments.iter().flatten().for_each(|&v| loads[v] += 1);
                assert_eq!(loads, plan.node_loads);
            }
        }
    }

    #[test]
    fn routing_is_deterministic() {
        let inst = generate_network(256, 256.0, 7).unwrap();
        let g = build_cell_grid(&inst, 4).unwrap();
        assert_eq!(route_sd_lines(&g, &inst, 1).unwrap(), route_sd_lines(&g, &inst, 1).unwrap());
    }

    #[test]
    fn empty_cells_are_rerouted() {
        // M = 1 leaves about a third of the cells empty
        let inst = generate_network(1024, 1024.0, 2).unwrap();
        let g = build_cell_grid(&inst, 1).unwrap();
        assert!(g.empty_cells() > 0);
        let manhattan = |a: usize, b: usize| {
            let (ra, ca) = g.row_col(a);
            let (rb, cb) = g.row_col(b);
            ra.abs_diff(rb) + ca.abs_diff(cb)
        };
        for cell in 0..g.cell_count() {
            let best = (0..g.cell_count())
                .filter(|&c| !g.nodes_of_cell[c].is_empty())
                .map(|c| manhattan(cell, c))
                .min()
                .unwrap();
            let mut expect: Vec<usize> = (0..g.cell_count())
                .filter(|&c| manhattan(cell, c) == best)
                .flat_map(|c| g.nodes_of_cell[c].iter().copied())
                .collect();
            let mut got = g.relay_pool[cell].clone();
            expect.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, expect);
        }
        let plan = route_sd_lines(&g, &inst, 0).unwrap();
        assert!(plan.reroutes > 0);
        // with M = 64 empty cells are essentially impossible
        let g = build_cell_grid(&inst, 64).unwrap();
        assert_eq!(route_sd_lines(&g, &inst, 0).unwrap().reroutes, 0);
    }

    #[test]
    fn hybrid_rates() {
        let inst = generate_network(1024, 1024.0, 5).unwrap();
        let est = simulate_hybrid(&inst, 16.0, 4.0, &consts(), 1, None).unwrap();
        assert_eq!(est.m, 16);
        // log term is log2(1 + 16^-1 * 16) = 1
        assert!((est.relay_rate - 0.25 * 16f64.powf(-0.05)).abs() < 1e-15);
        assert!((est.estimate.aggregate_t - 1024.0 * est.estimate.per_pair_r).abs() < 1e-9);
        assert!(est.min_pair_rate <= est.estimate.per_pair_r);
        assert!((est.min_pair_rate - est.relay_rate / est.max_node_load as f64).abs() < 1e-15);
        let m1 = simulate_hybrid(&inst, 16.0, 4.0, &consts(), 1, Some(1)).unwrap();
        assert!((m1.relay_rate - 17f64.log2() / 4.0).abs() < 1e-12);
        assert!(matches!(
            simulate_hybrid(&inst, 0.5, 4.0, &consts(), 1, None),
            Err(Error::OutOfRegime(_))
        ));
    }

    #[test]
    fn analytic_rate_monotone_in_m() {
        let mut last = 0.0;
        for m in 1..=256 {
            let t = hybrid_analytic_throughput(256, m, &consts());
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn csv_rows() {
        let est = multihop_throughput(64, 1.0, &consts()).unwrap();
        let row = SchemeRow::closed_form(64, 4.0, 0.0, &est, 9).csv_row();
        assert!(row.starts_with("64,") && row.contains(",multihop,NA,") && row.ends_with(",NA,NA,9"));
        assert_eq!(row.split(',').count(), SchemeRow::CSV_HEADER.split(',').count());
    }
}
