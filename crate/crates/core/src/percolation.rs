//! Node-free cuts through the middle of the network by site percolation.
//!
//! The middle slab is tiled with square cells of side `c sqrt(A/n)`. A cell is
//! closed when it holds at least one node. An open top-bottom crossing
//! (4-adjacency) yields a cut that keeps every node at least half a cell away;
//! its absence is equivalent to a closed left-right crossing (8-adjacency).
//!
//! Grid rows are indexed from `y = 0` upward and columns from the slab's left
//! edge; "top" is row 0. Cells are `(lo, hi]` half-open so a node exactly on a
//! shared edge belongs to the cell with the smaller index.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{generate_network, NetworkInstance, Point};
use crate::rng::{derive_seed, tag};
use crate::stats;

/// `c^2` must stay below this for the crossing-failure bound to decay.
pub fn decay_threshold() -> f64 {
    1.0 / (7.0 * std::f64::consts::E.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Open,
    Closed,
}

pub type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercolationGrid {
    pub c: f64,
    pub cell_side: f64,
    /// x-coordinate of the slab's left edge.
    pub slab_left: f64,
    pub slab_columns: usize,
    pub total_rows: usize,
    /// Row-major, `total_rows x slab_columns`.
    pub states: Vec<CellState>,
    pub occupancy: Vec<u32>,
}

/// Index of the `(lo, hi]` bin holding `offset`, clamped to `[0, count)`.
fn bin(offset: f64, side: f64, count: usize) -> Option<usize> {
    if offset < 0.0 {
        return None;
    }
    let idx = ((offset / side).ceil() as i64 - 1).max(0) as usize;
    (idx < count).then_some(idx)
}

impl PercolationGrid {
    pub fn state(&self, row: usize, col: usize) -> CellState {
        self.states[row * self.slab_columns + col]
    }

    pub fn is_open(&self, (row, col): Cell) -> bool {
        self.state(row, col) == CellState::Open
    }

    pub fn slab_right(&self) -> f64 {
        self.slab_left + self.slab_columns as f64 * self.cell_side
    }

    pub fn closed_fraction(&self) -> f64 {
        self.states.iter().filter(|s| **s == CellState::Closed).count() as f64 / self.states.len() as f64
    }

    /// Cell holding `p`, if `p` lies inside the slab.
    pub fn cell_of(&self, p: &Point) -> Option<Cell> {
        if p.x > self.slab_right() {
            return None;
        }
        let col = bin(p.x - self.slab_left, self.cell_side, self.slab_columns)?;
        // Points on the slab's left edge belong to the column to their left.
        if p.x <= self.slab_left {
            return None;
        }
        let row = bin(p.y, self.cell_side, self.total_rows)?;
        Some((row, col))
    }

    pub fn cell_center(&self, (row, col): Cell) -> Point {
        Point::new(
            self.slab_left + (col as f64 + 0.5) * self.cell_side,
            (row as f64 + 0.5) * self.cell_side,
        )
    }

    /// Build the grid geometry for a network of `n_pairs` pairs and area
    /// `area`, then mark cells containing any of `points`.
    pub fn from_points(points: &[Point], n_pairs: usize, area: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::invalid(format!("c must lie in (0, 1), got {c}")));
        }
        if n_pairs == 0 || !(area > 0.0) {
            return Err(Error::invalid("grid needs n >= 1 and area > 0"));
        }
        let nf = n_pairs as f64;
        let cell_side = c * (area / nf).sqrt();
        let slab_columns = (nf.ln().ceil() as usize).max(1);
        let total_rows = (nf.sqrt() / c).ceil() as usize;
        // The midline sits in the middle of column (k-1)/2; for even k the
        // spare column lands on the right.
        let mid_col = (slab_columns - 1) / 2;
        let slab_left = area.sqrt() - (mid_col as f64 + 0.5) * cell_side;

        let mut grid = PercolationGrid {
            c,
            cell_side,
            slab_left,
            slab_columns,
            total_rows,
            states: vec![CellState::Open; slab_columns * total_rows],
            occupancy: vec![0; slab_columns * total_rows],
        };
        for p in points {
            if let Some((r, col)) = grid.cell_of(p) {
                let idx = r * slab_columns + col;
                grid.occupancy[idx] += 1;
                grid.states[idx] = CellState::Closed;
            }
        }
        Ok(grid)
    }
}

pub fn build_occupancy_grid(instance: &NetworkInstance, c: f64) -> Result<PercolationGrid> {
    PercolationGrid::from_points(&instance.positions, instance.n_pairs, instance.area, c)
}

/// Open 4-connected path from row 0 to the last row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpenCrossing {
    pub cells: Vec<Cell>,
}

fn neighbours4(grid: &PercolationGrid, (r, c): Cell) -> impl Iterator<Item = Cell> {
    let (rows, cols) = (grid.total_rows, grid.slab_columns);
    // lexicographic (row, col) order
    [
        (r.wrapping_sub(1), c),
        (r, c.wrapping_sub(1)),
        (r, c + 1),
        (r + 1, c),
    ]
    .into_iter()
    .filter(move |&(rr, cc)| rr < rows && cc < cols)
}

/// Shortest open top-bottom crossing, lexicographically smallest among the
/// shortest ones. `None` when no open crossing exists.
pub fn find_open_crossing(grid: &PercolationGrid) -> Option<OpenCrossing> {
    let (rows, cols) = (grid.total_rows, grid.slab_columns);
    let idx = |(r, c): Cell| r * cols + c;
    // Distance to the bottom row through open cells.
    let mut dist = vec![usize::MAX; rows * cols];
    let mut queue = VecDeque::new();
    for c in 0..cols {
        if grid.is_open((rows - 1, c)) {
            dist[idx((rows - 1, c))] = 0;
            queue.push_back((rows - 1, c));
        }
    }
    while let Some(cell) = queue.pop_front() {
        let d = dist[idx(cell)];
        for nb in neighbours4(grid, cell) {
            if grid.is_open(nb) && dist[idx(nb)] == usize::MAX {
                dist[idx(nb)] = d + 1;
                queue.push_back(nb);
            }
        }
    }
    let start = (0..cols)
        .map(|c| (0, c))
        .filter(|&cell| dist[idx(cell)] != usize::MAX)
        .min_by_key(|&cell| (dist[idx(cell)], cell))?;
    let mut cells = vec![start];
    let mut cur = start;
    while dist[idx(cur)] > 0 {
        let want = dist[idx(cur)] - 1;
        cur = neighbours4(grid, cur)
            .filter(|&nb| dist[idx(nb)] == want)
            .min()
            .expect("BFS distances are consistent");
        cells.push(cur);
    }
    Some(OpenCrossing { cells })
}

/// Whether closed cells connect the left and right slab columns under
/// 8-adjacency.
pub fn exists_closed_lr_crossing(grid: &PercolationGrid) -> bool {
    let (rows, cols) = (grid.total_rows, grid.slab_columns);
    let mut seen = vec![false; rows * cols];
    let mut stack: Vec<Cell> = (0..rows).map(|r| (r, 0)).filter(|&cell| !grid.is_open(cell)).collect();
    for &(r, c) in &stack {
        seen[r * cols + c] = true;
    }
    while let Some((r, c)) = stack.pop() {
        if c == cols - 1 {
            return true;
        }
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= rows as i64 || cc >= cols as i64 {
                    continue;
                }
                let (rr, cc) = (rr as usize, cc as usize);
                if !seen[rr * cols + cc] && !grid.is_open((rr, cc)) {
                    seen[rr * cols + cc] = true;
                    stack.push((rr, cc));
                }
            }
        }
    }
    false
}

/// A certified node-free cut: the centreline through the cells of an open
/// crossing, extended vertically to the top and bottom of the slab.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutPolyline {
    pub c: f64,
    pub cell_side: f64,
    pub cells: Vec<Cell>,
    pub vertices: Vec<Point>,
    /// Exact minimum distance from any node to the polyline.
    pub clearance: f64,
    /// Slab cells on the left of the cut (row-major over the grid).
    #[serde(skip)]
    left_region: Vec<bool>,
}

#[derive(Serialize)]
struct CutExport<'a> {
    c: f64,
    cell_side: f64,
    path: Vec<[usize; 2]>,
    clearance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertices: Option<&'a [Point]>,
}

impl CutPolyline {
    /// `{c, cell_side, path: [[row, col], ...], clearance}`.
    pub fn to_json(&self) -> Result<String> {
        let export = CutExport {
            c: self.c,
            cell_side: self.cell_side,
            path: self.cells.iter().map(|&(r, c)| [r, c]).collect(),
            clearance: self.clearance,
            vertices: None,
        };
        Ok(serde_json::to_string(&export)?)
    }

    /// Required clearance `(c/2) sqrt(A/n)`, i.e. half a cell.
    pub fn required_clearance(&self) -> f64 {
        0.5 * self.cell_side
    }

    /// Whether `p` lies on the left side of the cut.
    pub fn is_left(&self, grid: &PercolationGrid, p: &Point) -> bool {
        if p.x <= grid.slab_left {
            return true;
        }
        if p.x > grid.slab_right() {
            return false;
        }
        match grid.cell_of(p) {
            Some((r, c)) => self.left_region[r * grid.slab_columns + c],
            None => false,
        }
    }
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0)
    };
    p.dist(&Point::new(a.x + t * dx, a.y + t * dy))
}

pub fn polyline_distance(p: &Point, vertices: &[Point]) -> f64 {
    vertices
        .windows(2)
        .map(|w| point_segment_distance(p, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Exact minimum of [`polyline_distance`] over `points`. The horizontal gap
/// to the polyline's x-range is a lower bound, so far points are skipped once
/// the nearby ones have set the minimum.
fn min_polyline_distance(points: &[Point], vertices: &[Point], band: f64) -> f64 {
    let (lo, hi) = vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.x), hi.max(v.x)));
    let gap = |p: &Point| (lo - p.x).max(p.x - hi).max(0.0);
    let mut best = f64::INFINITY;
    for p in points.iter().filter(|p| gap(p) <= band) {
        best = best.min(polyline_distance(p, vertices));
    }
    for p in points {
        let g = gap(p);
        if g > band && g < best {
            best = best.min(polyline_distance(p, vertices));
        }
    }
    best
}

/// Turn an open crossing into a certified cut: centreline through cell
/// centres plus vertical end segments, exact clearance over every node, and
/// the left/right split of the slab cells.
pub fn extract_cut(path: &OpenCrossing, grid: &PercolationGrid, points: &[Point]) -> Result<CutPolyline> {
    let cells = &path.cells;
    if cells.is_empty() || cells[0].0 != 0 || cells[cells.len() - 1].0 != grid.total_rows - 1 {
        return Err(Error::invalid("path must span from the first to the last row"));
    }
    for w in cells.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.0.abs_diff(b.0) + a.1.abs_diff(b.1) != 1 {
            return Err(Error::invalid(format!("cells {a:?} and {b:?} are not 4-adjacent")));
        }
    }
    if let Some(c) = cells.iter().find(|&&c| !grid.is_open(c)) {
        return Err(Error::invalid(format!("cell {c:?} on the path is closed")));
    }

    let first = grid.cell_center(cells[0]);
    let last = grid.cell_center(cells[cells.len() - 1]);
    let mut vertices = Vec::with_capacity(cells.len() + 2);
    vertices.push(Point::new(first.x, 0.0));
    vertices.extend(cells.iter().map(|&c| grid.cell_center(c)));
    vertices.push(Point::new(last.x, grid.total_rows as f64 * grid.cell_side));

    let clearance = min_polyline_distance(points, &vertices, grid.cell_side);
    let required = 0.5 * grid.cell_side;
    // Nodes on a cell edge sit at exactly half a cell; allow rounding there.
    if clearance < required * (1.0 - 1e-9) {
        return Err(Error::Certification { clearance, required });
    }

    // Flood the non-path cells reachable from the left column.
    let (rows, cols) = (grid.total_rows, grid.slab_columns);
    let mut on_path = vec![false; rows * cols];
    for &(r, c) in cells {
        on_path[r * cols + c] = true;
    }
    let mut left = vec![false; rows * cols];
    let mut stack: Vec<Cell> = (0..rows).map(|r| (r, 0)).filter(|&(r, c)| !on_path[r * cols + c]).collect();
    for &(r, c) in &stack {
        left[r * cols + c] = true;
    }
    while let Some(cell) = stack.pop() {
        for (r, c) in neighbours4(grid, cell) {
            let i = r * cols + c;
            if !on_path[i] && !left[i] {
                left[i] = true;
                stack.push((r, c));
            }
        }
    }

    Ok(CutPolyline {
        c: grid.c,
        cell_side: grid.cell_side,
        cells: cells.clone(),
        vertices,
        clearance,
        left_region: left,
    })
}

/// Grid, crossing and certified cut for one instance, if a crossing exists.
pub fn percolation_cut(instance: &NetworkInstance, c: f64) -> Result<(PercolationGrid, Option<CutPolyline>)> {
    let grid = build_occupancy_grid(instance, c)?;
    let cut = match find_open_crossing(&grid) {
        Some(path) => Some(extract_cut(&path, &grid, &instance.positions)?),
        None => None,
    };
    Ok((grid, cut))
}

/// Upper bound `(5 / (7c)) sqrt(n) (7 c^2)^{ln n}` on the probability that the
/// slab has no open crossing.
pub fn analytic_failure_bound(n: usize, c: f64) -> f64 {
    let nf = n as f64;
    5.0 / (7.0 * c) * nf.sqrt() * (7.0 * c * c).powf(nf.ln())
}

/// `c^{2m}`: bound on the probability that `m` given cells are all closed.
pub fn closed_set_bound(c: f64, m: u32) -> f64 {
    c.powi(2 * m as i32)
}

/// `5 * 7^(len - 1)`: bound on the number of loop-free 8-adjacent paths of
/// `len` cells from a fixed start.
pub fn loop_free_path_bound(len: u32) -> f64 {
    if len == 0 {
        return 1.0;
    }
    5.0 * 7f64.powi(len as i32 - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingStudy {
    pub n: usize,
    pub c: f64,
    pub trials: usize,
    /// Fraction of draws with an open crossing.
    pub empirical_rate: f64,
    pub failure_rate: f64,
    pub failure_stderr: f64,
    pub analytic_bound: f64,
    /// Raised when `c^2 >= 1/(7 sqrt(e))`, where the bound does not decay.
    pub flag: bool,
    /// Every cut found passed clearance certification.
    pub all_certified: bool,
    pub min_clearance_ratio: f64,
}

impl CrossingStudy {
    pub const CSV_HEADER: &'static str = "n,c,trials,empirical_rate,analytic_bound,flag";

    pub fn csv_row(&self) -> String {
        use stats::fmt17;
        format!(
            "{},{},{},{},{},{}",
            self.n,
            fmt17(self.c),
            self.trials,
            fmt17(self.empirical_rate),
            fmt17(self.analytic_bound),
            self.flag
        )
    }
}

/// Monte-Carlo crossing probability over `trials` independent networks with
/// `A = n`. Trial `t` uses the network seed `derive_seed(seed, [t])`.
pub fn crossing_probability(n: usize, c: f64, trials: usize, seed: u64) -> Result<CrossingStudy> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = generate_network(n, n as f64, derive_seed(seed, &[tag::TRIAL, t as u64]))?;
            let (_, cut) = match percolation_cut(&inst, c) {
                Err(Error::Certification { clearance, required }) => {
                    return Ok((true, false, clearance / required));
                }
                other => other?,
            };
            Ok(match cut {
                Some(cut) => (true, true, cut.clearance / cut.required_clearance()),
                None => (false, true, f64::INFINITY),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let found = outcomes.iter().filter(|o| o.0).count();
    let empirical_rate = found as f64 / trials as f64;
    let failure_rate = 1.0 - empirical_rate;
    Ok(CrossingStudy {
        n,
        c,
        trials,
        empirical_rate,
        failure_rate,
        failure_stderr: stats::proportion_stderr(failure_rate, trials),
        analytic_bound: analytic_failure_bound(n, c),
        flag: c * c >= decay_threshold(),
        all_certified: outcomes.iter().all(|o| o.1),
        min_clearance_ratio: outcomes.iter().map(|o| o.2).fold(f64::INFINITY, f64::min),
    })
}
