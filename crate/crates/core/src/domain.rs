//! Discrete domains: uniform 1D intervals and 2D masked grids carrying a
//! piecewise-linear simplicial mesh with homogeneous Dirichlet boundary.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Marker for a cell vertex that is not an unknown (boundary, value pinned to 0).
pub const PINNED: usize = usize::MAX;

/// A segment (1D) or triangle (2D) with a constant gradient operator.
///
/// The gradient of a P1 field on the cell is `sum_k u[dofs[k]] * grads[k]`,
/// where pinned vertices contribute nothing. 1D cells leave the third slot
/// pinned with a zero gradient coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub nodes: [usize; 3],
    pub dofs: [usize; 3],
    pub grads: [[f64; 2]; 3],
    pub volume: f64,
}

impl Cell {
    #[inline]
    pub fn gradient(&self, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..3 {
            let d = self.dofs[k];
            if d != PINNED {
                let v = values[d];
                g[0] += v * self.grads[k][0];
                g[1] += v * self.grads[k][1];
            }
        }
        g
    }

    /// Mean of the vertex values, pinned vertices counting as zero.
    #[inline]
    pub fn mean_value(&self, values: &[f64]) -> f64 {
        let n = self.vertex_count();
        let sum: f64 = self.dofs[..n].iter().map(|&d| if d == PINNED { 0.0 } else { values[d] }).sum();
        sum / n as f64
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        if self.nodes[2] == PINNED {
            2
        } else {
            3
        }
    }
}

/// JSON-exportable summary of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMetadata {
    pub dim: usize,
    pub h: f64,
    pub shape: Vec<usize>,
    pub active_count: usize,
    pub component_count: usize,
    pub cell_count: usize,
    pub volume: f64,
    pub hash: String,
}

/// Discretized domain. Immutable after construction.
///
/// Nodes are numbered row-major over `shape` (`[n]` in 1D, `[rows, cols]` in
/// 2D); unknowns ("dofs") are the active nodes in that same order.
#[derive(Debug, Clone)]
pub struct GridDomain {
    dim: usize,
    h: f64,
    shape: Vec<usize>,
    active_mask: Vec<bool>,
    active_nodes: Vec<usize>,
    node_to_dof: Vec<usize>,
    cells: Vec<Cell>,
    component_count: usize,
    bandwidth: usize,
    volume: f64,
    hash: String,
}

impl GridDomain {
    /// Uniform interval `(0, length)` with `n` nodes, endpoints pinned.
    pub fn interval(n: usize, length: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidDomain(format!("interval needs at least 3 nodes, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidDomain(format!("interval length must be positive, got {length}")));
        }
        let h = length / (n - 1) as f64;
        let mut mask = vec![true; n];
        mask[0] = false;
        mask[n - 1] = false;
        let cells = (0..n - 1)
            .map(|i| Cell {
                nodes: [i, i + 1, PINNED],
                dofs: [PINNED; 3],
                grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
                volume: h,
            })
            .collect();
        Self::from_parts(1, h, vec![n], mask, cells)
    }

    /// 2D grid from a node mask (`mask[row][col]`).
    ///
    /// Every square whose four corners are set is split into two triangles
    /// along the same diagonal. A node is an unknown when all four squares
    /// around it are present; all other nodes, including the array border,
    /// carry the Dirichlet value 0.
    pub fn masked_grid(mask: &[Vec<bool>], h: f64) -> Result<Self> {
        let rows = mask.len();
        let cols = mask.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDomain("empty mask".into()));
        }
        if mask.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDomain("mask rows have unequal lengths".into()));
        }
        if !mask.iter().flatten().any(|&b| b) {
            return Err(Error::InvalidDomain("mask has no true entries".into()));
        }
        if rows < 3 || cols < 3 {
            return Err(Error::InvalidDomain(format!("mask {rows}x{cols} has no interior")));
        }
        let squares: Vec<Vec<bool>> = (0..rows - 1)
            .map(|r| {
                (0..cols - 1).map(|c| mask[r][c] && mask[r][c + 1] && mask[r + 1][c] && mask[r + 1][c + 1]).collect()
            })
            .collect();
        Self::from_squares(&squares, h)
    }

    /// All-true `n x n` node mask with spacing `1/(n-1)`: the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidDomain(format!("square needs at least 3 nodes per side, got {n}")));
        }
        Self::masked_grid(&vec![vec![true; n]; n], 1.0 / (n - 1) as f64)
    }

    /// Unit square of `base_size` cells per side with a vertical slit of
    /// `crack_width` cells cut in from the top and bottom edges, leaving a
    /// neck of `base_size / 4` cells in the middle.
    pub fn crack_family(base_size: usize, crack_width: usize) -> Result<Self> {
        if base_size < 2 {
            return Err(Error::InvalidDomain(format!("crack base size {base_size} too small")));
        }
        if crack_width >= base_size {
            return Err(Error::InvalidDomain(format!(
                "crack width {crack_width} must be smaller than base size {base_size}"
            )));
        }
        let n = base_size;
        let mut squares = vec![vec![true; n]; n];
        let c0 = (n - crack_width) / 2;
        let depth = 3 * n / 8;
        for (r, row) in squares.iter_mut().enumerate() {
            if r < depth || r >= n - depth {
                for sq in row.iter_mut().skip(c0).take(crack_width) {
                    *sq = false;
                }
            }
        }
        Self::from_squares(&squares, 1.0 / n as f64)
    }

    /// Grid from a square (cell) mask of size `rows x cols`; the node grid is
    /// one larger in each direction.
    pub fn from_squares(squares: &[Vec<bool>], h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidDomain(format!("spacing must be positive, got {h}")));
        }
        let srows = squares.len();
        let scols = squares.first().map_or(0, Vec::len);
        if srows == 0 || scols == 0 || squares.iter().any(|r| r.len() != scols) {
            return Err(Error::InvalidDomain("square mask must be a non-empty rectangle".into()));
        }
        let (rows, cols) = (srows + 1, scols + 1);
        let present = |r: isize, c: isize| {
            r >= 0 && c >= 0 && (r as usize) < srows && (c as usize) < scols && squares[r as usize][c as usize]
        };
        let mut mask = vec![false; rows * cols];
        for r in 0..rows as isize {
            for c in 0..cols as isize {
                mask[r as usize * cols + c as usize] =
                    present(r - 1, c - 1) && present(r - 1, c) && present(r, c - 1) && present(r, c);
            }
        }
        let inv = 1.0 / h;
        let vol = 0.5 * h * h;
        let mut cells = Vec::new();
        for (r, row) in squares.iter().enumerate() {
            for (c, &on) in row.iter().enumerate() {
                if !on {
                    continue;
                }
                let n00 = r * cols + c;
                let n01 = n00 + 1;
                let n10 = n00 + cols;
                let n11 = n10 + 1;
                // lower-right triangle: grad = ((u01-u00)/h, (u11-u01)/h)
                cells.push(Cell {
                    nodes: [n00, n01, n11],
                    dofs: [PINNED; 3],
                    grads: [[-inv, 0.0], [inv, -inv], [0.0, inv]],
                    volume: vol,
                });
                // upper-left triangle: grad = ((u11-u10)/h, (u10-u00)/h)
                cells.push(Cell {
                    nodes: [n00, n11, n10],
                    dofs: [PINNED; 3],
                    grads: [[0.0, -inv], [inv, 0.0], [-inv, inv]],
                    volume: vol,
                });
            }
        }
        Self::from_parts(2, h, vec![rows, cols], mask, cells)
    }

    fn from_parts(dim: usize, h: f64, shape: Vec<usize>, active_mask: Vec<bool>, mut cells: Vec<Cell>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidDomain(format!("spacing must be positive, got {h}")));
        }
        let mut node_to_dof = vec![PINNED; active_mask.len()];
        let mut active_nodes = Vec::new();
        for (node, &on) in active_mask.iter().enumerate() {
            if on {
                node_to_dof[node] = active_nodes.len();
                active_nodes.push(node);
            }
        }
        if active_nodes.is_empty() {
            return Err(Error::InvalidDomain("domain has no active nodes".into()));
        }
        let mut uf = UnionFind::new(active_nodes.len());
        let mut bandwidth = 0;
        for cell in &mut cells {
            for k in 0..cell.vertex_count() {
                cell.dofs[k] = node_to_dof[cell.nodes[k]];
            }
            let dofs: Vec<usize> = cell.dofs.iter().copied().filter(|&d| d != PINNED).collect();
            for w in dofs.windows(2) {
                uf.union(w[0], w[1]);
            }
            if let (Some(lo), Some(hi)) = (dofs.iter().min(), dofs.iter().max()) {
                bandwidth = bandwidth.max(hi - lo);
            }
        }
        let component_count = uf.count();
        let volume = cells.iter().map(|c| c.volume).sum();

        let mut hasher = Sha256::new();
        hasher.update((dim as u64).to_le_bytes());
        hasher.update(h.to_bits().to_le_bytes());
        for s in &shape {
            hasher.update((*s as u64).to_le_bytes());
        }
        hasher.update(active_mask.iter().map(|&b| b as u8).collect::<Vec<_>>());
        hasher.update((cells.len() as u64).to_le_bytes());
        for c in &cells {
            for n in c.nodes {
                hasher.update((n as u64).to_le_bytes());
            }
        }
        let hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

        Ok(Self {
            dim,
            h,
            shape,
            active_mask,
            active_nodes,
            node_to_dof,
            cells,
            component_count,
            bandwidth,
            volume,
            hash,
        })
    }

    /// Subdomain whose unknowns are the given (global) nodes; every other
    /// node is pinned. Cells without an unknown are dropped.
    pub fn restrict(&self, nodes: &[usize]) -> Result<Self> {
        let mut mask = vec![false; self.active_mask.len()];
        for &n in nodes {
            if n >= mask.len() || !self.active_mask[n] {
                return Err(Error::InvalidDomain(format!("node {n} is not an active node of the parent")));
            }
            mask[n] = true;
        }
        let cells = self
            .cells
            .iter()
            .filter(|c| c.nodes[..c.vertex_count()].iter().any(|&n| mask[n]))
            .map(|c| Cell { dofs: [PINNED; 3], ..*c })
            .collect();
        Self::from_parts(self.dim, self.h, self.shape.clone(), mask, cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn node_count(&self) -> usize {
        self.active_mask.len()
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active_mask
    }

    pub fn active_count(&self) -> usize {
        self.active_nodes.len()
    }

    /// Global node index of each unknown.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active_nodes
    }

    /// Unknown index of a global node, `None` when pinned.
    pub fn dof_of(&self, node: usize) -> Option<usize> {
        match self.node_to_dof.get(node) {
            Some(&d) if d != PINNED => Some(d),
            _ => None,
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count == 1
    }

    /// Largest dof distance within a cell; the half-bandwidth of stiffness matrices.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Total cell volume.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Lumped nodal quadrature weight `h^dim`.
    pub fn node_weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Content hash identifying the discretization.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Physical coordinates of a global node (`y` is 0 in 1D).
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        match self.dim {
            1 => [node as f64 * self.h, 0.0],
            _ => {
                let cols = self.shape[1];
                [(node % cols) as f64 * self.h, (node / cols) as f64 * self.h]
            }
        }
    }

    pub fn metadata(&self) -> DomainMetadata {
        DomainMetadata {
            dim: self.dim,
            h: self.h,
            shape: self.shape.clone(),
            active_count: self.active_count(),
            component_count: self.component_count,
            cell_count: self.cells.len(),
            volume: self.volume,
            hash: self.hash.clone(),
        }
    }

    /// True when no cell has unknowns from two different node sets.
    pub(crate) fn sets_are_separated(&self, sets: &[HashSet<usize>]) -> bool {
        self.cells.iter().all(|c| {
            let mut owner = None;
            for &n in &c.nodes[..c.vertex_count()] {
                if let Some(i) = sets.iter().position(|s| s.contains(&n)) {
                    match owner {
                        None => owner = Some(i),
                        Some(j) if j != i => return false,
                        _ => {}
                    }
                }
            }
            true
        })
    }
}

/// Parse a text mask: one row per line of `0`/`1` characters. Blank lines
/// are ignored.
pub fn parse_mask(text: &str) -> Result<Vec<Vec<bool>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => {
                    Err(Error::InvalidDomain(format!("line {}: unexpected character {other:?} in mask", lineno + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidDomain("empty mask".into()));
    }
    Ok(rows)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    fn count(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_interval() {
        let d = GridDomain::interval(3, 1.0).unwrap();
        assert_eq!(d.active_count(), 1);
        assert_eq!(d.h(), 0.5);
        assert_eq!(d.node_coords(d.active_nodes()[0])[0], 0.5);
        assert_eq!(d.component_count(), 1);
    }

    #[test]
    fn interval_construction() {
        let d = GridDomain::interval(101, 1.0).unwrap();
        assert_eq!(d.active_count(), 99);
        assert!((d.h() - 0.01).abs() < 1e-15);
        assert!(d.is_connected());

        let d = GridDomain::interval(5, 2.0).unwrap();
        assert_eq!(d.h(), 0.5);
        let xs: Vec<f64> = d.active_nodes().iter().map(|&n| d.node_coords(n)[0]).collect();
        assert_eq!(xs, vec![0.5, 1.0, 1.5]);
        assert!((d.volume() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interval_rejects_bad_input() {
        assert!(matches!(GridDomain::interval(2, 1.0), Err(Error::InvalidDomain(_))));
        assert!(matches!(GridDomain::interval(10, 0.0), Err(Error::InvalidDomain(_))));
        assert!(matches!(GridDomain::interval(10, -1.0), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn three_by_three_mask() {
        let d = GridDomain::masked_grid(&vec![vec![true; 3]; 3], 1.0).unwrap();
        assert_eq!(d.active_count(), 1);
        assert_eq!(d.active_nodes(), &[4]);
        assert_eq!(d.cells().len(), 8);
        // fixed diagonal: the centre is a vertex of 6 triangles and touches all 8
        let incident = d.cells().iter().filter(|c| c.nodes.contains(&4)).count();
        assert_eq!(incident, 6);
    }

    #[test]
    fn separated_blocks_are_two_components() {
        let mut mask = vec![vec![true; 9]; 5];
        for row in &mut mask {
            row[4] = false;
        }
        let d = GridDomain::masked_grid(&mask, 0.1).unwrap();
        assert_eq!(d.component_count(), 2);
    }

    #[test]
    fn all_false_mask_is_rejected() {
        assert!(matches!(GridDomain::masked_grid(&vec![vec![false; 4]; 4], 1.0), Err(Error::InvalidDomain(_))));
        assert!(GridDomain::masked_grid(&[], 1.0).is_err());
        assert!(GridDomain::masked_grid(&vec![vec![true; 4]; 4], 0.0).is_err());
    }

    #[test]
    fn volume_counts_full_squares() {
        let text = "01110\n11111\n11111\n11110\n";
        let mask = parse_mask(text).unwrap();
        let d = GridDomain::masked_grid(&mask, 0.5).unwrap();
        let mut full = 0;
        for r in 0..mask.len() - 1 {
            for c in 0..mask[0].len() - 1 {
                if mask[r][c] && mask[r][c + 1] && mask[r + 1][c] && mask[r + 1][c + 1] {
                    full += 1;
                }
            }
        }
        assert!((d.volume() - full as f64 * 0.25).abs() < 1e-14);
    }

    #[test]
    fn unit_square_geometry() {
        let d = GridDomain::unit_square(66).unwrap();
        assert_eq!(d.active_count(), 64 * 64);
        assert!((d.h() - 1.0 / 65.0).abs() < 1e-15);
        assert!((d.volume() - 1.0).abs() < 1e-12);
        assert_eq!(d.bandwidth(), 65);
        assert!(d.is_connected());
    }

    #[test]
    fn crack_family_shapes() {
        let plain = GridDomain::crack_family(32, 0).unwrap();
        let square = GridDomain::unit_square(33).unwrap();
        assert_eq!(plain.active_mask(), square.active_mask());

        let slit = GridDomain::crack_family(32, 1).unwrap();
        assert!(slit.is_connected());
        assert!(slit.active_count() < plain.active_count());

        let wide = GridDomain::crack_family(32, 8).unwrap();
        assert!(wide.is_connected());
        assert!(wide.volume() < slit.volume());

        assert!(matches!(GridDomain::crack_family(32, 32), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn mask_parsing() {
        let m = parse_mask("010\n\n111\n").unwrap();
        assert_eq!(m, vec![vec![false, true, false], vec![true, true, true]]);
        assert!(parse_mask("01x").is_err());
        assert!(parse_mask("\n\n").is_err());
    }

    #[test]
    fn restrict_keeps_only_requested_unknowns() {
        let d = GridDomain::interval(11, 1.0).unwrap();
        let sub = d.restrict(&[1, 2, 3, 4]).unwrap();
        assert_eq!(sub.active_count(), 4);
        assert_eq!(sub.cells().len(), 5);
        assert!(d.restrict(&[0]).is_err());
    }

    #[test]
    fn gradients_of_linear_function_are_exact() {
        // u = 2x + 3y sampled at all nodes of a 4x4 grid; interior cells only
        // see unknowns, so check cells whose vertices are all active.
        let d = GridDomain::unit_square(6).unwrap();
        let vals: Vec<f64> = d
            .active_nodes()
            .iter()
            .map(|&n| {
                let [x, y] = d.node_coords(n);
                2.0 * x + 3.0 * y
            })
            .collect();
        let mut checked = 0;
        for c in d.cells().iter().filter(|c| c.dofs.iter().all(|&x| x != PINNED)) {
            let g = c.gradient(&vals);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 3.0).abs() < 1e-12);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn metadata_round_trips_through_json() {
        let d = GridDomain::interval(7, 1.0).unwrap();
        let meta = d.metadata();
        let back: DomainMetadata = serde_json::from_str(&serde_json::to_string(&meta).unwrap()).unwrap();
        assert_eq!(meta, back);
        assert_eq!(meta.hash.len(), 64);
    }
}
