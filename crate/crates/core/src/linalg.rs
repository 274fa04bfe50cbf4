//! Symmetric banded matrices with an in-place Cholesky factorization, a
//! pivoted banded LU for indefinite systems, and the P1 stiffness / p-energy
//! Hessian assembled into them.

use crate::domain::{GridDomain, PINNED};
use crate::error::{Error, Result};
use crate::functional::norm_sq;

/// Symmetric matrix storing the lower band: row `i` holds columns
/// `i - bw ..= i`.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)], factored: false }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw - (i - j)
    }

    /// Entry `(i, j)`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to `(i, j)` (and implicitly `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored, "mul_vec on a factored matrix");
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.idx(i, i)] * x[i];
        }
        y
    }

    /// Overwrites the band with its Cholesky factor `L` (`A = L L^T`).
    pub fn factor(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = self.data[j * w + bw];
            for k in k0..j {
                let l = self.data[j * w + bw - (j - k)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(j));
            }
            let d = d.sqrt();
            self.data[j * w + bw] = d;
            let i_end = (j + bw).min(n - 1);
            for i in j + 1..=i_end {
                let k0 = i.saturating_sub(bw);
                let mut s = self.data[i * w + bw - (i - j)];
                for k in k0..j {
                    s -= self.data[i * w + bw - (i - k)] * self.data[j * w + bw - (j - k)];
                }
                self.data[i * w + bw - (i - j)] = s / d;
            }
        }
        self.factored = true;
        Ok(self)
    }

    /// Solves `A x = b` with a factored matrix.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve on an unfactored matrix");
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = x[i];
            for k in k0..i {
                s -= self.data[i * w + bw - (i - k)] * x[k];
            }
            x[i] = s / self.data[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..=(i + bw).min(n - 1) {
                s -= self.data[k * w + bw - (k - i)] * x[k];
            }
            x[i] = s / self.data[i * w + bw];
        }
        x
    }
}

/// P1 stiffness matrix on the unknowns: the Hessian of `(1/2) energy` at `p = 2`.
pub fn assemble_stiffness(domain: &GridDomain) -> BandedSym {
    let mut m = BandedSym::zeros(domain.active_count(), domain.bandwidth());
    for c in domain.cells() {
        add_cell(&mut m, c, [[1.0, 0.0], [0.0, 1.0]]);
    }
    m
}

/// Regularized curvature model of `(1/p) energy` at `values`.
///
/// For `p >= 2` this is the Hessian
/// `vol (|g|^2 + r^2)^((p-2)/2) (I + (p-2) g g^T / (|g|^2 + r^2))` per cell.
/// For `p < 2` the rank-one term is dropped, leaving the isotropic weight
/// `(|g|^2 + r^2)^((p-2)/2)`: with `r = 0` the resulting quadratic majorizes
/// the energy (concavity of `t -> t^(p/2)`), so full steps never increase it.
pub fn assemble_p_hessian(domain: &GridDomain, values: &[f64], p: f64, reg: f64) -> BandedSym {
    hessian(domain, values, p, reg, p < 2.0)
}

/// Regularized Hessian of `(1/p) energy` for every `p`, including the
/// rank-one term below `p = 2`.
pub(crate) fn assemble_exact_p_hessian(domain: &GridDomain, values: &[f64], p: f64, reg: f64) -> BandedSym {
    hessian(domain, values, p, reg, false)
}

fn hessian(domain: &GridDomain, values: &[f64], p: f64, reg: f64, isotropic: bool) -> BandedSym {
    if p == 2.0 {
        return assemble_stiffness(domain);
    }
    let r2 = reg * reg;
    let mut m = BandedSym::zeros(domain.active_count(), domain.bandwidth());
    for c in domain.cells() {
        let g = c.gradient(values);
        let s = norm_sq(g) + r2;
        if s == 0.0 {
            continue;
        }
        let w = s.powf(0.5 * (p - 2.0));
        let a = if isotropic { 0.0 } else { (p - 2.0) / s };
        let t =
            [[w * (1.0 + a * g[0] * g[0]), w * a * g[0] * g[1]], [w * a * g[0] * g[1], w * (1.0 + a * g[1] * g[1])]];
        add_cell(&mut m, c, t);
    }
    m
}

/// LU factorization with partial pivoting of a banded matrix, for systems
/// that may be indefinite or nearly singular.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    /// Row `i` holds columns `i - bw ..= i + 2 bw` (upper fill from pivoting).
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    #[inline]
    fn width(bw: usize) -> usize {
        3 * bw + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bw >= i && j <= i + 2 * self.bw);
        i * Self::width(self.bw) + j + self.bw - i
    }

    /// Factors `a + diag(shift)`.
    pub fn factor(a: &BandedSym, shift: &[f64]) -> Result<Self> {
        assert!(!a.factored, "factor of a factored matrix");
        assert_eq!(shift.len(), a.n);
        let (n, bw) = (a.n, a.bw);
        let mut lu = Self { n, bw, data: vec![0.0; n * Self::width(bw)], pivots: vec![0; n] };
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n.saturating_sub(1)) {
                let k = lu.idx(i, j);
                lu.data[k] = a.get(i, j);
            }
            let k = lu.idx(i, i);
            lu.data[k] += shift[i];
        }
        let scale = lu.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + bw).min(n - 1);
            let last_col = (k + 2 * bw).min(n - 1);
            let mut piv = k;
            for i in k + 1..=last_row {
                if lu.data[lu.idx(i, k)].abs() > lu.data[lu.idx(piv, k)].abs() {
                    piv = i;
                }
            }
            lu.pivots[k] = piv;
            if piv != k {
                for j in k..=last_col {
                    let (x, y) = (lu.idx(k, j), lu.idx(piv, j));
                    lu.data.swap(x, y);
                }
            }
            let kk = lu.idx(k, k);
            if !lu.data[kk].is_finite() {
                return Err(Error::InvalidInput(format!("non-finite pivot in row {k}")));
            }
            if lu.data[kk] == 0.0 {
                // exactly singular column; a tiny pivot keeps the solve finite
                lu.data[kk] = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
            }
            let d = lu.data[kk];
            for i in k + 1..=last_row {
                let li = lu.idx(i, k);
                let l = lu.data[li] / d;
                lu.data[li] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = lu.data[lu.idx(k, j)];
                        let t = lu.idx(i, j);
                        lu.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            for i in k + 1..=(k + bw).min(n - 1) {
                x[i] -= self.data[self.idx(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + 2 * bw).min(n - 1) {
                s -= self.data[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        x
    }
}

#[inline]
fn add_cell(m: &mut BandedSym, c: &crate::domain::Cell, t: [[f64; 2]; 2]) {
    for a in 0..3 {
        let da = c.dofs[a];
        if da == PINNED {
            continue;
        }
        let ga = c.grads[a];
        let tga = [t[0][0] * ga[0] + t[0][1] * ga[1], t[1][0] * ga[0] + t[1][1] * ga[1]];
        for b in 0..3 {
            let db = c.dofs[b];
            if db == PINNED || db > da {
                continue;
            }
            let gb = c.grads[b];
            m.add(da, db, c.volume * (tga[0] * gb[0] + tga[1] * gb[1]));
        }
    }
}
