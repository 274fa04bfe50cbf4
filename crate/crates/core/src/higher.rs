//! Upper bounds for higher variational eigenvalues from fields with
//! pairwise disjoint supports.
//!
//! With `m` normalized pieces the set `{ sum t_i u_i : sum |t_i|^p = 1 }` is
//! an odd image of an `(m - 1)`-sphere, so its index is at least `m` and the
//! maximum of the energy over it bounds `lambda^(m)` from above. When no cell
//! touches two pieces that maximum is the largest piece energy.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::GridDomain;
use crate::eigen::{first_eigen_descent, EigenOptions};
use crate::error::{check_exponent, Error, Result};
use crate::field::ScalarField;
use crate::functional::p_energy;
use crate::par;

#[derive(Debug, Clone)]
pub struct DisjointSupportSystem {
    pub p: f64,
    /// Unit-norm first eigenfields of the pieces, zero-extended.
    pub pieces: Vec<ScalarField>,
    /// First eigenvalue of each piece's subdomain.
    pub piece_lambdas: Vec<f64>,
    /// Global node indices of each piece.
    pub partition: Vec<Vec<usize>>,
}

impl DisjointSupportSystem {
    pub fn m(&self) -> usize {
        self.pieces.len()
    }

    /// `sum t_i pieces_i`.
    pub fn combination(&self, t: &[f64]) -> Result<ScalarField> {
        if t.len() != self.pieces.len() {
            return Err(Error::InvalidInput(format!("expected {} coefficients, got {}", self.pieces.len(), t.len())));
        }
        let mut out = ScalarField::zeros(self.pieces[0].domain().clone());
        for (ti, piece) in t.iter().zip(&self.pieces) {
            out = out.axpy(*ti, piece)?;
        }
        Ok(out)
    }
}

/// Solves the first eigenproblem on each node set of `partition` and
/// zero-extends the results.
///
/// The sets must be nonempty, made of active nodes, pairwise disjoint, and
/// separated: no cell may have vertices in two sets. Separation is what
/// makes the energy of a combination split piece by piece.
pub fn build_disjoint_system(
    domain: &Arc<GridDomain>,
    p: f64,
    partition: &[Vec<usize>],
    opts: &EigenOptions,
) -> Result<DisjointSupportSystem> {
    check_exponent(p)?;
    if partition.is_empty() {
        return Err(Error::InvalidPartition("partition has no sets".into()));
    }
    let mut seen = HashSet::new();
    let mut sets = Vec::with_capacity(partition.len());
    for (i, set) in partition.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidPartition(format!("set {i} is empty")));
        }
        for &n in set {
            if domain.dof_of(n).is_none() {
                return Err(Error::InvalidPartition(format!("node {n} in set {i} is not active")));
            }
            if !seen.insert(n) {
                return Err(Error::InvalidPartition(format!("node {n} belongs to more than one set")));
            }
        }
        sets.push(set.iter().copied().collect::<HashSet<_>>());
    }
    if !domain.sets_are_separated(&sets) {
        return Err(Error::InvalidPartition("two sets share a cell; leave a separating row of nodes".into()));
    }

    let solved = par::map(partition, |set| -> Result<(Vec<f64>, f64)> {
        let sub = Arc::new(domain.restrict(set)?);
        let pair = first_eigen_descent(&sub, p, &EigenOptions { initial: None, ..opts.clone() })?;
        let mut full = vec![0.0; domain.active_count()];
        for (&node, v) in sub.active_nodes().iter().zip(pair.field.values()) {
            full[domain.dof_of(node).expect("checked active")] = *v;
        }
        Ok((full, pair.lambda))
    });
    let mut pieces = Vec::with_capacity(solved.len());
    let mut piece_lambdas = Vec::with_capacity(solved.len());
    for r in solved {
        let (values, lambda) = r?;
        pieces.push(ScalarField::new(domain.clone(), values)?);
        piece_lambdas.push(lambda);
    }
    Ok(DisjointSupportSystem { p, pieces, piece_lambdas, partition: partition.to_vec() })
}

/// Maximum of the energy over the unit-sphere image of the system: the
/// largest piece energy.
pub fn minimax_upper_bound(system: &DisjointSupportSystem) -> Result<f64> {
    let mut best = 0.0_f64;
    for piece in &system.pieces {
        best = best.max(p_energy(piece, system.p)?);
    }
    Ok(best)
}

/// Splits the domain into `m` pieces by whole separator layers: nodes in 1D,
/// grid columns in 2D, placed at `round(k (len - 1) / m)`.
pub fn equal_partition(domain: &GridDomain, m: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(Error::InvalidPartition("m must be at least 1".into()));
    }
    let cols = *domain.shape().last().expect("shape is nonempty");
    let seps: Vec<usize> = (0..=m).map(|k| ((k * (cols - 1)) as f64 / m as f64).round() as usize).collect();
    let mut parts = vec![Vec::new(); m];
    for &node in domain.active_nodes() {
        let col = node % cols;
        if seps.contains(&col) {
            continue;
        }
        let piece = seps.iter().rposition(|&s| s < col).expect("column 0 is a separator");
        parts[piece].push(node);
    }
    if let Some(i) = parts.iter().position(|s| s.is_empty()) {
        return Err(Error::InvalidPartition(format!("piece {i} of {m} has no active nodes")));
    }
    Ok(parts)
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionOptimum {
    pub bound: f64,
    /// Separator positions in domain coordinates.
    pub breakpoints: Vec<f64>,
    /// Separator node indices, including both end nodes.
    pub separators: Vec<usize>,
    pub piece_lambdas: Vec<f64>,
}

/// Minimizes the disjoint-support bound over partitions of an interval into
/// `m` subintervals.
///
/// The bound is the largest subinterval eigenvalue. Each interior separator
/// is moved by integer ternary search to balance its two neighbours (the
/// pair maximum is quasiconvex in the separator), sweeping until no
/// separator moves.
pub fn optimize_partition_1d(
    domain: &Arc<GridDomain>,
    p: f64,
    m: usize,
    opts: &EigenOptions,
) -> Result<PartitionOptimum> {
    check_exponent(p)?;
    if domain.dim() != 1 {
        return Err(Error::InvalidInput("partition optimization needs a 1D domain".into()));
    }
    let n = domain.node_count();
    if m == 0 || m > domain.active_count().div_ceil(2) {
        return Err(Error::InvalidInput(format!("m = {m} is out of range for {} active nodes", domain.active_count())));
    }
    let mut memo: HashMap<(usize, usize), f64> = HashMap::new();
    // first eigenvalue of the open node range (a, b)
    let mut lam = |a: usize, b: usize| -> Result<f64> {
        if let Some(v) = memo.get(&(a, b)) {
            return Ok(*v);
        }
        let nodes: Vec<usize> = (a + 1..b).collect();
        let sub = Arc::new(domain.restrict(&nodes)?);
        let v = first_eigen_descent(&sub, p, &EigenOptions { initial: None, ..opts.clone() })?.lambda;
        memo.insert((a, b), v);
        Ok(v)
    };

    let mut seps: Vec<usize> = (0..=m).map(|k| ((k * (n - 1)) as f64 / m as f64).round() as usize).collect();
    for _sweep in 0..4 * m + 8 {
        let mut moved = false;
        for k in 1..m {
            let (lo_end, hi_end) = (seps[k - 1], seps[k + 1]);
            let f = |s: usize, lam: &mut dyn FnMut(usize, usize) -> Result<f64>| -> Result<f64> {
                Ok(lam(lo_end, s)?.max(lam(s, hi_end)?))
            };
            // each side keeps at least one unknown
            let (mut lo, mut hi) = (lo_end + 2, hi_end - 2);
            while hi - lo > 2 {
                let m1 = lo + (hi - lo) / 3;
                let m2 = hi - (hi - lo) / 3;
                if f(m1, &mut lam)? <= f(m2, &mut lam)? {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let mut best = seps[k];
            let mut best_val = f(best, &mut lam)?;
            for s in lo..=hi {
                let v = f(s, &mut lam)?;
                if v < best_val {
                    best = s;
                    best_val = v;
                }
            }
            if best != seps[k] {
                seps[k] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let mut piece_lambdas = Vec::with_capacity(m);
    for k in 0..m {
        piece_lambdas.push(lam(seps[k], seps[k + 1])?);
    }
    let bound = piece_lambdas.iter().copied().fold(0.0, f64::max);
    let h = domain.h();
    Ok(PartitionOptimum {
        bound,
        breakpoints: seps[1..m].iter().map(|&s| s as f64 * h).collect(),
        separators: seps,
        piece_lambdas,
    })
}

/// Node sets between consecutive 1D separators.
pub fn partition_from_separators(separators: &[usize]) -> Vec<Vec<usize>> {
    separators.windows(2).map(|w| (w[0] + 1..w[1]).collect()).collect()
}

/// `pi_p = 2 pi / (p sin(pi / p))`.
pub fn pi_p(p: f64) -> f64 {
    2.0 * PI / (p * (PI / p).sin())
}

/// `m`-th Dirichlet eigenvalue of the 1D p-Laplacian on an interval of
/// length `l`: `(p - 1) (m pi_p / l)^p`.
pub fn oracle_lambda_1d(p: f64, m: usize, l: f64) -> Result<f64> {
    check_exponent(p)?;
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!("length must be positive, got {l}")));
    }
    Ok((p - 1.0) * (m as f64 * pi_p(p) / l).powf(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::lp_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize) -> Arc<GridDomain> {
        Arc::new(GridDomain::interval(n, 1.0).unwrap())
    }

    #[test]
    fn single_piece_is_first_eigenpair() {
        let d = unit(201);
        let parts = equal_partition(&d, 1).unwrap();
        assert_eq!(parts[0].len(), 199);
        let sys = build_disjoint_system(&d, 2.0, &parts, &EigenOptions::default()).unwrap();
        let full = first_eigen_descent(&d, 2.0, &EigenOptions::default()).unwrap();
        let b = minimax_upper_bound(&sys).unwrap();
        assert!((b - full.lambda).abs() < 1e-8 * full.lambda);
    }

    #[test]
    fn halves_and_thirds_at_p2() {
        let d = unit(1001);
        let opts = EigenOptions::default();
        let sys = build_disjoint_system(&d, 2.0, &equal_partition(&d, 2).unwrap(), &opts).unwrap();
        for l in &sys.piece_lambdas {
            assert!((l / (4.0 * PI * PI) - 1.0).abs() < 1e-3, "{l}");
        }
        let b = minimax_upper_bound(&sys).unwrap();
        assert!((b / (4.0 * PI * PI) - 1.0).abs() < 1e-3);
        let sys = build_disjoint_system(&d, 2.0, &equal_partition(&d, 3).unwrap(), &opts).unwrap();
        for l in &sys.piece_lambdas {
            assert!((l / (9.0 * PI * PI) - 1.0).abs() < 5e-3, "{l}");
        }
    }

    #[test]
    fn pieces_are_disjoint_and_normalized() {
        let d = unit(301);
        let sys = build_disjoint_system(&d, 3.0, &equal_partition(&d, 3).unwrap(), &EigenOptions::default()).unwrap();
        for (i, a) in sys.pieces.iter().enumerate() {
            assert!((lp_norm(a, 3.0).unwrap() - 1.0).abs() < 1e-10);
            for b in &sys.pieces[i + 1..] {
                assert!(a.values().iter().zip(b.values()).all(|(x, y)| *x == 0.0 || *y == 0.0));
            }
        }
    }

    #[test]
    fn energy_separates_over_combinations() {
        let d = unit(201);
        let p = 2.5;
        let sys = build_disjoint_system(&d, p, &equal_partition(&d, 3).unwrap(), &EigenOptions::default()).unwrap();
        let energies: Vec<f64> = sys.pieces.iter().map(|u| p_energy(u, p).unwrap()).collect();
        let bound = minimax_upper_bound(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s: f64 = raw.iter().map(|t: &f64| t.abs().powf(p)).sum::<f64>().powf(1.0 / p);
            let t: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let e = p_energy(&sys.combination(&t).unwrap(), p).unwrap();
            let sep: f64 = t.iter().zip(&energies).map(|(ti, ei)| ti.abs().powf(p) * ei).sum();
            assert!((e - sep).abs() <= 1e-12 * bound);
            assert!(e <= bound * (1.0 + 1e-12));
        }
        let vertex = sys.combination(&[0.0, -1.0, 0.0]).unwrap();
        assert!((p_energy(&vertex, p).unwrap() - energies[1]).abs() < 1e-12 * bound);
    }

    #[test]
    fn p3_bisection_matches_closed_form() {
        let d = unit(1001);
        let sys = build_disjoint_system(&d, 3.0, &equal_partition(&d, 2).unwrap(), &EigenOptions::default()).unwrap();
        let b = minimax_upper_bound(&sys).unwrap();
        let oracle = oracle_lambda_1d(3.0, 2, 1.0).unwrap();
        assert!((b / oracle - 1.0).abs() < 1e-2, "{b} vs {oracle}");
        assert!((oracle - 226.3).abs() < 0.1);
    }

    #[test]
    fn half_square_bound_at_p2() {
        let d = Arc::new(GridDomain::unit_square(41).unwrap());
        let parts = equal_partition(&d, 2).unwrap();
        let sys = build_disjoint_system(&d, 2.0, &parts, &EigenOptions::default()).unwrap();
        let b = minimax_upper_bound(&sys).unwrap();
        // five-point eigenvalue of a 20 x 40 cell rectangle
        let h = d.h();
        let exact = 4.0 / (h * h) * ((PI * h).sin().powi(2) + (PI * h / 2.0).sin().powi(2));
        assert!((b / exact - 1.0).abs() < 1e-7, "{b} vs {exact}");
        assert!((b / (5.0 * PI * PI) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn invalid_partitions_are_rejected() {
        let d = unit(21);
        let opts = EigenOptions::default();
        let overlap = vec![vec![1, 2, 3], vec![3, 4]];
        assert!(matches!(build_disjoint_system(&d, 2.0, &overlap, &opts), Err(Error::InvalidPartition(_))));
        let adjacent = vec![vec![1, 2, 3], vec![4, 5]];
        assert!(matches!(build_disjoint_system(&d, 2.0, &adjacent, &opts), Err(Error::InvalidPartition(_))));
        let boundary = vec![vec![0, 1]];
        assert!(matches!(build_disjoint_system(&d, 2.0, &boundary, &opts), Err(Error::InvalidPartition(_))));
        assert!(matches!(build_disjoint_system(&d, 2.0, &[vec![]], &opts), Err(Error::InvalidPartition(_))));
        assert!(equal_partition(&d, 0).is_err());
        assert!(equal_partition(&d, 15).is_err());
    }

    #[test]
    fn optimized_partitions_balance() {
        let d = unit(401);
        let opts = EigenOptions::default();
        let one = optimize_partition_1d(&d, 2.0, 1, &opts).unwrap();
        assert!(one.breakpoints.is_empty());
        assert!((one.bound / (PI * PI) - 1.0).abs() < 1e-3);
        for &p in &[2.0, 3.0] {
            let r = optimize_partition_1d(&d, p, 2, &opts).unwrap();
            assert!((r.breakpoints[0] - 0.5).abs() <= d.h() + 1e-12, "{:?}", r.breakpoints);
            let oracle = oracle_lambda_1d(p, 2, 1.0).unwrap();
            assert!((r.bound / oracle - 1.0).abs() < 1e-2, "p={p}: {} vs {oracle}", r.bound);
        }
        // a deliberately lopsided start is rebalanced
        let r = optimize_partition_1d(&d, 1.5, 3, &opts).unwrap();
        let lens: Vec<usize> = r.separators.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 2, "{lens:?}");
        assert!(optimize_partition_1d(&d, 2.0, 201, &opts).is_err());
        assert!(optimize_partition_1d(&Arc::new(GridDomain::unit_square(8).unwrap()), 2.0, 2, &opts).is_err());
    }

    #[test]
    fn bounds_increase_with_m() {
        let d = unit(301);
        let opts = EigenOptions::default();
        let mut prev = 0.0;
        for m in 1..=4 {
            let b = optimize_partition_1d(&d, 1.5, m, &opts).unwrap().bound;
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn oracle_values() {
        assert!((oracle_lambda_1d(2.0, 1, 1.0).unwrap() - PI * PI).abs() < 1e-12);
        assert!((oracle_lambda_1d(3.0, 1, 1.0).unwrap() - 28.29).abs() < 0.01);
        assert!((oracle_lambda_1d(1.5, 1, 1.0).unwrap() - 5.319).abs() < 0.001);
        assert!((pi_p(2.0) - PI).abs() < 1e-15);
        assert!(oracle_lambda_1d(1.0, 1, 1.0).is_err());
        assert!(oracle_lambda_1d(2.0, 0, 1.0).is_err());
        assert!(oracle_lambda_1d(2.0, 1, 0.0).is_err());
        let l2 = oracle_lambda_1d(2.5, 1, 2.0).unwrap();
        assert!((l2 - oracle_lambda_1d(2.5, 1, 1.0).unwrap() / 2f64.powf(2.5)).abs() < 1e-12);
    }
}
