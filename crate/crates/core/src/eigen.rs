//! First Dirichlet eigenpair of the discrete p-Laplacian.
//!
//! Two independent routes: preconditioned descent on the Rayleigh quotient
//! and nonlinear inverse power iteration through p-Poisson solves.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::GridDomain;
use crate::error::{check_exponent, Error, Result};
use crate::field::ScalarField;
use crate::functional::{energy_raw, lp_norm, lp_pow_raw, mass_raw, norm_sq, p_laplacian_raw, residual_floor};
use crate::linalg::{assemble_exact_p_hessian, BandedLu};
use crate::ppoisson::{
    armijo, dot, newton_direction, norm, residual_search, solve_p_poisson, PoissonProblem, SolveOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Descent,
    Inverse,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Descent => "descent",
            Method::Inverse => "inverse",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Bound on the eigen-residual norm and on the relative Rayleigh change.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Warm start (active values); replaces the random initial field.
    pub initial: Option<Vec<f64>>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 5000, seed: 0, initial: None }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Converged first eigenpair: `field >= 0` with unit lumped `L^p` norm and
/// `lambda = rayleigh(field)`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub p: f64,
    pub lambda: f64,
    #[serde(skip)]
    pub field: ScalarField,
    /// `|A(u) - lambda M(u)|_2` with `A` the weak p-Laplacian and `M` the
    /// lumped mass term.
    pub residual: f64,
    /// Residual attributable to rounding of the field values. Convergence
    /// means `residual <= max(tol, residual_floor)`; the floor only matters
    /// for `p < 2` near cells with vanishing gradient.
    pub residual_floor: f64,
    pub iterations: usize,
    pub method: Method,
    pub seed: u64,
    pub converged: bool,
    /// Rayleigh quotient of each iterate.
    pub rayleigh_log: Vec<f64>,
}

/// `A(u) - lambda M(u)` for the current iterate.
pub fn eigen_residual(u: &ScalarField, p: f64, lambda: f64) -> Result<ScalarField> {
    check_exponent(p)?;
    let domain = u.domain();
    let mut r = p_laplacian_raw(domain, u.values(), p);
    for (ri, mi) in r.iter_mut().zip(mass_raw(domain, u.values(), p)) {
        *ri -= lambda * mi;
    }
    ScalarField::new(domain.clone(), r)
}

fn random_positive(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.5..1.5)).collect()
}

fn starting_field(domain: &GridDomain, opts: &EigenOptions) -> Result<Vec<f64>> {
    match &opts.initial {
        Some(v) if v.len() != domain.active_count() => {
            Err(Error::InvalidInput("initial field has wrong length".into()))
        }
        Some(v) if v.iter().all(|x| *x == 0.0) => Err(Error::InvalidInput("initial field is zero".into())),
        Some(v) => Ok(v.clone()),
        None => Ok(random_positive(domain.active_count(), opts.seed)),
    }
}

/// Nonnegative representative with unit norm: flip so the largest-magnitude
/// entry is positive, take absolute values, rescale.
fn normalize_nonneg(domain: &GridDomain, v: &mut [f64], p: f64) {
    let pivot = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
    for x in v.iter_mut() {
        *x = (sign * *x).abs();
    }
    let n = lp_pow_raw(domain, v, p).powf(1.0 / p);
    for x in v.iter_mut() {
        *x /= n;
    }
}

/// Relative residual below which descent tries Newton steps.
const NEWTON_SWITCH: f64 = 1e-3;

struct State {
    lambda: f64,
    residual: Vec<f64>,
    res: f64,
    floor: f64,
}

impl State {
    /// Converged: residual within `tol` and the quotient stagnant, or, when
    /// rounding makes `tol` unreachable, residual within the floor and the
    /// quotient frozen at rounding level.
    fn converged(&self, prev_lambda: f64, tol: f64) -> bool {
        let change = (prev_lambda - self.lambda).abs();
        (self.res <= tol && change <= tol * self.lambda)
            || (self.res <= self.floor && change <= 64.0 * f64::EPSILON * self.lambda)
    }
}

fn evaluate(domain: &GridDomain, u: &[f64], p: f64) -> State {
    let lambda = energy_raw(domain, u, p) / lp_pow_raw(domain, u, p);
    let mut r = p_laplacian_raw(domain, u, p);
    for (ri, mi) in r.iter_mut().zip(mass_raw(domain, u, p)) {
        *ri -= lambda * mi;
    }
    let res = norm(&r);
    let floor = residual_floor(domain, u, p);
    State { lambda, residual: r, res, floor }
}

fn finish(
    domain: &Arc<GridDomain>,
    mut u: Vec<f64>,
    p: f64,
    iterations: usize,
    method: Method,
    opts: &EigenOptions,
    log: Vec<f64>,
) -> Result<EigenPair> {
    normalize_nonneg(domain, &mut u, p);
    let st = evaluate(domain, &u, p);
    Ok(EigenPair {
        p,
        lambda: st.lambda,
        field: ScalarField::new(domain.clone(), u)?,
        residual: st.res,
        residual_floor: st.floor,
        iterations,
        method,
        seed: opts.seed,
        converged: true,
        rayleigh_log: log,
    })
}

/// Newton step for `A(u) = lambda M(u)` at fixed scale `M(u) . u`.
///
/// With `J = A'(u) - lambda M'(u)` and `z = J^{-1} M(u)`, homogeneity gives
/// `J u = (p-1) r`, so the bordered Newton update is proportional to
/// `(p-2) u + (M(u).u / M(u).z) z`. For `p = 2` this is Rayleigh quotient
/// iteration. `J` is indefinite and singular at the solution, hence the
/// pivoted LU.
fn newton_candidate(domain: &GridDomain, u: &[f64], lambda: f64, p: f64) -> Option<Vec<f64>> {
    let gmax = domain.cells().iter().map(|c| norm_sq(c.gradient(u))).fold(0.0, f64::max).sqrt();
    let jac = assemble_exact_p_hessian(domain, u, p, 1e-8 * gmax);
    let w = domain.node_weight();
    let shift: Vec<f64> =
        u.iter().map(|&v| if v == 0.0 { 0.0 } else { -(p - 1.0) * lambda * w * v.abs().powf(p - 2.0) }).collect();
    let lu = BandedLu::factor(&jac, &shift).ok()?;
    let m = mass_raw(domain, u, p);
    let z = lu.solve(&m);
    let c = dot(&m, u) / dot(&m, &z);
    let next: Vec<f64> = u.iter().zip(&z).map(|(a, b)| (p - 2.0) * a + c * b).collect();
    (c.is_finite() && next.iter().all(|v| v.is_finite())).then_some(next)
}

/// Minimizes the Rayleigh quotient over the unit `L^p` sphere.
///
/// Each step moves along `-P^{-1} r`, with `r` the eigen-residual and `P`
/// the curvature model of the energy at the iterate (for `p = 2` this is
/// one step of inverse iteration), followed by a backtracking search on the
/// quotient and projection back to the nonnegative unit sphere. Once the
/// residual is small relative to `lambda M(u)`, a Newton step on the
/// eigen-equation is tried first and kept when it lowers the residual
/// without raising the quotient; this restores fast convergence where the
/// quotient is flat, e.g. for `p > 2` near cells with vanishing gradient.
pub fn first_eigen_descent(domain: &Arc<GridDomain>, p: f64, opts: &EigenOptions) -> Result<EigenPair> {
    check_exponent(p)?;
    let mut u = starting_field(domain, opts)?;
    normalize_nonneg(domain, &mut u, p);
    let mut st = evaluate(domain, &u, p);
    let mut log = vec![st.lambda];
    let mut prev_lambda = f64::INFINITY;

    for it in 0..opts.max_iter {
        if st.converged(prev_lambda, opts.tol) {
            return finish(domain, u, p, it, Method::Descent, opts, log);
        }
        let noise = 64.0 * f64::EPSILON * st.lambda;
        if st.res <= NEWTON_SWITCH * st.lambda * norm(&mass_raw(domain, &u, p)) {
            if let Some(mut t) = newton_candidate(domain, &u, st.lambda, p) {
                normalize_nonneg(domain, &mut t, p);
                let ts = evaluate(domain, &t, p);
                if ts.res < st.res && ts.lambda <= st.lambda + noise {
                    u = t;
                    prev_lambda = st.lambda;
                    st = ts;
                    log.push(st.lambda);
                    continue;
                }
            }
        }
        let mut dir = newton_direction(domain, &u, &st.residual, p)?;
        // For p > 2 the model satisfies H u = (p-1) A(u); rescaling makes the
        // unit step the linearized inverse iteration, as it already is for p <= 2.
        // Far from the solution a nearly singular model can return huge
        // steps; cap them at the size of the iterate.
        let dmax = dir.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let umax = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let factor = if p > 2.0 { p - 1.0 } else { 1.0 };
        let factor = factor.min(umax / dmax);
        dir.iter_mut().for_each(|d| *d *= factor);
        // N(u) = 1, so grad R = p r
        let slope = p * dot(&st.residual, &dir);
        let step = |alpha: f64| -> Vec<f64> { u.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect() };
        let quotient = |v: &[f64]| energy_raw(domain, v, p) / lp_pow_raw(domain, v, p);

        let by_residual = || {
            let eval = |t: &[f64]| {
                let mut t = t.to_vec();
                normalize_nonneg(domain, &mut t, p);
                let ts = evaluate(domain, &t, p);
                (ts.lambda, ts.res)
            };
            residual_search(&step, eval, st.lambda, st.res, noise)
        };
        let next = if -slope <= noise {
            by_residual()
        } else {
            armijo(&step, quotient, st.lambda, slope).or_else(by_residual)
        }
        .map(|(t, _)| t);
        let Some(mut next) = next else {
            if st.res <= opts.tol.max(st.floor) {
                return finish(domain, u, p, it, Method::Descent, opts, log);
            }
            return Err(Error::not_converged("eigen descent line search", it, st.res, u));
        };
        normalize_nonneg(domain, &mut next, p);
        u = next;
        prev_lambda = st.lambda;
        st = evaluate(domain, &u, p);
        log.push(st.lambda);
    }
    if st.converged(prev_lambda, opts.tol) {
        return finish(domain, u, p, opts.max_iter, Method::Descent, opts, log);
    }
    Err(Error::not_converged("eigen descent", opts.max_iter, st.res, u))
}

/// Nonlinear inverse power iteration: `u_{k+1} = normalize(w)` where `w`
/// solves the p-Poisson problem with source `|u_k|^(p-2) u_k`.
pub fn first_eigen_inverse_iter(domain: &Arc<GridDomain>, p: f64, opts: &EigenOptions) -> Result<EigenPair> {
    check_exponent(p)?;
    let mut u = starting_field(domain, opts)?;
    normalize_nonneg(domain, &mut u, p);
    let mut st = evaluate(domain, &u, p);
    let mut log = vec![st.lambda];
    let mut prev_lambda = f64::INFINITY;

    for it in 0..opts.max_iter {
        if st.converged(prev_lambda, opts.tol) {
            return finish(domain, u, p, it, Method::Inverse, opts, log);
        }
        let source: Vec<f64> = u.iter().map(|&v| v.abs().powf(p - 1.0) * v.signum()).collect();
        let prob = PoissonProblem::new(ScalarField::new(domain.clone(), source)?, p)?;
        // w ~ lambda^(-1/(p-1)) u; an inner error e perturbs the outer
        // residual by about lambda e. The floor keeps the inner target above
        // rounding level of the load.
        let scale = st.lambda.powf(-1.0 / (p - 1.0));
        let load_norm = norm(&prob.load());
        let inner = SolveOptions {
            tol: Some((0.05 * opts.tol / st.lambda).max(1e-12 * load_norm)),
            max_iter: None,
            initial: Some(u.iter().map(|v| scale * v).collect()),
        };
        let w = match solve_p_poisson(&prob, &inner) {
            Ok(r) => r.solution.into_values(),
            Err(Error::NotConverged(f)) => {
                return Err(Error::not_converged(format!("inverse iteration step {it}: {}", f.context), it, st.res, u))
            }
            Err(e) => return Err(e),
        };
        u = w;
        normalize_nonneg(domain, &mut u, p);
        prev_lambda = st.lambda;
        st = evaluate(domain, &u, p);
        log.push(st.lambda);
    }
    if st.converged(prev_lambda, opts.tol) {
        return finish(domain, u, p, opts.max_iter, Method::Inverse, opts, log);
    }
    Err(Error::not_converged("inverse iteration", opts.max_iter, st.res, u))
}

pub fn first_eigen(domain: &Arc<GridDomain>, p: f64, method: Method, opts: &EigenOptions) -> Result<EigenPair> {
    match method {
        Method::Descent => first_eigen_descent(domain, p, opts),
        Method::Inverse => first_eigen_inverse_iter(domain, p, opts),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub min_interior_value: f64,
    /// `None` when the check was skipped.
    pub positive: Option<bool>,
    pub skipped_reason: Option<String>,
}

/// Strict positivity of the eigenfield at every unknown. Only meaningful on
/// connected domains; otherwise the check is skipped.
pub fn positivity_check(pair: &EigenPair) -> PositivityReport {
    let min = pair.field.values().iter().copied().fold(f64::INFINITY, f64::min);
    let domain = pair.field.domain();
    if !domain.is_connected() {
        return PositivityReport {
            min_interior_value: min,
            positive: None,
            skipped_reason: Some(format!(
                "domain has {} connected components; positivity requires a connected domain",
                domain.component_count()
            )),
        };
    }
    PositivityReport { min_interior_value: min, positive: Some(min > 0.0), skipped_reason: None }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimplicityReport {
    pub trials: usize,
    pub max_collinearity_defect: f64,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Runs `trials` descent solves from independent random starts (seeds
/// `opts.seed, opts.seed + 1, ...`) and reports the largest
/// `min_{t = ±1} |u - t v|_p` over all pairs.
pub fn simplicity_check(
    domain: &Arc<GridDomain>,
    p: f64,
    trials: usize,
    opts: &EigenOptions,
) -> Result<SimplicityReport> {
    check_exponent(p)?;
    let seeds: Vec<u64> = (0..trials as u64).map(|k| opts.seed + k).collect();
    let pairs = crate::par::map(&seeds, |&seed| {
        let o = EigenOptions { seed, initial: None, ..opts.clone() };
        first_eigen_descent(domain, p, &o)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut defect: f64 = 0.0;
    for i in 0..pairs.len() {
        for j in 0..i {
            let (u, v) = (&pairs[i].field, &pairs[j].field);
            let d = [1.0, -1.0]
                .iter()
                .map(|&t| lp_norm(&u.axpy(-t, v)?, p))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            defect = defect.max(d);
        }
    }
    Ok(SimplicityReport {
        trials,
        max_collinearity_defect: defect,
        lambdas: pairs.iter().map(|e| e.lambda).collect(),
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::functional::rayleigh;

    fn interval(n: usize, l: f64) -> Arc<GridDomain> {
        Arc::new(GridDomain::interval(n, l).unwrap())
    }

    /// Closed-form first eigenvalue on (0, 1).
    fn closed_form(p: f64) -> f64 {
        let pi_p = 2.0 * PI / (p * (PI / p).sin());
        (p - 1.0) * pi_p.powf(p)
    }

    #[test]
    fn interval_p2_descent() {
        let e = first_eigen_descent(&interval(1001, 1.0), 2.0, &EigenOptions::default()).unwrap();
        assert!((e.lambda / (PI * PI) - 1.0).abs() < 1e-3, "{}", e.lambda);
        assert!(e.residual <= 1e-9);
        assert!((lp_norm(&e.field, 2.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(e.field.values().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn interval_nonlinear_descent_and_inverse_agree() {
        let d = interval(401, 1.0);
        for &p in &[1.5, 3.0] {
            let opts = EigenOptions::default();
            let a = first_eigen_descent(&d, p, &opts).unwrap();
            let b = first_eigen_inverse_iter(&d, p, &opts).unwrap();
            assert!((a.lambda / closed_form(p) - 1.0).abs() < 1e-2, "p={p}: {}", a.lambda);
            assert!((a.lambda - b.lambda).abs() <= 2.0 * opts.tol * a.lambda, "p={p}: {} vs {}", a.lambda, b.lambda);
        }
    }

    #[test]
    fn inverse_iteration_rayleigh_is_monotone() {
        let d = interval(201, 1.0);
        for &p in &[1.5, 2.0, 3.0] {
            let e = first_eigen_inverse_iter(&d, p, &EigenOptions::default()).unwrap();
            for w in e.rayleigh_log.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "p={p}: {:?}", e.rayleigh_log);
            }
        }
    }

    #[test]
    fn lambda_is_rayleigh_of_field() {
        let d = Arc::new(GridDomain::unit_square(15).unwrap());
        let e = first_eigen_descent(&d, 2.5, &EigenOptions::default()).unwrap();
        assert_eq!(e.lambda, rayleigh(&e.field, 2.5).unwrap());
    }

    #[test]
    fn dilation_scales_by_length_power() {
        for &p in &[1.5, 3.0] {
            let a = first_eigen_descent(&interval(201, 1.0), p, &EigenOptions::default()).unwrap();
            let b = first_eigen_descent(&interval(201, 2.5), p, &EigenOptions::default()).unwrap();
            assert!((b.lambda * 2.5f64.powf(p) / a.lambda - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn positivity_on_connected_and_skip_on_disconnected() {
        let e = first_eigen_descent(&interval(101, 1.0), 2.0, &EigenOptions::default()).unwrap();
        let r = positivity_check(&e);
        assert_eq!(r.positive, Some(true));

        let mut mask = vec![vec![true; 11]; 5];
        for row in &mut mask {
            row[5] = false;
        }
        let d = Arc::new(GridDomain::masked_grid(&mask, 0.1).unwrap());
        let e = first_eigen_descent(&d, 2.0, &EigenOptions::default()).unwrap();
        let r = positivity_check(&e);
        assert!(r.positive.is_none() && r.skipped_reason.is_some());
    }

    #[test]
    fn simplicity_single_trial_and_restarts() {
        let d = interval(201, 1.0);
        let r = simplicity_check(&d, 2.0, 1, &EigenOptions::default()).unwrap();
        assert_eq!(r.max_collinearity_defect, 0.0);
        let r = simplicity_check(&d, 2.0, 8, &EigenOptions::default()).unwrap();
        assert!(r.max_collinearity_defect <= 1e-6, "{}", r.max_collinearity_defect);
    }

    #[test]
    fn failure_carries_last_iterate() {
        let d = interval(101, 1.0);
        let opts = EigenOptions { max_iter: 1, ..EigenOptions::default() };
        match first_eigen_descent(&d, 3.0, &opts) {
            Err(Error::NotConverged(f)) => assert_eq!(f.last_iterate.len(), 99),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_exponent_and_initial() {
        let d = interval(11, 1.0);
        assert!(matches!(first_eigen_descent(&d, 1.0, &EigenOptions::default()), Err(Error::InvalidExponent(_))));
        let opts = EigenOptions { initial: Some(vec![0.0; 9]), ..EigenOptions::default() };
        assert!(first_eigen_descent(&d, 2.0, &opts).is_err());
    }

    #[test]
    fn even_grids_converge_at_rounding_floor() {
        // The symmetric eigenfield has a middle cell with zero gradient, where
        // the flux is only Holder continuous for p < 2.
        for &n in &[90, 100] {
            let d = interval(n, 1.0);
            let a = first_eigen_descent(&d, 1.5, &EigenOptions::default()).unwrap();
            let b = first_eigen_inverse_iter(&d, 1.5, &EigenOptions::default()).unwrap();
            assert!(a.residual <= a.residual_floor.max(1e-9));
            assert!((a.lambda - b.lambda).abs() <= 2e-9 * a.lambda, "{} vs {}", a.lambda, b.lambda);
            assert!((a.lambda / closed_form(1.5) - 1.0).abs() < 1e-2);
        }
    }
}
