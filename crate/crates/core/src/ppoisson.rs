//! Discrete p-Poisson problem `-Δ_p w = z - div Z` with zero boundary
//! values, solved by minimizing the strictly convex functional
//!
//! `J(w) = (1/p) sum_cells vol |grad w|^p - sum_nodes h^dim z w - sum_cells vol Z . grad w`.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{GridDomain, PINNED};
use crate::error::{check_exponent, Error, Result};
use crate::field::ScalarField;
use crate::functional::{energy_raw, p_laplacian_raw, residual_floor};
use crate::linalg::{assemble_p_hessian, assemble_stiffness};

#[derive(Debug, Clone)]
pub struct PoissonProblem {
    pub source: ScalarField,
    /// Optional vector field, one entry per cell.
    pub flux: Option<Vec<[f64; 2]>>,
    pub p: f64,
}

impl PoissonProblem {
    pub fn new(source: ScalarField, p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self { source, flux: None, p })
    }

    pub fn with_flux(mut self, flux: Vec<[f64; 2]>) -> Result<Self> {
        let cells = self.source.domain().cells().len();
        if flux.len() != cells {
            return Err(Error::InvalidInput(format!("flux has {} entries, domain has {cells} cells", flux.len())));
        }
        if flux.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("flux has non-finite entries".into()));
        }
        self.flux = Some(flux);
        Ok(self)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        self.source.domain()
    }

    /// Linear part of `J`: `b_i = h^dim z_i + sum_cells vol Z . grad phi_i`.
    pub fn load(&self) -> Vec<f64> {
        let domain = self.domain();
        let w = domain.node_weight();
        let mut b: Vec<f64> = self.source.values().iter().map(|z| w * z).collect();
        if let Some(flux) = &self.flux {
            for (c, zc) in domain.cells().iter().zip(flux) {
                for k in 0..3 {
                    if c.dofs[k] != PINNED {
                        b[c.dofs[k]] += c.volume * (zc[0] * c.grads[k][0] + zc[1] * c.grads[k][1]);
                    }
                }
            }
        }
        b
    }

    /// `J(w)`.
    pub fn objective(&self, w: &ScalarField) -> Result<f64> {
        self.source.check_same_domain(w)?;
        Ok(objective_raw(self.domain(), w.values(), &self.load(), self.p))
    }
}

fn objective_raw(domain: &GridDomain, w: &[f64], load: &[f64], p: f64) -> f64 {
    energy_raw(domain, w, p) / p - dot(load, w)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Euclidean norm of `grad J` to reach; default `1e-10 (1 + |J(0)|)`.
    pub tol: Option<f64>,
    /// Default `10 * active node count`.
    pub max_iter: Option<usize>,
    /// Starting iterate (active values); default is the rescaled `p = 2` solution.
    pub initial: Option<Vec<f64>>,
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol: Some(tol), ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: ScalarField,
    pub objective: f64,
    pub residual_norm: f64,
    /// Rounding floor of the residual; `converged` means
    /// `residual_norm <= max(tol, residual_floor)`.
    pub residual_floor: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `J` after each iteration, starting with the initial iterate.
    pub objective_log: Vec<f64>,
}

/// Minimizes `J` by damped Newton steps with a regularized Hessian and
/// Armijo backtracking on `J` itself.
///
/// Stops once `|grad J| <= tol`. Running out of iterations, or a line search
/// that cannot decrease `J`, is reported as [`Error::NotConverged`].
pub fn solve_p_poisson(prob: &PoissonProblem, opts: &SolveOptions) -> Result<SolveReport> {
    check_exponent(prob.p)?;
    let domain = prob.domain().clone();
    let p = prob.p;
    let n = domain.active_count();
    // J(0) = 0 for every problem.
    let tol = opts.tol.unwrap_or(1e-10);
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n);
    let load = prob.load();

    let mut w = match &opts.initial {
        Some(init) => {
            if init.len() != n {
                return Err(Error::InvalidInput("initial guess has wrong length".into()));
            }
            init.clone()
        }
        None => initial_guess(&domain, &load, p)?,
    };

    let mut obj = objective_raw(&domain, &w, &load, p);
    let mut log = vec![obj];
    let mut grad = residual(&domain, &w, &load, p);
    let mut res = norm(&grad);

    let done = |w: Vec<f64>, obj: f64, res: f64, floor: f64, it: usize, log: Vec<f64>| -> Result<SolveReport> {
        Ok(SolveReport {
            solution: ScalarField::new(domain.clone(), w)?,
            objective: obj,
            residual_norm: res,
            residual_floor: floor,
            iterations: it,
            converged: true,
            objective_log: log,
        })
    };
    // Below the rounding floor the residual is only trusted once J has
    // stopped decreasing as well.
    let mut stalled = false;
    for it in 0..=max_iter {
        let floor = residual_floor(&domain, &w, p);
        if res <= tol || (stalled && res <= floor) {
            return done(w, obj, res, floor, it, log);
        }
        if it == max_iter {
            break;
        }
        let dir = newton_direction(&domain, &w, &grad, p)?;
        let slope = dot(&grad, &dir);
        let step = |alpha: f64| -> Vec<f64> { w.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect() };

        let noise = 64.0 * f64::EPSILON * (energy_raw(&domain, &w, p) / p + dot(&load, &w).abs());
        let objective = |t: &[f64]| objective_raw(&domain, t, &load, p);
        // Below rounding level the predicted decrease of J says nothing: use
        // the gradient norm as merit, never letting J grow beyond rounding.
        let by_residual =
            || residual_search(&step, |t| (objective(t), norm(&residual(&domain, t, &load, p))), obj, res, noise);
        let accepted =
            if -slope <= noise { by_residual() } else { armijo(&step, objective, obj, slope).or_else(by_residual) };
        let Some((next, next_obj)) = accepted else {
            if res <= floor {
                return done(w, obj, res, floor, it, log);
            }
            return Err(Error::not_converged("p-Poisson line search", it, res, w));
        };
        stalled = obj - next_obj <= noise;
        w = next;
        obj = next_obj;
        log.push(obj);
        grad = residual(&domain, &w, &load, p);
        res = norm(&grad);
    }
    Err(Error::not_converged("p-Poisson solve", max_iter, res, w))
}

/// Backtracking from a unit step until `f(x + a d) <= f(x) + 1e-4 a slope`
/// holds with a strict decrease.
pub(crate) fn armijo(
    step: &dyn Fn(f64) -> Vec<f64>,
    f: impl Fn(&[f64]) -> f64,
    f0: f64,
    slope: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    while alpha > 1e-12 {
        let trial = step(alpha);
        let ft = f(&trial);
        if ft < f0 && ft <= f0 + 1e-4 * alpha * slope {
            return Some((trial, ft));
        }
        alpha *= 0.5;
    }
    None
}

/// Backtracking from a unit step until the residual norm decreases while
/// the objective stays within `noise` of `f0`. `eval` returns
/// `(objective, residual norm)`.
pub(crate) fn residual_search(
    step: &dyn Fn(f64) -> Vec<f64>,
    eval: impl Fn(&[f64]) -> (f64, f64),
    f0: f64,
    res0: f64,
    noise: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    while alpha > 1e-6 {
        let trial = step(alpha);
        let (ft, rt) = eval(&trial);
        if rt < res0 && ft <= f0 + noise {
            return Some((trial, ft.min(f0)));
        }
        alpha *= 0.5;
    }
    None
}

fn residual(domain: &GridDomain, w: &[f64], load: &[f64], p: f64) -> Vec<f64> {
    let mut g = p_laplacian_raw(domain, w, p);
    for (gi, bi) in g.iter_mut().zip(load) {
        *gi -= bi;
    }
    g
}

/// `-H^{-1} grad` with the regularized Hessian at `w`; falls back to the
/// `p = 2` stiffness when the iterate carries no gradient at all.
pub(crate) fn newton_direction(domain: &GridDomain, w: &[f64], grad: &[f64], p: f64) -> Result<Vec<f64>> {
    let gmax = domain
        .cells()
        .iter()
        .map(|c| {
            let g = c.gradient(w);
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .fold(0.0, f64::max);
    let h = if gmax == 0.0 {
        assemble_stiffness(domain)
    } else {
        assemble_p_hessian(domain, w, p, hessian_regularization(p) * gmax)
    };
    let h = match h.factor() {
        Ok(f) => f,
        Err(_) => assemble_stiffness(domain).factor()?,
    };
    let mut d = h.solve(grad);
    for v in &mut d {
        *v = -*v;
    }
    Ok(d)
}

/// Relative gradient floor `r / max|grad w|` used in the Hessian.
pub(crate) fn hessian_regularization(p: f64) -> f64 {
    if p < 2.0 {
        1e-10
    } else {
        1e-3
    }
}

fn initial_guess(domain: &GridDomain, load: &[f64], p: f64) -> Result<Vec<f64>> {
    if load.iter().all(|&b| b == 0.0) {
        return Ok(vec![0.0; load.len()]);
    }
    let w0 = assemble_stiffness(domain).factor()?.solve(load);
    // minimize J(t w0) over t > 0: t^(p-1) E_p(w0) = b . w0
    let e = energy_raw(domain, &w0, p);
    let l = dot(load, &w0);
    if e == 0.0 || l <= 0.0 {
        return Ok(w0);
    }
    let t = (l / e).powf(1.0 / (p - 1.0));
    Ok(w0.iter().map(|v| t * v).collect())
}

/// Solution of `-Δ_p w = 1`, `w = 0` on the boundary.
pub fn torsion_function(domain: &Arc<GridDomain>, p: f64, opts: &SolveOptions) -> Result<SolveReport> {
    let prob = PoissonProblem::new(ScalarField::constant(domain.clone(), 1.0), p)?;
    solve_p_poisson(&prob, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub holds: bool,
    /// `max(w1 - w2)` over active nodes (negative when strictly ordered).
    pub max_violation: f64,
    /// Threshold the violation was compared against.
    pub bound: f64,
}

/// Solves the problems with sources `z1 <= z2` and checks `w1 <= w2`.
///
/// The violation is accepted up to `10 tol max(1, |w2|_inf)`.
pub fn comparison_check(z1: &ScalarField, z2: &ScalarField, p: f64, tol: f64) -> Result<ComparisonReport> {
    check_exponent(p)?;
    z1.check_same_domain(z2)?;
    if let Some(i) = z1.values().iter().zip(z2.values()).position(|(a, b)| a > b) {
        return Err(Error::InvalidInput(format!(
            "sources are not ordered at active node {i}: {} > {}",
            z1.values()[i],
            z2.values()[i]
        )));
    }
    let opts = SolveOptions::with_tol(tol);
    let w1 = solve_p_poisson(&PoissonProblem::new(z1.clone(), p)?, &opts)?.solution;
    let w2 = solve_p_poisson(&PoissonProblem::new(z2.clone(), p)?, &opts)?.solution;
    let max_violation = w1.values().iter().zip(w2.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let bound = 10.0 * tol * w2.max_abs().max(1.0);
    Ok(ComparisonReport { holds: max_violation <= bound, max_violation, bound })
}
