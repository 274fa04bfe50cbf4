//! Energies, norms and the discrete p-Laplacian on P1 fields.
//!
//! Cell sums run over `GridDomain::cells` in storage order and node sums over
//! active nodes in row-major order, so every reduction is deterministic.

use serde::Serialize;

use crate::domain::{GridDomain, PINNED};
use crate::error::{check_exponent, Error, Result};
use crate::field::ScalarField;

#[inline]
pub(crate) fn norm_sq(g: [f64; 2]) -> f64 {
    g[0] * g[0] + g[1] * g[1]
}

/// `|g|^p` for the Euclidean norm.
#[inline]
pub(crate) fn pow_norm(g: [f64; 2], p: f64) -> f64 {
    let s = norm_sq(g);
    if p == 2.0 {
        s
    } else if s == 0.0 {
        0.0
    } else {
        s.powf(0.5 * p)
    }
}

/// `|g|^(p-2)`, with the value 0 at `g = 0` (also for `p < 2`).
#[inline]
pub(crate) fn flux_weight(g: [f64; 2], p: f64) -> f64 {
    let s = norm_sq(g);
    if p == 2.0 {
        1.0
    } else if s == 0.0 {
        0.0
    } else {
        s.powf(0.5 * (p - 2.0))
    }
}

pub(crate) fn energy_raw(domain: &GridDomain, values: &[f64], p: f64) -> f64 {
    domain.cells().iter().map(|c| c.volume * pow_norm(c.gradient(values), p)).sum()
}

pub(crate) fn lp_pow_raw(domain: &GridDomain, values: &[f64], p: f64) -> f64 {
    let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    s * domain.node_weight()
}

/// Gradient of `(1/p) * energy`: `sum_cells vol |g|^(p-2) g . grad(phi_i)`.
pub(crate) fn p_laplacian_raw(domain: &GridDomain, values: &[f64], p: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for c in domain.cells() {
        let g = c.gradient(values);
        let w = c.volume * flux_weight(g, p);
        if w == 0.0 {
            continue;
        }
        for k in 0..3 {
            let d = c.dofs[k];
            if d != PINNED {
                out[d] += w * (g[0] * c.grads[k][0] + g[1] * c.grads[k][1]);
            }
        }
    }
    out
}

/// Size of `p_laplacian_raw(values)` that rounding of `values` alone can
/// produce. Each cell gradient is perturbed by `k eps max|u| max|grad phi|`
/// and the resulting flux change is bounded cell by cell, with `k = 16`
/// for `p >= 2` and `k = 1024` for `p < 2`.
///
/// For `p < 2` the flux `|g|^(p-2) g` is only Holder continuous of order
/// `p - 1`, so near cells with vanishing gradient this floor is far above
/// machine precision (about `(eps / h)^(p-1)`).
pub(crate) fn residual_floor(domain: &GridDomain, values: &[f64], p: f64) -> f64 {
    let umax = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if umax == 0.0 {
        return 0.0;
    }
    let mut out = vec![0.0; values.len()];
    for c in domain.cells() {
        let gscale = c.grads.iter().fold(0.0_f64, |m, g| m.max(norm_sq(*g).sqrt()));
        let g = norm_sq(c.gradient(values)).sqrt();
        let change = if p < 2.0 {
            let delta = 1024.0 * f64::EPSILON * umax * gscale;
            let holder = 2f64.powf(2.0 - p) * delta.powf(p - 1.0);
            if g > 2.0 * delta {
                holder.min((g - delta).powf(p - 2.0) * delta)
            } else {
                holder
            }
        } else {
            let delta = 16.0 * f64::EPSILON * umax * gscale;
            (p - 1.0) * (g + delta).powf(p - 2.0) * delta
        };
        for k in 0..3 {
            let d = c.dofs[k];
            if d != PINNED {
                out[d] += c.volume * change * norm_sq(c.grads[k]).sqrt();
            }
        }
    }
    out.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Lumped `|u|^(p-2) u h^dim`, the gradient of `(1/p) * ||u||_p^p`.
pub(crate) fn mass_raw(domain: &GridDomain, values: &[f64], p: f64) -> Vec<f64> {
    let w = domain.node_weight();
    values.iter().map(|&v| if v == 0.0 { 0.0 } else { w * v.abs().powf(p - 1.0) * v.signum() }).collect()
}

/// `sum_cells vol |grad u|^p`.
pub fn p_energy(u: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(energy_raw(u.domain(), u.values(), p))
}

/// Lumped `(sum_i |u_i|^p h^dim)^(1/p)`.
pub fn lp_norm(u: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_pow_raw(u.domain(), u.values(), p).powf(1.0 / p))
}

/// `p_energy(u) / lp_norm(u)^p`.
pub fn rayleigh(u: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let denom = lp_pow_raw(u.domain(), u.values(), p);
    if denom == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(energy_raw(u.domain(), u.values(), p) / denom)
}

/// Weak p-Laplacian: entry `i` is `sum_cells vol |grad u|^(p-2) grad u . grad phi_i`.
///
/// Cells with vanishing gradient contribute zero for every `p`.
pub fn apply_p_laplacian(u: &ScalarField, p: f64) -> Result<ScalarField> {
    check_exponent(p)?;
    ScalarField::new(u.domain().clone(), p_laplacian_raw(u.domain(), u.values(), p))
}

/// Lumped nonlinear mass term `|u|^(p-2) u h^dim`.
pub fn mass(u: &ScalarField, p: f64) -> Result<ScalarField> {
    check_exponent(p)?;
    ScalarField::new(u.domain().clone(), mass_raw(u.domain(), u.values(), p))
}

/// Cellwise constant gradients, in cell order.
pub fn cell_gradients(u: &ScalarField) -> Vec<[f64; 2]> {
    u.domain().cells().iter().map(|c| c.gradient(u.values())).collect()
}

/// Power mean of `|grad u|` over the domain:
/// `(vol^-1 sum_cells vol_c |grad u|^s)^(1/s)`.
pub fn normalized_energy(u: &ScalarField, s: f64) -> Result<f64> {
    check_exponent(s)?;
    let e = energy_raw(u.domain(), u.values(), s);
    Ok((e / u.domain().volume()).powf(1.0 / s))
}

/// Convexity gap of `xi -> |xi|^p` at `a` around `b`:
/// `|a|^p - |b|^p - p |b|^(p-2) b . (a - b)`.
#[inline]
pub(crate) fn convexity_gap(a: [f64; 2], b: [f64; 2], p: f64) -> f64 {
    let wb = flux_weight(b, p);
    pow_norm(a, p) - pow_norm(b, p) - p * wb * (b[0] * (a[0] - b[0]) + b[1] * (a[1] - b[1]))
}

/// Discrete Picone-type gap between two nonnegative fields.
///
/// With `u_e = u + eps`, `w_e = w + eps` and the logarithmic gradients
/// `a = grad u / u_e`, `b = grad w / w_e` (cell means in the denominators),
/// returns
/// `sum_cells vol { u_e^p G(a, b) + w_e^p G(b, a) }` where `G` is the
/// convexity gap of `|.|^p`. Every term is nonnegative.
pub fn picone_gap(u: &ScalarField, w: &ScalarField, p: f64, eps: f64) -> Result<f64> {
    check_exponent(p)?;
    u.check_same_domain(w)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidInput(format!("shift eps must be positive, got {eps}")));
    }
    for f in [u, w] {
        if let Some((index, &value)) = f.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeValue { index, value });
        }
    }
    let mut total = 0.0;
    for c in u.domain().cells() {
        let ue = c.mean_value(u.values()) + eps;
        let we = c.mean_value(w.values()) + eps;
        let gu = c.gradient(u.values());
        let gw = c.gradient(w.values());
        let a = [gu[0] / ue, gu[1] / ue];
        let b = [gw[0] / we, gw[1] / we];
        total += c.volume * (ue.powf(p) * convexity_gap(a, b, p) + we.powf(p) * convexity_gap(b, a, p));
    }
    Ok(total)
}

/// Default shift for [`picone_gap`]: `1e-8 * max(u)`.
pub fn default_picone_eps(u: &ScalarField) -> f64 {
    let m = u.max_abs();
    if m > 0.0 {
        1e-8 * m
    } else {
        1e-8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub p: f64,
    pub energy: f64,
    pub lp_norm_p: f64,
    pub rayleigh: Option<f64>,
}

pub fn energy_report(u: &ScalarField, p: f64) -> Result<EnergyReport> {
    check_exponent(p)?;
    let energy = energy_raw(u.domain(), u.values(), p);
    let lp_norm_p = lp_pow_raw(u.domain(), u.values(), p);
    Ok(EnergyReport { p, energy, lp_norm_p, rayleigh: (lp_norm_p > 0.0).then(|| energy / lp_norm_p) })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn interval(n: usize) -> Arc<GridDomain> {
        Arc::new(GridDomain::interval(n, 1.0).unwrap())
    }

    fn random_field(d: &Arc<GridDomain>, rng: &mut ChaCha8Rng) -> ScalarField {
        let v = (0..d.active_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::new(d.clone(), v).unwrap()
    }

    #[test]
    fn zero_field() {
        let u = ScalarField::zeros(interval(11));
        assert_eq!(p_energy(&u, 1.5).unwrap(), 0.0);
        assert_eq!(lp_norm(&u, 3.0).unwrap(), 0.0);
        assert!(matches!(rayleigh(&u, 2.0), Err(Error::ZeroDenominator)));
        assert!(apply_p_laplacian(&u, 1.5).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(normalized_energy(&u, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_exponent() {
        let u = ScalarField::zeros(interval(5));
        assert!(matches!(p_energy(&u, 1.0), Err(Error::InvalidExponent(_))));
        assert!(matches!(lp_norm(&u, 0.5), Err(Error::InvalidExponent(_))));
        assert!(matches!(normalized_energy(&u, f64::NAN), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn hat_function_energy() {
        let d = interval(101);
        let mut v = vec![0.0; 99];
        v[49] = 1.0; // node 50, x = 0.5
        let u = ScalarField::new(d, v).unwrap();
        assert!((p_energy(&u, 2.0).unwrap() - 200.0).abs() < 1e-9);
        // two segments of slope 1/h: 2 h (1/h)^p
        let e3 = p_energy(&u, 3.0).unwrap();
        assert!((e3 - 2.0 * 0.01 * 100f64.powi(3)).abs() < 1e-6);
    }

    #[test]
    fn sine_oracles() {
        // trapezoid-rule oracles: int pi^2 cos^2 = pi^2/2, int sin^2 = 1/2
        let u = ScalarField::from_fn(interval(1001), |x, _| (PI * x).sin()).unwrap();
        let e = p_energy(&u, 2.0).unwrap();
        assert!((e / (PI * PI / 2.0) - 1.0).abs() < 1e-3);
        let n = lp_norm(&u, 2.0).unwrap();
        assert!((n / 0.5f64.sqrt() - 1.0).abs() < 1e-3);
        let r = rayleigh(&u, 2.0).unwrap();
        assert!((r / (PI * PI) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn constant_field_norm() {
        let u = ScalarField::constant(interval(10001), 1.0);
        assert!((lp_norm(&u, 2.5).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn homogeneity() {
        let d = Arc::new(GridDomain::unit_square(9).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &p in &[1.5, 2.0, 3.7] {
            let u = random_field(&d, &mut rng);
            for &t in &[-2.5, 0.3, 7.0] {
                let ut = u.scaled(t);
                let lhs = p_energy(&ut, p).unwrap();
                let rhs = t.abs().powf(p) * p_energy(&u, p).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs);
                let r = rayleigh(&ut, p).unwrap() / rayleigh(&u, p).unwrap();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euler_identity() {
        let d = Arc::new(GridDomain::unit_square(10).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &p in &[1.3, 2.0, 2.5, 4.0] {
            let u = random_field(&d, &mut rng);
            let au = apply_p_laplacian(&u, p).unwrap();
            let lhs = au.dot(&u).unwrap();
            let e = p_energy(&u, p).unwrap();
            let tol = if p == 2.0 { 1e-12 } else { 1e-9 };
            assert!((lhs - e).abs() <= tol * e, "p={p}: {lhs} vs {e}");
        }
    }

    #[test]
    fn p2_matches_assembled_stiffness() {
        let d = Arc::new(GridDomain::unit_square(7).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_field(&d, &mut rng);
        let k = crate::linalg::assemble_stiffness(&d);
        let ku = k.mul_vec(u.values());
        let au = apply_p_laplacian(&u, 2.0).unwrap();
        for (a, b) in au.values().iter().zip(&ku) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let d = Arc::new(GridDomain::unit_square(8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &p in &[1.5, 3.0] {
            for _ in 0..5 {
                let u = random_field(&d, &mut rng);
                let v = random_field(&d, &mut rng);
                let step = 1e-5;
                let ep = p_energy(&u.axpy(step, &v).unwrap(), p).unwrap();
                let em = p_energy(&u.axpy(-step, &v).unwrap(), p).unwrap();
                let fd = (ep - em) / (2.0 * step) / p;
                let an = apply_p_laplacian(&u, p).unwrap().dot(&v).unwrap();
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-12), "p={p}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn picone_basic_cases() {
        let d = Arc::new(GridDomain::unit_square(12).unwrap());
        let w = ScalarField::from_fn(d.clone(), |x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
        for &p in &[1.5, 2.0, 3.0] {
            let eps = default_picone_eps(&w);
            assert!(picone_gap(&w, &w, p, eps).unwrap().abs() < 1e-14);
            let min_w = w.values().iter().cloned().fold(f64::INFINITY, f64::min);
            let g = picone_gap(&w.scaled(2.0), &w, p, 1e-8 * min_w).unwrap();
            assert!(g.abs() < 1e-10, "p={p}: collinear gap {g}");
        }
        let bump = ScalarField::from_fn(d.clone(), |x, y| x * (1.0 - x) * y * y * (1.0 - y)).unwrap();
        assert!(picone_gap(&w, &bump, 2.0, 1e-8).unwrap() > 1e-3);

        let neg = w.scaled(-1.0);
        assert!(matches!(picone_gap(&neg, &w, 2.0, 1e-8), Err(Error::NegativeValue { .. })));
        assert!(picone_gap(&w, &w, 2.0, 0.0).is_err());
    }

    #[test]
    fn normalized_energy_of_affine_field() {
        // u = 2x + y on a domain where every cell sees only unknowns is not
        // possible with Dirichlet nodes, so check the power mean directly on
        // a field with |grad u| = c on all cells: the 1D tent u = min(x, 1-x).
        let d = interval(101);
        let u = ScalarField::from_fn(d, |x, _| x.min(1.0 - x)).unwrap();
        for &s in &[1.2, 2.0, 3.5, 8.0] {
            assert!((normalized_energy(&u, s).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_report_fields() {
        let u = ScalarField::from_fn(interval(201), |x, _| (PI * x).sin()).unwrap();
        let r = energy_report(&u, 2.0).unwrap();
        assert!((r.rayleigh.unwrap() - r.energy / r.lp_norm_p).abs() < 1e-12);
        let z = energy_report(&ScalarField::zeros(interval(5)), 2.0).unwrap();
        assert!(z.rayleigh.is_none());
    }

    #[test]
    fn residual_floor_is_tiny_for_smooth_flux() {
        let d = interval(1001);
        let u = ScalarField::from_fn(d.clone(), |x, _| (PI * x).sin()).unwrap();
        let r = p_laplacian_raw(&d, u.values(), 3.0);
        let floor = residual_floor(&d, u.values(), 3.0);
        assert!(floor < 1e-9 * norm_of(&r).max(1.0), "{floor}");
        // a flat middle cell at p < 2 dominates
        let d = interval(100);
        let u = ScalarField::from_fn(d.clone(), |x, _| (PI * x).sin()).unwrap();
        assert!(residual_floor(&d, u.values(), 1.5) > 1e3 * residual_floor(&d, u.values(), 2.5));
        assert_eq!(residual_floor(&d, &vec![0.0; 98], 1.5), 0.0);
    }

    fn norm_of(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}
