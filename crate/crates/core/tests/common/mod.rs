//! Reference values computed without the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `2 pi / (p sin(pi / p))`.
pub fn pi_p(p: f64) -> f64 {
    2.0 * PI / (p * (PI / p).sin())
}

fn phi(x: f64, q: f64) -> f64 {
    x.abs().powf(q - 1.0) * x.signum()
}

/// First Dirichlet eigenvalue of `-(|u'|^{p-2} u')' = lambda |u|^{p-2} u` on
/// `(0, 1)` by shooting.
///
/// Integrates `u' = phi_q(v)`, `v' = -lambda phi_p(u)` (with `q` the
/// conjugate exponent) from `u = 0, v = 1` and bisects on `lambda` until the
/// first zero of `v`, the top of the symmetric eigenfunction, sits at 1/2.
pub fn shooting_lambda(p: f64) -> f64 {
    let q = p / (p - 1.0);
    // Position of the first zero of v, or +inf if none before x = 1.
    let first_turn = |lambda: f64| -> f64 {
        let f = |u: f64, v: f64| (phi(v, q), -lambda * phi(u, p));
        let steps = 200_000;
        let h = 1.0 / steps as f64;
        let (mut u, mut v) = (0.0f64, 1.0f64);
        for i in 0..steps {
            let (k1u, k1v) = f(u, v);
            let (k2u, k2v) = f(u + 0.5 * h * k1u, v + 0.5 * h * k1v);
            let (k3u, k3v) = f(u + 0.5 * h * k2u, v + 0.5 * h * k2v);
            let (k4u, k4v) = f(u + h * k3u, v + h * k3v);
            let vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            if vn <= 0.0 {
                return (i as f64 + v / (v - vn)) * h;
            }
            v = vn;
        }
        f64::INFINITY
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while first_turn(hi) > 0.5 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if first_turn(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lowest eigenvalue of the 5-point Laplacian on an `a x b` block of
/// interior nodes with spacing `h` and zero values outside.
pub fn five_point_lambda(a: usize, b: usize, h: f64) -> f64 {
    let s = |k: usize| (PI / (2.0 * (k + 1) as f64)).sin().powi(2);
    4.0 / (h * h) * (s(a) + s(b))
}

/// The same eigenvalue from a dense symmetric eigensolve.
pub fn five_point_lambda_dense(a: usize, b: usize, h: f64) -> f64 {
    let n = a * b;
    let mut k = nalgebra::DMatrix::<f64>::zeros(n, n);
    let idx = |r: usize, c: usize| r * a + c;
    for r in 0..b {
        for c in 0..a {
            let i = idx(r, c);
            k[(i, i)] = 4.0;
            if c + 1 < a {
                k[(i, idx(r, c + 1))] = -1.0;
                k[(idx(r, c + 1), i)] = -1.0;
            }
            if r + 1 < b {
                k[(i, idx(r + 1, c))] = -1.0;
                k[(idx(r + 1, c), i)] = -1.0;
            }
        }
    }
    let e = nalgebra::SymmetricEigen::new(k);
    e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min) / (h * h)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
