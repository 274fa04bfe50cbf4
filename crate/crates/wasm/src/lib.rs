//! Browser bindings for the static demo in `www/`.
//!
//! Fields are returned on the full node grid (pinned nodes hold 0), row-major,
//! so the page can draw them without knowing which nodes are active.

use std::sync::Arc;

use plap_core::eigen::first_eigen;
use plap_core::ppoisson::{torsion_function, SolveOptions};
use plap_core::{EigenOptions, GridDomain, Method};
use wasm_bindgen::prelude::*;

/// A solved field plus the scalar the page reports next to it.
#[wasm_bindgen]
pub struct Solution {
    value: f64,
    iterations: usize,
    residual: f64,
    rows: usize,
    cols: usize,
    field: Vec<f64>,
}

#[wasm_bindgen]
impl Solution {
    /// Eigenvalue, or the maximum of the torsion function.
    #[wasm_bindgen(getter)]
    pub fn value(&self) -> f64 {
        self.value
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }
    /// Copied into a `Float64Array`.
    pub fn field(&self) -> Vec<f64> {
        self.field.clone()
    }
}

fn build(shape: &str, n: usize) -> Result<Arc<GridDomain>, String> {
    let d = match shape {
        "interval" => GridDomain::interval(n, 1.0),
        "square" => GridDomain::unit_square(n),
        "lshape" => {
            let cells = n.saturating_sub(1);
            let sq: Vec<Vec<bool>> =
                (0..cells).map(|r| (0..cells).map(|c| r < cells / 2 || c < cells / 2).collect()).collect();
            GridDomain::from_squares(&sq, 1.0 / cells.max(1) as f64)
        }
        "crack" => GridDomain::crack_family(n.saturating_sub(1), 1),
        other => return Err(format!("unknown shape '{other}'")),
    };
    d.map(Arc::new).map_err(|e| e.to_string())
}

fn grid_shape(d: &GridDomain) -> (usize, usize) {
    match d.shape() {
        [n] => (1, *n),
        s => (s[0], s[1]),
    }
}

fn eigenpair(shape: &str, n: usize, p: f64) -> Result<Solution, String> {
    let d = build(shape, n)?;
    let pair = first_eigen(&d, p, Method::Descent, &EigenOptions::default()).map_err(|e| e.to_string())?;
    let (rows, cols) = grid_shape(&d);
    Ok(Solution {
        value: pair.lambda,
        iterations: pair.iterations,
        residual: pair.residual,
        rows,
        cols,
        field: pair.field.to_full_grid(),
    })
}

fn torsion_solution(shape: &str, n: usize, p: f64) -> Result<Solution, String> {
    let d = build(shape, n)?;
    let rep = torsion_function(&d, p, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let (rows, cols) = grid_shape(&d);
    Ok(Solution {
        value: rep.solution.max_abs(),
        iterations: rep.iterations,
        residual: rep.residual_norm,
        rows,
        cols,
        field: rep.solution.to_full_grid(),
    })
}

/// `[p_0, lambda_0, p_1, lambda_1, ...]` for `count` exponents spread evenly
/// over `[p_min, p_max]`, each warm-started from the previous eigenfield.
fn curve(shape: &str, n: usize, p_min: f64, p_max: f64, count: usize) -> Result<Vec<f64>, String> {
    if count < 2 || !(p_min > 1.0 && p_max > p_min) {
        return Err(format!("need 1 < p_min < p_max and at least 2 points, got [{p_min}, {p_max}] x {count}"));
    }
    let d = build(shape, n)?;
    let mut opts = EigenOptions::default();
    let mut out = Vec::with_capacity(2 * count);
    for i in 0..count {
        let p = p_min + (p_max - p_min) * i as f64 / (count - 1) as f64;
        let pair = first_eigen(&d, p, Method::Descent, &opts).map_err(|e| format!("p = {p}: {e}"))?;
        out.extend([p, pair.lambda]);
        opts.initial = Some(pair.field.into_values());
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn first_eigenpair(shape: &str, n: usize, p: f64) -> Result<Solution, JsError> {
    eigenpair(shape, n, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn torsion(shape: &str, n: usize, p: f64) -> Result<Solution, JsError> {
    torsion_solution(shape, n, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lambda_curve(shape: &str, n: usize, p_min: f64, p_max: f64, count: usize) -> Result<Vec<f64>, JsError> {
    curve(shape, n, p_min, p_max, count).map_err(|e| JsError::new(&e))
}
