use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::GridDomain;
use crate::error::{Error, Result};

/// Nodal values of a P1 field on the active nodes of a domain. Boundary
/// nodes are implicitly zero.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.active_count() {
            return Err(Error::InvalidInput(format!(
                "field has {} values but domain has {} active nodes",
                values.len(),
                domain.active_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at active node {i}")));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn constant(domain: Arc<GridDomain>, c: f64) -> Self {
        let n = domain.active_count();
        Self { domain, values: vec![c; n] }
    }

    /// Sample `f(x, y)` at every active node.
    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = domain
            .active_nodes()
            .iter()
            .map(|&n| {
                let [x, y] = domain.node_coords(n);
                f(x, y)
            })
            .collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        self.map(|v| t * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { domain: Arc::clone(&self.domain), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &ScalarField) -> Result<Self> {
        self.check_same_domain(other)?;
        Ok(Self {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + t * b).collect(),
        })
    }

    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_domain(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_domain(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || self.domain.hash() == other.domain.hash()
    }

    pub fn check_same_domain(&self, other: &ScalarField) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    /// Values on every grid node, zero on pinned nodes.
    pub fn to_full_grid(&self) -> Vec<f64> {
        let mut full = vec![0.0; self.domain.node_count()];
        for (&node, &v) in self.domain.active_nodes().iter().zip(&self.values) {
            full[node] = v;
        }
        full
    }

    /// Representative with the largest-magnitude entry positive.
    pub fn sign_aligned(&self) -> Self {
        let pivot = self.values.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            self.scaled(-1.0)
        } else {
            self.clone()
        }
    }
}

/// JSON sidecar written next to a binary field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub domain_hash: String,
    pub active_count: usize,
    pub description: String,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write the active values as little-endian f64 to `path` and the sidecar
/// to `path.json`. Returns both paths.
pub fn write_field(path: &Path, field: &ScalarField, description: &str) -> Result<(PathBuf, PathBuf)> {
    let mut bytes = Vec::with_capacity(8 * field.len());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let sidecar = FieldSidecar {
        domain_hash: field.domain().hash().to_string(),
        active_count: field.len(),
        description: description.to_string(),
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&sidecar)?)?;
    Ok((path.to_path_buf(), side))
}

/// Read a field written by [`write_field`], checking it belongs to `domain`.
pub fn read_field(path: &Path, domain: Arc<GridDomain>) -> Result<(ScalarField, FieldSidecar)> {
    let sidecar: FieldSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    if sidecar.domain_hash != domain.hash() {
        return Err(Error::DomainMismatch);
    }
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * sidecar.active_count || sidecar.active_count != domain.active_count() {
        return Err(Error::InvalidInput(format!(
            "{}: expected {} values, file holds {} bytes",
            path.display(),
            domain.active_count(),
            bytes.len()
        )));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok((ScalarField::new(domain, values)?, sidecar))
}

/// CSV with node coordinates and values for every grid node (`x,value` in
/// 1D, `x,y,value` in 2D), 17 significant digits.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let domain = field.domain();
    let full = field.to_full_grid();
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    if domain.dim() == 1 {
        writeln!(out, "x,value")?;
    } else {
        writeln!(out, "x,y,value")?;
    }
    for (node, v) in full.iter().enumerate() {
        let [x, y] = domain.node_coords(node);
        if domain.dim() == 1 {
            writeln!(out, "{x:.16e},{v:.16e}")?;
        } else {
            writeln!(out, "{x:.16e},{y:.16e},{v:.16e}")?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let d = Arc::new(GridDomain::interval(5, 1.0).unwrap());
        assert!(ScalarField::new(d.clone(), vec![0.0; 2]).is_err());
        assert!(ScalarField::new(d.clone(), vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(ScalarField::new(d, vec![0.0; 3]).is_ok());
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = Arc::new(GridDomain::unit_square(7).unwrap());
        let u = ScalarField::from_fn(d.clone(), |x, y| (x * 3.0).sin() * y.exp()).unwrap();
        let path = dir.path().join("u.f64");
        write_field(&path, &u, "test").unwrap();
        let (back, side) = read_field(&path, d).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(side.description, "test");

        let other = Arc::new(GridDomain::unit_square(8).unwrap());
        assert!(matches!(read_field(&path, other), Err(Error::DomainMismatch)));
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let dir = tempfile::tempdir().unwrap();
        let d = Arc::new(GridDomain::interval(6, 1.0).unwrap());
        let u = ScalarField::constant(d, 1.0);
        let path = dir.path().join("u.csv");
        write_field_csv(&path, &u).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(1).unwrap().ends_with("0.0000000000000000e0"));
    }

    #[test]
    fn sign_alignment() {
        let d = Arc::new(GridDomain::interval(5, 1.0).unwrap());
        let u = ScalarField::new(d, vec![0.5, -2.0, 1.0]).unwrap();
        assert_eq!(u.sign_aligned().values(), &[-0.5, 2.0, -1.0]);
    }
}
