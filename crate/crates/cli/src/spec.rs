//! Domain specifications on the command line:
//! `interval:N[:L]`, `square:N`, `mask:PATH[:H]`, `crack:N:K`.

use std::fs;
use std::path::PathBuf;

use plap_core::{parse_mask, Error, GridDomain, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval { nodes: usize, length: f64 },
    Square { nodes: usize },
    Mask { path: PathBuf, h: Option<f64> },
    Crack { cells: usize, width: usize },
}

fn bad(spec: &str, why: &str) -> Error {
    Error::InvalidInput(format!("domain '{spec}': {why}"))
}

fn num<T: std::str::FromStr>(spec: &str, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| bad(spec, &format!("cannot parse {what} '{s}'")))
}

impl DomainSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').ok_or_else(|| bad(spec, "expected KIND:ARGS"))?;
        let args: Vec<&str> = rest.split(':').collect();
        match (kind, args.as_slice()) {
            ("interval", [n]) => Ok(Self::Interval { nodes: num(spec, n, "node count")?, length: 1.0 }),
            ("interval", [n, l]) => {
                Ok(Self::Interval { nodes: num(spec, n, "node count")?, length: num(spec, l, "length")? })
            }
            ("square", [n]) => Ok(Self::Square { nodes: num(spec, n, "node count")? }),
            ("crack", [n, k]) => {
                Ok(Self::Crack { cells: num(spec, n, "base size")?, width: num(spec, k, "crack width")? })
            }
            ("mask", _) => match rest.rsplit_once(':') {
                Some((path, h)) if !path.is_empty() && h.parse::<f64>().is_ok() => {
                    Ok(Self::Mask { path: path.into(), h: Some(num(spec, h, "spacing")?) })
                }
                _ => Ok(Self::Mask { path: rest.into(), h: None }),
            },
            ("interval" | "square" | "crack", _) => Err(bad(spec, "wrong number of arguments")),
            _ => Err(bad(spec, "unknown kind; use interval, square, mask or crack")),
        }
    }

    /// Builds the domain. Masks default to spacing `1 / (max(rows, cols) - 1)`.
    pub fn build(&self) -> Result<GridDomain> {
        match self {
            Self::Interval { nodes, length } => GridDomain::interval(*nodes, *length),
            Self::Square { nodes } => GridDomain::unit_square(*nodes),
            Self::Crack { cells, width } => GridDomain::crack_family(*cells, *width),
            Self::Mask { path, h } => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::InvalidInput(format!("cannot read mask {}: {e}", path.display())))?;
                let mask = parse_mask(&text)?;
                let extent = mask.len().max(mask.first().map_or(0, Vec::len));
                let h = h.unwrap_or(1.0 / (extent.max(2) - 1) as f64);
                GridDomain::masked_grid(&mask, h)
            }
        }
    }

    /// Files read while building the domain.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Self::Mask { path, .. } => vec![path.clone()],
            _ => Vec::new(),
        }
    }
}
