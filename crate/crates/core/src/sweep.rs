//! Sweeps of the first (and bounded higher) eigenvalues over a grid of
//! exponents, and the checks run on them.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::domain::GridDomain;
use crate::eigen::{first_eigen, EigenOptions, EigenPair, Method};
use crate::error::{check_exponent, Error, Result};
use crate::field::{write_field, ScalarField};
use crate::functional::{normalized_energy, pow_norm};
use crate::higher::{build_disjoint_system, equal_partition, minimax_upper_bound, optimize_partition_1d};
use crate::par;

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub eigen: EigenOptions,
    pub method: Method,
    /// Start each exponent from the previous converged eigenfield. Forces a
    /// sequential sweep.
    pub warm_start: bool,
    /// When set, eigenfields are written to `out_dir/fields/`.
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { eigen: EigenOptions::default(), method: Method::Descent, warm_start: false, out_dir: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub p: f64,
    pub lambda_1: Option<f64>,
    /// Disjoint-support upper bounds for `m = 2..=m_max`.
    pub lambda_m: BTreeMap<usize, f64>,
    /// Path of the persisted eigenfield, relative to the output directory.
    pub field_ref: Option<String>,
    pub residual: Option<f64>,
    pub wall_time: f64,
    pub status: RecordStatus,
    pub error: Option<String>,
    #[serde(skip)]
    pub field: Option<ScalarField>,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }

    fn failed(p: f64, wall_time: f64, e: &Error) -> Self {
        Self {
            p,
            lambda_1: None,
            lambda_m: BTreeMap::new(),
            field_ref: None,
            residual: None,
            wall_time,
            status: RecordStatus::Failed,
            error: Some(e.to_string()),
            field: None,
        }
    }
}

/// Upper bound for `lambda^(m)`: optimized subintervals in 1D, equal column
/// strips in 2D.
pub fn higher_bound(domain: &Arc<GridDomain>, p: f64, m: usize, opts: &EigenOptions) -> Result<f64> {
    if domain.dim() == 1 {
        Ok(optimize_partition_1d(domain, p, m, opts)?.bound)
    } else {
        let parts = equal_partition(domain, m)?;
        minimax_upper_bound(&build_disjoint_system(domain, p, &parts, opts)?)
    }
}

fn solve_one(
    domain: &Arc<GridDomain>,
    p: f64,
    m_max: usize,
    opts: &SweepOptions,
    initial: Option<Vec<f64>>,
) -> Result<(EigenPair, BTreeMap<usize, f64>)> {
    let eopts = EigenOptions { initial, ..opts.eigen.clone() };
    let pair = first_eigen(domain, p, opts.method, &eopts)?;
    let mut bounds = BTreeMap::new();
    for m in 2..=m_max {
        bounds.insert(m, higher_bound(domain, p, m, &opts.eigen)?);
    }
    Ok((pair, bounds))
}

fn record_from(
    p: f64,
    start: Instant,
    outcome: Result<(EigenPair, BTreeMap<usize, f64>)>,
    out_dir: Option<&Path>,
) -> SweepRecord {
    let (pair, bounds) = match outcome {
        Ok(v) => v,
        Err(e) => return SweepRecord::failed(p, start.elapsed().as_secs_f64(), &e),
    };
    let mut field_ref = None;
    if let Some(dir) = out_dir {
        let rel = format!("fields/u_p{p}.f64");
        let desc = format!("first eigenfield, p = {p}, lambda = {:.16e}", pair.lambda);
        if let Err(e) = write_field(&dir.join(&rel), &pair.field, &desc) {
            return SweepRecord::failed(p, start.elapsed().as_secs_f64(), &e);
        }
        field_ref = Some(rel);
    }
    SweepRecord {
        p,
        lambda_1: Some(pair.lambda),
        lambda_m: bounds,
        field_ref,
        residual: Some(pair.residual),
        wall_time: start.elapsed().as_secs_f64(),
        status: RecordStatus::Ok,
        error: None,
        field: Some(pair.field),
    }
}

/// First eigenpair (and bounds up to `m_max`) at each exponent of `p_list`.
///
/// A solver failure marks its record failed and the sweep continues.
pub fn sweep(domain: &Arc<GridDomain>, p_list: &[f64], m_max: usize, opts: &SweepOptions) -> Result<Vec<SweepRecord>> {
    for &p in p_list {
        check_exponent(p)?;
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("exponents must be strictly increasing".into()));
    }
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max must be at least 1".into()));
    }
    let out_dir = opts.out_dir.as_deref();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("fields"))?;
    }
    if opts.warm_start {
        let mut records = Vec::with_capacity(p_list.len());
        let mut previous: Option<Vec<f64>> = None;
        for &p in p_list {
            let start = Instant::now();
            let rec = record_from(p, start, solve_one(domain, p, m_max, opts, previous.clone()), out_dir);
            if let Some(f) = &rec.field {
                previous = Some(f.values().to_vec());
            }
            records.push(rec);
        }
        Ok(records)
    } else {
        Ok(par::map(p_list, |&p| {
            let start = Instant::now();
            record_from(p, start, solve_one(domain, p, m_max, opts, None), out_dir)
        }))
    }
}

/// `p, lambda_1, lambda_2.., residual, status`, 17 significant digits.
/// Wall times are left out so that reruns are byte-identical.
pub fn write_records_csv(path: &Path, records: &[SweepRecord], m_max: usize) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let mut header = vec!["p".to_string(), "lambda_1".to_string()];
    header.extend((2..=m_max).map(|m| format!("lambda_{m}")));
    header.extend(["residual".to_string(), "status".to_string()]);
    writeln!(out, "{}", header.join(","))?;
    let num = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in records {
        let mut row = vec![format!("{:.16e}", r.p), num(r.lambda_1)];
        row.extend((2..=m_max).map(|m| num(r.lambda_m.get(&m).copied())));
        row.push(num(r.residual));
        row.push(if r.is_ok() { "ok".into() } else { "failed".into() });
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityViolation {
    pub p_lo: f64,
    pub p_hi: f64,
    pub g_lo: f64,
    pub g_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub slack: f64,
    /// `(p, p lambda_p^(1/p))` for every successful record.
    pub values: Vec<(f64, f64)>,
    pub violations: Vec<MonotonicityViolation>,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flags adjacent successful records with `g(p_hi) <= g(p_lo) (1 - slack)`
/// where `g(p) = p lambda_p^(1/p)`.
pub fn monotonicity_check(records: &[SweepRecord], slack: f64) -> MonotonicityReport {
    let values: Vec<(f64, f64)> =
        records.iter().filter_map(|r| r.lambda_1.map(|l| (r.p, r.p * l.powf(1.0 / r.p)))).collect();
    let violations = values
        .windows(2)
        .filter(|w| w[1].1 <= w[0].1 * (1.0 - slack))
        .map(|w| MonotonicityViolation { p_lo: w[0].0, p_hi: w[1].0, g_lo: w[0].1, g_hi: w[1].1 })
        .collect();
    MonotonicityReport { slack, values, violations }
}

/// Whether each successful record satisfies `lambda^(m) <= lambda^(m+1)`
/// across `lambda_1` and its bounds.
pub fn chain_violations(records: &[SweepRecord]) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for r in records {
        let Some(l1) = r.lambda_1 else { continue };
        let mut prev = l1;
        for (&m, &b) in &r.lambda_m {
            if b < prev {
                out.push((r.p, m - 1));
            }
            prev = b;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitEntry {
    pub delta: f64,
    pub p: f64,
    pub lambda: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitProbeReport {
    pub p_target: f64,
    pub side: Side,
    pub lambda_target: Option<f64>,
    pub entries: Vec<LimitEntry>,
    /// Gaps strictly decrease along the given offsets.
    pub monotone: bool,
    pub final_gap_below_tol: bool,
}

/// `|lambda_{p -/+ delta} - lambda_p|` for each offset, in the given order.
pub fn one_sided_limit_probe(
    domain: &Arc<GridDomain>,
    p_target: f64,
    deltas: &[f64],
    side: Side,
    opts: &EigenOptions,
    gap_tol: f64,
) -> Result<LimitProbeReport> {
    check_exponent(p_target)?;
    let ps: Vec<f64> = deltas
        .iter()
        .map(|&d| match side {
            Side::Left => p_target - d,
            Side::Right => p_target + d,
        })
        .collect();
    for (&p, &d) in ps.iter().zip(deltas) {
        if !(d > 0.0) {
            return Err(Error::InvalidInput(format!("offsets must be positive, got {d}")));
        }
        check_exponent(p)?;
    }
    if deltas.is_empty() {
        return Ok(LimitProbeReport {
            p_target,
            side,
            lambda_target: None,
            entries: Vec::new(),
            monotone: true,
            final_gap_below_tol: true,
        });
    }
    let mut all = ps.clone();
    all.push(p_target);
    let lambdas = par::map(&all, |&p| crate::eigen::first_eigen_descent(domain, p, opts).map(|e| e.lambda))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let target = *lambdas.last().expect("target appended");
    let entries: Vec<LimitEntry> = deltas
        .iter()
        .zip(&ps)
        .zip(&lambdas)
        .map(|((&delta, &p), &lambda)| LimitEntry { delta, p, lambda, gap: (lambda - target).abs() })
        .collect();
    let monotone = entries.windows(2).all(|w| w[1].gap < w[0].gap);
    let final_gap_below_tol = entries.last().is_some_and(|e| e.gap <= gap_tol);
    Ok(LimitProbeReport { p_target, side, lambda_target: Some(target), entries, monotone, final_gap_below_tol })
}

/// `sum_cells vol |grad u_s - grad u_p|^s` after sign alignment.
pub fn eigenfield_convergence_metric(u_s: &ScalarField, u_p: &ScalarField, s: f64) -> Result<f64> {
    check_exponent(s)?;
    if !u_s.same_domain(u_p) {
        return Err(Error::InvalidInput("fields live on different domains".into()));
    }
    let (a, b) = (u_s.sign_aligned(), u_p.sign_aligned());
    Ok(a.domain()
        .cells()
        .iter()
        .map(|c| {
            let (ga, gb) = (c.gradient(a.values()), c.gradient(b.values()));
            c.volume * pow_norm([ga[0] - gb[0], ga[1] - gb[1]], s)
        })
        .sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct ClarksonReport {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Clarkson's inequality for the cellwise gradients of `u` and `v` in `L^s`.
///
/// For `s >= 2`: `|(a+b)/2|^s + |(a-b)/2|^s <= (|a|^s + |b|^s) / 2` (norms
/// to the power `s`). For `1 < s < 2`, with `q = s / (s - 1)`:
/// `|(a+b)/2|^q + |(a-b)/2|^q <= ((|a|^s + |b|^s) / 2)^(q-1)`.
/// `holds` allows a relative slack of `1e-12`.
pub fn clarkson_check(u: &ScalarField, v: &ScalarField, s: f64) -> Result<ClarksonReport> {
    check_exponent(s)?;
    u.check_same_domain(v)?;
    let (mut a, mut b, mut plus, mut minus) = (0.0, 0.0, 0.0, 0.0);
    for c in u.domain().cells() {
        let (gu, gv) = (c.gradient(u.values()), c.gradient(v.values()));
        a += c.volume * pow_norm(gu, s);
        b += c.volume * pow_norm(gv, s);
        plus += c.volume * pow_norm([0.5 * (gu[0] + gv[0]), 0.5 * (gu[1] + gv[1])], s);
        minus += c.volume * pow_norm([0.5 * (gu[0] - gv[0]), 0.5 * (gu[1] - gv[1])], s);
    }
    let (lhs, rhs) = if s >= 2.0 {
        (plus + minus, 0.5 * (a + b))
    } else {
        let e = 1.0 / (s - 1.0);
        (plus.powf(e) + minus.powf(e), (0.5 * (a + b)).powf(e))
    };
    Ok(ClarksonReport { s, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) })
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerMeanReport {
    /// `(s, normalized_energy(u, s))`.
    pub values: Vec<(f64, f64)>,
    pub holds: bool,
}

/// `normalized_energy(u, s)` along increasing `s`; holds when nondecreasing
/// up to relative rounding `1e-12`.
pub fn power_mean_check(u: &ScalarField, s_list: &[f64]) -> Result<PowerMeanReport> {
    let values = s_list.iter().map(|&s| normalized_energy(u, s).map(|v| (s, v))).collect::<Result<Vec<_>>>()?;
    let holds = values.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 >= w[0].1 * (1.0 - 1e-12));
    Ok(PowerMeanReport { values, holds })
}

/// `start, start + step, ...` up to `stop` inclusive (with a tolerance of
/// `step / 1000` on the last point).
pub fn p_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::InvalidInput(format!("bad grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-3).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}
