//! Property suites that check the structural laws on concrete grids and
//! report one pass/fail entry per law.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::GridDomain;
use crate::eigen::{first_eigen_descent, EigenOptions};
use crate::error::{Error, Result};
use crate::field::{read_field, ScalarField};
use crate::functional::{apply_p_laplacian, p_energy, picone_gap};
use crate::higher::{build_disjoint_system, equal_partition, minimax_upper_bound, oracle_lambda_1d};
use crate::ppoisson::comparison_check;
use crate::sweep::{
    chain_violations, clarkson_check, eigenfield_convergence_metric, monotonicity_check, p_grid, power_mean_check,
    sweep, SweepOptions, SweepRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Oracles,
    Monotonicity,
    Comparison,
    Picone,
    Convergence,
    Clarkson,
    PowerMean,
    Gradient,
    Chain,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Oracles,
        Suite::Monotonicity,
        Suite::Comparison,
        Suite::Picone,
        Suite::Convergence,
        Suite::Clarkson,
        Suite::PowerMean,
        Suite::Gradient,
        Suite::Chain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracles => "oracles",
            Suite::Monotonicity => "monotonicity",
            Suite::Comparison => "comparison",
            Suite::Picone => "picone",
            Suite::Convergence => "convergence",
            Suite::Clarkson => "clarkson",
            Suite::PowerMean => "power-mean",
            Suite::Gradient => "gradient",
            Suite::Chain => "chain",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a suite name; `all` expands to every suite.
pub fn parse_suites(name: &str) -> Result<Vec<Suite>> {
    if name == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    Ok(vec![name.parse()?])
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Node count of the unit interval used by the 1D suites.
    pub interval_nodes: usize,
    /// Nodes per side of the unit square used by the 2D suites.
    pub square_nodes: usize,
    /// Eigen-residual tolerance.
    pub eigen_tol: f64,
    /// Gradient-norm tolerance of the p-Poisson solves.
    pub poisson_tol: f64,
    /// Relative slack of the monotonicity law.
    pub monotonicity_slack: f64,
    /// Relative tolerance of the eigenvalue oracles.
    pub oracle_tol: f64,
    /// Relative tolerance of the higher eigenvalue bounds against the closed form.
    pub chain_tol: f64,
    /// Where sweep eigenfields are persisted; the power-mean suite reads them
    /// back from here. In memory when unset.
    pub out_dir: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            interval_nodes: 1001,
            square_nodes: 67,
            eigen_tol: 1e-9,
            poisson_tol: 1e-10,
            monotonicity_slack: 1e-3,
            oracle_tol: 0.01,
            chain_tol: 0.015,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LawResult {
    pub suite: Suite,
    pub law: String,
    pub passed: bool,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub results: Vec<LawResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    /// Plain-text table, one line per law.
    pub fn table(&self) -> String {
        let w = self.results.iter().map(|r| r.law.len()).max().unwrap_or(0);
        let mut s = String::new();
        for r in &self.results {
            s += &format!(
                "{:<6} {:<12} {:<w$} {:>8.2}s  {}\n",
                if r.passed { "PASS" } else { "FAIL" },
                r.suite.name(),
                r.law,
                r.seconds,
                r.summary
            );
        }
        s
    }
}

struct Law {
    name: String,
    passed: bool,
    summary: String,
    metrics: BTreeMap<String, f64>,
}

impl Law {
    fn new(name: &str, passed: bool, summary: String) -> Self {
        Self { name: name.into(), passed, summary, metrics: BTreeMap::new() }
    }

    fn metric(mut self, key: impl Into<String>, v: f64) -> Self {
        self.metrics.insert(key.into(), v);
        self
    }
}

/// Lazily computed sweeps shared by the monotonicity, power-mean and chain
/// suites.
struct Sweeps<'a> {
    opts: &'a VerifyOptions,
    line: Option<Result<Vec<SweepRecord>>>,
    square: Option<Result<Vec<SweepRecord>>>,
}

const SWEEP_GRID: (f64, f64, f64) = (1.5, 3.0, 0.25);
const CHAIN_M: usize = 4;

impl Sweeps<'_> {
    fn run(&self, domain: &Arc<GridDomain>, m_max: usize, tag: &str) -> Result<Vec<SweepRecord>> {
        let ps = p_grid(SWEEP_GRID.0, SWEEP_GRID.1, SWEEP_GRID.2)?;
        let sopts = SweepOptions {
            eigen: EigenOptions { seed: self.opts.seed, ..EigenOptions::with_tol(self.opts.eigen_tol) },
            out_dir: self.opts.out_dir.as_ref().map(|d| d.join(tag)),
            ..SweepOptions::default()
        };
        sweep(domain, &ps, m_max, &sopts)
    }

    fn ensure_line(&mut self) {
        if self.line.is_none() {
            let d = unit_interval(self.opts.interval_nodes);
            self.line = Some(d.and_then(|d| self.run(&d, CHAIN_M, "interval")));
        }
    }

    fn ensure_square(&mut self) {
        if self.square.is_none() {
            let d = GridDomain::unit_square(self.opts.square_nodes).map(Arc::new);
            self.square = Some(d.and_then(|d| self.run(&d, 1, "square")));
        }
    }

    fn line(&self) -> std::result::Result<&[SweepRecord], String> {
        view(&self.line)
    }

    fn square(&self) -> std::result::Result<&[SweepRecord], String> {
        view(&self.square)
    }
}

fn view(slot: &Option<Result<Vec<SweepRecord>>>) -> std::result::Result<&[SweepRecord], String> {
    match slot {
        Some(Ok(r)) => Ok(r),
        Some(Err(e)) => Err(e.to_string()),
        None => Err("sweep not run".into()),
    }
}

fn unit_interval(n: usize) -> Result<Arc<GridDomain>> {
    GridDomain::interval(n, 1.0).map(Arc::new)
}

fn failed_records(records: &[SweepRecord]) -> Vec<String> {
    records
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| format!("p={}: {}", r.p, r.error.as_deref().unwrap_or("failed")))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Runs the given suites in order. Setup errors (bad options) are returned;
/// failed laws and solver failures are report entries.
pub fn verify(suites: &[Suite], opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.interval_nodes < 3 || opts.square_nodes < 5 {
        return Err(Error::InvalidInput("verification grids are too small".into()));
    }
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut sweeps = Sweeps { opts, line: None, square: None };
    let mut results = Vec::new();
    for &suite in suites {
        let start = Instant::now();
        let laws = match suite {
            Suite::Oracles => oracles(opts),
            Suite::Monotonicity => monotonicity(&mut sweeps, opts),
            Suite::Comparison => comparison(opts),
            Suite::Picone => picone(opts),
            Suite::Convergence => convergence(opts),
            Suite::Clarkson => clarkson(opts),
            Suite::PowerMean => power_means(&mut sweeps, opts),
            Suite::Gradient => gradient(opts),
            Suite::Chain => chain(&mut sweeps, opts),
        };
        let laws = laws.unwrap_or_else(|e| vec![Law::new("setup", false, e.to_string())]);
        let seconds = start.elapsed().as_secs_f64() / laws.len() as f64;
        for l in laws {
            results.push(LawResult {
                suite,
                law: l.name,
                passed: l.passed,
                summary: l.summary,
                metrics: l.metrics,
                seconds,
            });
        }
    }
    Ok(VerifyReport { results })
}

fn oracles(opts: &VerifyOptions) -> Result<Vec<Law>> {
    let eo = EigenOptions { seed: opts.seed, ..EigenOptions::with_tol(opts.eigen_tol) };
    let line = unit_interval(opts.interval_nodes)?;
    let mut law = Law::new("first eigenvalue, interval", true, String::new());
    let mut parts = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let target = oracle_lambda_1d(p, 1, 1.0)?;
        match first_eigen_descent(&line, p, &eo) {
            Ok(pair) => {
                let e = rel(pair.lambda, target);
                law.passed &= e <= opts.oracle_tol;
                law = law.metric(format!("lambda_p{p}"), pair.lambda).metric(format!("rel_err_p{p}"), e);
                parts.push(format!("p={p}: {:.6} vs {:.6}", pair.lambda, target));
            }
            Err(e) => {
                law.passed = false;
                parts.push(format!("p={p}: {e}"));
            }
        }
    }
    law.summary = parts.join("; ");

    let square = Arc::new(GridDomain::unit_square(opts.square_nodes)?);
    let pi2 = std::f64::consts::PI.powi(2);
    let sq = match first_eigen_descent(&square, 2.0, &eo) {
        Ok(pair) => {
            let e = rel(pair.lambda, 2.0 * pi2);
            Law::new(
                "first eigenvalue, square, p=2",
                e <= opts.oracle_tol,
                format!("{:.6} vs 2 pi^2 = {:.6}", pair.lambda, 2.0 * pi2),
            )
            .metric("lambda", pair.lambda)
            .metric("rel_err", e)
        }
        Err(e) => Law::new("first eigenvalue, square, p=2", false, e.to_string()),
    };
    let halves = equal_partition(&square, 2)
        .and_then(|parts| build_disjoint_system(&square, 2.0, &parts, &eo))
        .and_then(|sys| minimax_upper_bound(&sys));
    let half = match halves {
        Ok(b) => {
            let e = rel(b, 5.0 * pi2);
            Law::new(
                "second eigenvalue bound, half squares, p=2",
                e <= opts.oracle_tol,
                format!("{b:.6} vs 5 pi^2 = {:.6}", 5.0 * pi2),
            )
            .metric("bound", b)
            .metric("rel_err", e)
        }
        Err(e) => Law::new("second eigenvalue bound, half squares, p=2", false, e.to_string()),
    };
    Ok(vec![law, sq, half])
}

fn monotonicity(sweeps: &mut Sweeps, opts: &VerifyOptions) -> Result<Vec<Law>> {
    sweeps.ensure_line();
    sweeps.ensure_square();
    let mut laws = Vec::new();
    for (name, records) in
        [("p lambda^(1/p) increasing, interval", sweeps.line()), ("p lambda^(1/p) increasing, square", sweeps.square())]
    {
        laws.push(match records {
            Err(e) => Law::new(name, false, e),
            Ok(records) => {
                let failed = failed_records(records);
                let rep = monotonicity_check(records, opts.monotonicity_slack);
                let g: Vec<String> = rep.values.iter().map(|(p, g)| format!("{p}:{g:.4}")).collect();
                let mut law = Law::new(
                    name,
                    failed.is_empty() && rep.holds(),
                    format!("{} violations, {} failed solves; g = {}", rep.violations.len(), failed.len(), g.join(" ")),
                )
                .metric("violations", rep.violations.len() as f64)
                .metric("failed_solves", failed.len() as f64);
                for (p, g) in &rep.values {
                    law = law.metric(format!("g_p{p}"), *g);
                }
                law
            }
        });
    }
    Ok(laws)
}

fn random_field(domain: &Arc<GridDomain>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Result<ScalarField> {
    let v = (0..domain.active_count()).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField::new(domain.clone(), v)
}

fn comparison(opts: &VerifyOptions) -> Result<Vec<Law>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xc0);
    let domains = [unit_interval(201)?, Arc::new(GridDomain::unit_square(17)?)];
    let mut laws = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let (mut worst, mut bad, mut errors) = (f64::NEG_INFINITY, 0usize, Vec::new());
        for draw in 0..20 {
            let d = &domains[draw % 2];
            let z1 = random_field(d, &mut rng, -1.0, 1.0)?;
            let gap = random_field(d, &mut rng, 0.0, 1.0)?;
            let z2 = z1.axpy(1.0, &gap)?;
            match comparison_check(&z1, &z2, p, opts.poisson_tol) {
                Ok(r) => {
                    worst = worst.max(r.max_violation);
                    bad += usize::from(!r.holds);
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
        let mut summary =
            format!("20 draws, {bad} violations, {} solver errors, max(w1 - w2) = {worst:.3e}", errors.len());
        if let Some(e) = errors.first() {
            summary += &format!(" (first error: {e})");
        }
        laws.push(
            Law::new(&format!("ordered sources give ordered solutions, p={p}"), bad == 0 && errors.is_empty(), summary)
                .metric("violations", bad as f64)
                .metric("max_violation", worst),
        );
    }
    Ok(laws)
}

fn picone(opts: &VerifyOptions) -> Result<Vec<Law>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x91);
    let domains = [unit_interval(101)?, Arc::new(GridDomain::unit_square(13)?)];
    let mut laws = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let (mut worst, mut collinear) = (f64::INFINITY, 0.0f64);
        for draw in 0..100 {
            let d = &domains[draw % 2];
            let u = random_field(d, &mut rng, 0.0, 1.0)?;
            let w = random_field(d, &mut rng, 0.0, 1.0)?;
            let scale = p_energy(&u, p)? + p_energy(&w, p)?;
            worst = worst.min(picone_gap(&u, &w, p, 1e-8)? / scale);

            let w = random_field(d, &mut rng, 0.1, 1.0)?;
            let c = rng.gen_range(0.5..2.0);
            let min = w.values().iter().copied().fold(f64::INFINITY, f64::min);
            collinear = collinear.max(picone_gap(&w.scaled(c), &w, p, 1e-8 * min)?.abs());
        }
        laws.push(
            Law::new(
                &format!("Picone gap nonnegative, p={p}"),
                worst >= -1e-12 && collinear <= 1e-8,
                format!("100 pairs: min gap / scale = {worst:.3e}; collinear max |gap| = {collinear:.3e}"),
            )
            .metric("min_relative_gap", worst)
            .metric("collinear_max_gap", collinear),
        );
    }
    Ok(laws)
}

fn convergence(opts: &VerifyOptions) -> Result<Vec<Law>> {
    let d = unit_interval(opts.interval_nodes)?;
    let eo = EigenOptions { seed: opts.seed, ..EigenOptions::with_tol(opts.eigen_tol) };
    let below = [1.7, 1.8, 1.9, 1.95];
    let above = [2.3, 2.2, 2.1, 2.05];
    let mut ps = vec![2.0];
    ps.extend(below);
    ps.extend(above);
    let fields: Vec<Result<ScalarField>> = crate::par::map(&ps, |&p| first_eigen_descent(&d, p, &eo).map(|e| e.field));
    let mut by_p = BTreeMap::new();
    for (p, f) in ps.iter().zip(fields) {
        match f {
            Ok(f) => {
                by_p.insert(p.to_bits(), f);
            }
            Err(e) => return Ok(vec![Law::new("eigenfield gradients converge", false, format!("p={p}: {e}"))]),
        }
    }
    let u2 = &by_p[&2.0f64.to_bits()];
    let mut laws = Vec::new();
    for (name, seq) in
        [("gradients converge as s increases to 2", &below[..]), ("gradients converge as s decreases to 2", &above[..])]
    {
        let metrics = seq
            .iter()
            .map(|&s| eigenfield_convergence_metric(&by_p[&s.to_bits()], u2, s))
            .collect::<Result<Vec<_>>>()?;
        let decreasing = metrics.windows(2).all(|w| w[1] < w[0]);
        let shown: Vec<String> = seq.iter().zip(&metrics).map(|(s, m)| format!("{s}:{m:.3e}")).collect();
        let mut law = Law::new(name, decreasing, shown.join(" "));
        for (s, m) in seq.iter().zip(&metrics) {
            law = law.metric(format!("metric_s{s}"), *m);
        }
        laws.push(law);
    }
    Ok(laws)
}

fn clarkson(opts: &VerifyOptions) -> Result<Vec<Law>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xc1);
    let domains = [unit_interval(101)?, Arc::new(GridDomain::unit_square(13)?)];
    let mut laws = Vec::new();
    for s in [1.5, 2.5, 4.0] {
        let (mut bad, mut worst) = (0usize, f64::NEG_INFINITY);
        for draw in 0..50 {
            let d = &domains[draw % 2];
            let u = random_field(d, &mut rng, -1.0, 1.0)?;
            let v = random_field(d, &mut rng, -1.0, 1.0)?;
            let r = clarkson_check(&u, &v, s)?;
            bad += usize::from(!r.holds);
            worst = worst.max((r.lhs - r.rhs) / r.rhs);
        }
        laws.push(
            Law::new(
                &format!("Clarkson inequality, s={s}"),
                bad == 0,
                format!("50 pairs, {bad} violations, max (lhs - rhs) / rhs = {worst:.3e}"),
            )
            .metric("violations", bad as f64)
            .metric("max_relative_excess", worst),
        );
    }
    Ok(laws)
}

fn power_means(sweeps: &mut Sweeps, opts: &VerifyOptions) -> Result<Vec<Law>> {
    let s_list = p_grid(1.2, 4.0, 0.2)?;
    let mut checked = 0usize;
    let mut bad = Vec::new();
    let mut missing = Vec::new();
    sweeps.ensure_line();
    sweeps.ensure_square();
    for (tag, records) in [("interval", sweeps.line()), ("square", sweeps.square())] {
        let records = match records {
            Ok(r) => r,
            Err(e) => {
                missing.push(format!("{tag}: {e}"));
                continue;
            }
        };
        for r in records {
            let field = match (&opts.out_dir, &r.field_ref, &r.field) {
                (Some(dir), Some(rel), Some(f)) => {
                    read_field(&dir.join(tag).join(rel), f.domain().clone()).map(|x| x.0)
                }
                (None, _, Some(f)) => Ok(f.clone()),
                _ => Err(Error::InvalidInput(format!("no eigenfield for p={}", r.p))),
            };
            match field.and_then(|f| power_mean_check(&f, &s_list)) {
                Ok(rep) => {
                    checked += 1;
                    if !rep.holds {
                        bad.push(format!("{tag} p={}", r.p));
                    }
                }
                Err(e) => missing.push(format!("{tag} p={}: {e}", r.p)),
            }
        }
    }
    let mut summary = format!("{checked} eigenfields, s = 1.2..4.0 step 0.2, {} violations", bad.len());
    if !bad.is_empty() {
        summary += &format!(" ({})", bad.join(", "));
    }
    if !missing.is_empty() {
        summary += &format!("; unavailable: {}", missing.join("; "));
    }
    Ok(vec![Law::new("power means of |grad u| nondecreasing in s", bad.is_empty() && missing.is_empty(), summary)
        .metric("fields_checked", checked as f64)
        .metric("violations", bad.len() as f64)])
}

fn gradient(opts: &VerifyOptions) -> Result<Vec<Law>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9d);
    let domains = [unit_interval(101)?, Arc::new(GridDomain::unit_square(11)?)];
    let mut laws = Vec::new();
    for p in [1.5, 3.0] {
        let mut worst = 0.0f64;
        for draw in 0..20 {
            let d = &domains[draw % 2];
            let u = random_field(d, &mut rng, -1.0, 1.0)?;
            let v = random_field(d, &mut rng, -1.0, 1.0)?;
            let t = 1e-5;
            let fd = (p_energy(&u.axpy(t, &v)?, p)? - p_energy(&u.axpy(-t, &v)?, p)?) / (2.0 * t * p);
            let an = apply_p_laplacian(&u, p)?.dot(&v)?;
            worst = worst.max((fd - an).abs() / an.abs().max(f64::MIN_POSITIVE));
        }
        laws.push(
            Law::new(
                &format!("p-Laplacian is the energy gradient, p={p}"),
                worst <= 1e-6,
                format!("20 fields, max relative error {worst:.3e}"),
            )
            .metric("max_relative_error", worst),
        );
    }
    Ok(laws)
}

fn chain(sweeps: &mut Sweeps, opts: &VerifyOptions) -> Result<Vec<Law>> {
    sweeps.ensure_line();
    let records = match sweeps.line() {
        Ok(r) => r,
        Err(e) => return Ok(vec![Law::new("eigenvalue bounds ordered in m", false, e)]),
    };
    let failed = failed_records(records);
    let violations = chain_violations(records);
    let ordered = Law::new(
        "eigenvalue bounds ordered in m",
        failed.is_empty() && violations.is_empty(),
        format!(
            "m = 1..{CHAIN_M}, {} records, {} violations, {} failed solves",
            records.len(),
            violations.len(),
            failed.len()
        ),
    )
    .metric("violations", violations.len() as f64);

    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut complete = failed.is_empty();
    let mut values_seen = Vec::new();
    for r in records {
        let mut values: Vec<(usize, f64)> = r.lambda_1.map(|v| (1, v)).into_iter().collect();
        values.extend(r.lambda_m.iter().map(|(&m, &v)| (m, v)));
        complete &= values.len() == CHAIN_M;
        for (m, v) in values {
            values_seen.push((format!("lambda_p{}_m{m}", r.p), v));
            let e = rel(v, oracle_lambda_1d(r.p, m, 1.0)?);
            if e > worst {
                worst = e;
                worst_at = format!("p={} m={m}", r.p);
            }
        }
    }
    let mut tight = Law::new(
        "interval bounds match closed form",
        complete && worst <= opts.chain_tol,
        format!("max relative error {worst:.3e} at {worst_at}"),
    )
    .metric("max_relative_error", worst);
    for (k, v) in values_seen {
        tight = tight.metric(k, v);
    }
    Ok(vec![ordered, tight])
}
