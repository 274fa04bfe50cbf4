mod args;
mod manifest;
mod spec;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use plap_core::eigen::{first_eigen, positivity_check, simplicity_check};
use plap_core::field::{read_field, write_field, write_field_csv};
use plap_core::higher::{
    build_disjoint_system, equal_partition, minimax_upper_bound, optimize_partition_1d, oracle_lambda_1d,
    partition_from_separators,
};
use plap_core::ppoisson::{solve_p_poisson, PoissonProblem, SolveOptions};
use plap_core::sweep::{chain_violations, monotonicity_check, p_grid, sweep, write_records_csv, SweepOptions};
use plap_core::verify::{parse_suites, verify};
use plap_core::{EigenOptions, Error, GridDomain, Method, Result, ScalarField, VerifyOptions};

use args::{
    load_config, required, Cli, Command, DomainArgs, Eigen1Args, EigenmArgs, Merge, MethodArg, PoissonArgs, SweepArgs,
    VerifyArgs,
};
use manifest::{hash_files, RunManifest};
use spec::DomainSpec;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

/// What a command produced, for the manifest.
#[derive(Default)]
struct Outcome {
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    /// Where the manifest goes; none when nothing was written.
    manifest: Option<PathBuf>,
    notes: serde_json::Value,
    /// False when a check reported failure (exit status 1).
    passed: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { 1 } else { 2 })
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PLAP_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("PLAP_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let start = Instant::now();
    let name = cli.command.name();
    let cfg = cli.config.as_ref();
    let mut out = match cli.command {
        Command::Domain(a) => cmd_domain(a.merge(load_config(cfg)?))?,
        Command::Poisson(a) => cmd_poisson(a.merge(load_config(cfg)?))?,
        Command::Eigen1(a) => cmd_eigen1(a.merge(load_config(cfg)?))?,
        Command::Eigenm(a) => cmd_eigenm(a.merge(load_config(cfg)?))?,
        Command::Sweep(a) => cmd_sweep(a.merge(load_config(cfg)?))?,
        Command::Verify(a) => cmd_verify(a.merge(load_config(cfg)?))?,
    };
    if let Some(c) = &cli.config {
        out.inputs.push(c.clone());
    }
    if let Some(path) = &out.manifest {
        let entry = RunManifest {
            command: name.into(),
            argv: std::env::args().collect(),
            config: out.config.clone(),
            inputs: hash_files(&out.inputs)?,
            outputs: hash_files(&out.outputs)?,
            wall_time_s: start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").into(),
            notes: out.notes.clone(),
        };
        manifest::append(path, &entry)?;
    }
    Ok(out.passed)
}

fn domain_from(spec: &Option<String>) -> Result<(DomainSpec, Arc<GridDomain>)> {
    let spec = DomainSpec::parse(&required(spec, "domain")?)?;
    let d = Arc::new(spec.build()?);
    Ok((spec, d))
}

fn exponent(p: &Option<f64>) -> Result<f64> {
    let p = required(p, "p")?;
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(p)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    create_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Manifest next to the first output.
fn manifest_near(outputs: &[PathBuf]) -> Option<PathBuf> {
    outputs.first().map(|p| p.parent().unwrap_or(Path::new("")).join("manifest.json"))
}

fn eigen_opts(tol: Option<f64>, max_iter: Option<usize>, seed: Option<u64>) -> Result<EigenOptions> {
    let d = EigenOptions::default();
    let tol = tol.unwrap_or(d.tol);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    Ok(EigenOptions { tol, max_iter: max_iter.unwrap_or(d.max_iter), seed: seed.unwrap_or(d.seed), initial: None })
}

fn cmd_domain(a: DomainArgs) -> Result<Outcome> {
    let (spec, d) = domain_from(&a.domain)?;
    let meta = serde_json::to_value(d.metadata())?;
    say!("{}", serde_json::to_string_pretty(&meta)?);
    let mut outputs = Vec::new();
    if let Some(path) = &a.out {
        write_json(path, &meta)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        config: serde_json::to_value(&a)?,
        inputs: spec.inputs(),
        manifest: manifest_near(&outputs),
        outputs,
        passed: true,
        ..Outcome::default()
    })
}

fn cmd_poisson(a: PoissonArgs) -> Result<Outcome> {
    let (spec, d) = domain_from(&a.domain)?;
    let p = exponent(&a.p)?;
    let mut inputs = spec.inputs();
    let rhs = a.rhs.clone().unwrap_or_else(|| "constant:1".into());
    let source = match rhs.split_once(':').unwrap_or((rhs.as_str(), "1")) {
        ("constant", c) => {
            let c: f64 = c.parse().map_err(|_| Error::InvalidInput(format!("bad constant in --rhs '{rhs}'")))?;
            ScalarField::constant(d.clone(), c)
        }
        ("file", path) => {
            inputs.push(path.into());
            read_field(Path::new(path), d.clone())?.0
        }
        _ => return Err(Error::InvalidInput(format!("--rhs must be constant[:C] or file:PATH, got '{rhs}'"))),
    };
    if let Some(t) = a.tol.filter(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {t}")));
    }
    let prob = PoissonProblem::new(source, p)?;
    let rep = solve_p_poisson(&prob, &SolveOptions { tol: a.tol, max_iter: a.max_iter, initial: None })?;
    say!(
        "p = {p}  objective = {:.12e}  residual = {:.3e}  iterations = {}  max w = {:.12e}",
        rep.objective,
        rep.residual_norm,
        rep.iterations,
        rep.solution.max_abs()
    );
    let mut outputs = Vec::new();
    if let Some(path) = &a.out {
        create_parent(path)?;
        let (f, side) = write_field(path, &rep.solution, &format!("p-Poisson solution, p = {p}, rhs = {rhs}"))?;
        outputs.extend([f, side]);
    }
    if let Some(path) = &a.csv {
        create_parent(path)?;
        write_field_csv(path, &rep.solution)?;
        outputs.push(path.clone());
    }
    if let Some(path) = &a.report {
        let mut v = serde_json::to_value(&rep)?;
        v["p"] = json!(p);
        v["max_value"] = json!(rep.solution.max_abs());
        v["domain"] = serde_json::to_value(d.metadata())?;
        write_json(path, &v)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        config: serde_json::to_value(&a)?,
        inputs,
        manifest: manifest_near(&outputs),
        outputs,
        passed: true,
        ..Outcome::default()
    })
}

fn cmd_eigen1(a: Eigen1Args) -> Result<Outcome> {
    let (spec, d) = domain_from(&a.domain)?;
    let p = exponent(&a.p)?;
    let opts = eigen_opts(a.tol, a.max_iter, a.seed)?;
    let methods = match a.method.unwrap_or(MethodArg::Descent) {
        MethodArg::Descent => vec![Method::Descent],
        MethodArg::Inverse => vec![Method::Inverse],
        MethodArg::Both => vec![Method::Descent, Method::Inverse],
    };
    let pairs = methods.iter().map(|&m| first_eigen(&d, p, m, &opts)).collect::<Result<Vec<_>>>()?;
    for pair in &pairs {
        say!(
            "{:<8} lambda = {:.12e}  residual = {:.3e}  iterations = {}  seed = {}",
            pair.method,
            pair.lambda,
            pair.residual,
            pair.iterations,
            pair.seed
        );
    }
    let positivity = positivity_check(&pairs[0]);
    let mut report = json!({
        "p": p,
        "domain": d.metadata(),
        "tol": opts.tol,
        "results": pairs,
        "positivity": positivity,
    });
    if pairs.len() == 2 {
        let gap = (pairs[0].lambda - pairs[1].lambda).abs();
        let bound = 2.0 * opts.tol * pairs[0].lambda;
        say!("methods differ by {gap:.3e} (bound {bound:.3e})");
        report["agreement"] = json!({ "difference": gap, "bound": bound, "agree": gap <= bound });
    }
    if let Some(k) = a.restarts.filter(|&k| k > 1) {
        let s = simplicity_check(&d, p, k, &opts)?;
        say!("simplicity: {k} restarts, max collinearity defect {:.3e}", s.max_collinearity_defect);
        report["simplicity"] = serde_json::to_value(&s)?;
    }
    let mut outputs = Vec::new();
    let field = &pairs[0].field;
    if let Some(path) = &a.out_field {
        create_parent(path)?;
        let desc = format!("first eigenfield, p = {p}, lambda = {:.16e}", pairs[0].lambda);
        let (f, side) = write_field(path, field, &desc)?;
        outputs.extend([f, side]);
    }
    if let Some(path) = &a.csv {
        create_parent(path)?;
        write_field_csv(path, field)?;
        outputs.push(path.clone());
    }
    if let Some(path) = &a.report {
        write_json(path, &report)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        config: serde_json::to_value(&a)?,
        inputs: spec.inputs(),
        manifest: manifest_near(&outputs),
        outputs,
        passed: true,
        ..Outcome::default()
    })
}

/// Label grid: one row of digits per grid row (a single row in 1D); `k > 0`
/// puts the node in piece `k`, `0` in none.
fn read_label_partition(path: &Path, d: &GridDomain) -> Result<Vec<Vec<usize>>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read partition {}: {e}", path.display())))?;
    let rows: Vec<Vec<u32>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.chars()
                .map(|c| c.to_digit(10).ok_or_else(|| Error::InvalidPartition(format!("bad label '{c}'"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let shape: Vec<usize> = if d.dim() == 1 { vec![1, d.shape()[0]] } else { d.shape().to_vec() };
    if rows.len() != shape[0] || rows.iter().any(|r| r.len() != shape[1]) {
        return Err(Error::InvalidPartition(format!(
            "label grid must be {} x {} to match the domain",
            shape[0], shape[1]
        )));
    }
    let max = rows.iter().flatten().copied().max().unwrap_or(0) as usize;
    let mut parts = vec![Vec::new(); max];
    for (node, &label) in rows.iter().flatten().enumerate() {
        if label > 0 {
            parts[label as usize - 1].push(node);
        }
    }
    Ok(parts)
}

fn cmd_eigenm(a: EigenmArgs) -> Result<Outcome> {
    let (spec, d) = domain_from(&a.domain)?;
    let p = exponent(&a.p)?;
    let opts = eigen_opts(a.tol, None, a.seed)?;
    let mut inputs = spec.inputs();
    let kind = a.partition.clone().unwrap_or_else(|| "equal".into());
    let m_flag = a.m;
    let need_m = || required(&m_flag, "m");
    let mut report = json!({ "p": p, "partition": kind, "domain": d.metadata() });
    let (bound, lambdas) = match kind.as_str() {
        "equal" => {
            let parts = equal_partition(&d, need_m()?)?;
            let sys = build_disjoint_system(&d, p, &parts, &opts)?;
            report["piece_sizes"] = json!(parts.iter().map(Vec::len).collect::<Vec<_>>());
            (minimax_upper_bound(&sys)?, sys.piece_lambdas)
        }
        "optimize" => {
            let opt = optimize_partition_1d(&d, p, need_m()?, &opts)?;
            report["breakpoints"] = json!(opt.breakpoints);
            report["piece_sizes"] =
                json!(partition_from_separators(&opt.separators).iter().map(Vec::len).collect::<Vec<_>>());
            (opt.bound, opt.piece_lambdas)
        }
        other => {
            let Some(path) = other.strip_prefix("file:") else {
                return Err(Error::InvalidInput(format!(
                    "--partition must be equal, optimize or file:PATH, got '{other}'"
                )));
            };
            inputs.push(path.into());
            let parts = read_label_partition(Path::new(path), &d)?;
            if let Some(m) = a.m.filter(|&m| m != parts.len()) {
                return Err(Error::InvalidPartition(format!("--m {m} but the label grid has {} pieces", parts.len())));
            }
            let sys = build_disjoint_system(&d, p, &parts, &opts)?;
            report["piece_sizes"] = json!(parts.iter().map(Vec::len).collect::<Vec<_>>());
            (minimax_upper_bound(&sys)?, sys.piece_lambdas)
        }
    };
    let m = lambdas.len();
    report["m"] = json!(m);
    report["bound"] = json!(bound);
    report["piece_energies"] = json!(lambdas);
    say!("p = {p}  m = {m}  bound = {bound:.12e}");
    for (i, l) in lambdas.iter().enumerate() {
        say!("  piece {}: energy {l:.12e}", i + 1);
    }
    if d.dim() == 1 {
        let len = (d.shape()[0] - 1) as f64 * d.h();
        let oracle = oracle_lambda_1d(p, m, len)?;
        say!("  closed form (p-1)(m pi_p / L)^p = {oracle:.12e}");
        report["closed_form"] = json!(oracle);
    }
    let mut outputs = Vec::new();
    if let Some(path) = &a.report {
        write_json(path, &report)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        config: serde_json::to_value(&a)?,
        inputs,
        manifest: manifest_near(&outputs),
        outputs,
        passed: true,
        ..Outcome::default()
    })
}

fn parse_p_list(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num =
        |x: &str| x.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number '{x}' in --p-grid")));
    match parts.as_slice() {
        [a, b, c] => p_grid(num(a)?, num(b)?, num(c)?),
        [_] => s.split(',').map(num).collect(),
        _ => Err(Error::InvalidInput(format!("--p-grid must be start:stop:step or a list, got '{s}'"))),
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<Outcome> {
    let (spec, d) = domain_from(&a.domain)?;
    let ps = parse_p_list(&required(&a.p_grid, "p-grid")?)?;
    let m_max = a.m_max.unwrap_or(1);
    let out_dir = a.out_dir.clone().unwrap_or_else(|| PathBuf::from("sweep-out"));
    let slack = a.slack.unwrap_or(1e-3);
    let method = match a.method.unwrap_or(MethodArg::Descent) {
        MethodArg::Descent => Method::Descent,
        MethodArg::Inverse => Method::Inverse,
        MethodArg::Both => return Err(Error::InvalidInput("sweep takes one method".into())),
    };
    let sopts = SweepOptions {
        eigen: eigen_opts(a.tol, None, a.seed)?,
        method,
        warm_start: a.warm_start,
        out_dir: Some(out_dir.clone()),
    };
    let records = sweep(&d, &ps, m_max, &sopts)?;
    let csv = out_dir.join("records.csv");
    write_records_csv(&csv, &records, m_max)?;

    for r in &records {
        match r.lambda_1 {
            Some(l) => say!("p = {:<6} lambda_1 = {l:.12e}  residual = {:.3e}", r.p, r.residual.unwrap_or(f64::NAN)),
            None => say!("p = {:<6} FAILED: {}", r.p, r.error.as_deref().unwrap_or("")),
        }
    }
    let mono = monotonicity_check(&records, slack);
    let chain = chain_violations(&records);
    say!(
        "monotonicity of p lambda^(1/p): {} violations (slack {slack}); eigenvalue chain: {} violations",
        mono.violations.len(),
        chain.len()
    );
    let failed = records.iter().filter(|r| !r.is_ok()).count();

    let mut outputs = vec![csv];
    for r in &records {
        if let Some(rel) = &r.field_ref {
            let f = out_dir.join(rel);
            let mut side = f.clone().into_os_string();
            side.push(".json");
            outputs.extend([f, side.into()]);
        }
    }
    let notes = json!({
        "mode": if a.warm_start { "sequential (warm start)" } else { "parallel" },
        "seed": sopts.eigen.seed,
        "tol": sopts.eigen.tol,
        "monotonicity_slack": slack,
        "monotonicity_violations": mono.violations,
        "chain_violations": chain,
        "failed_records": failed,
        "records": records,
    });
    Ok(Outcome {
        config: serde_json::to_value(&a)?,
        inputs: spec.inputs(),
        outputs,
        manifest: Some(out_dir.join("manifest.json")),
        notes,
        passed: failed == 0,
    })
}

fn cmd_verify(a: VerifyArgs) -> Result<Outcome> {
    let suites = parse_suites(a.suite.as_deref().unwrap_or("all"))?;
    let d = VerifyOptions::default();
    let opts = VerifyOptions {
        seed: a.seed.unwrap_or(d.seed),
        interval_nodes: a.interval_nodes.unwrap_or(d.interval_nodes),
        square_nodes: a.square_nodes.unwrap_or(d.square_nodes),
        out_dir: a.out_dir.clone(),
        ..d
    };
    let rep = verify(&suites, &opts)?;
    say_raw!("{}", rep.table());
    let passed = rep.all_passed();
    say!("{}", if passed { "all laws hold" } else { "FAILURES" });
    let mut outputs = Vec::new();
    if let Some(path) = &a.report {
        write_json(path, &json!({ "options": opts, "passed": passed, "results": rep.results }))?;
        outputs.push(path.clone());
    }
    if let Some(dir) = &a.out_dir {
        for entry in walk(dir)? {
            if entry.file_name().is_some_and(|n| n != "manifest.json") && !outputs.contains(&entry) {
                outputs.push(entry);
            }
        }
    }
    let manifest = a.out_dir.as_ref().map(|d| d.join("manifest.json")).or_else(|| manifest_near(&outputs));
    Ok(Outcome { config: serde_json::to_value(&a)?, manifest, outputs, passed, ..Outcome::default() })
}

/// Files under `dir`, sorted.
fn walk(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let e = e.map_err(|e| Error::Io(e.into()))?;
        if e.file_type().is_file() {
            out.push(e.into_path());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_lists() {
        assert_eq!(parse_p_list("1.5:3.0:0.25").unwrap().len(), 7);
        assert_eq!(parse_p_list("2,3, 4").unwrap(), vec![2.0, 3.0, 4.0]);
        assert!(parse_p_list("1:2").is_err());
        assert!(parse_p_list("a,b").is_err());
    }

    #[test]
    fn label_partitions() {
        let d = GridDomain::interval(7, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.txt");
        fs::write(&path, "0110220\n").unwrap();
        assert_eq!(read_label_partition(&path, &d).unwrap(), vec![vec![1, 2], vec![4, 5]]);
        fs::write(&path, "01102\n").unwrap();
        assert!(read_label_partition(&path, &d).is_err());
        fs::write(&path, "01x0220\n").unwrap();
        assert!(read_label_partition(&path, &d).is_err());
    }
}
