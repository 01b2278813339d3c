//! The `hyperkernel` command-line front end.
//!
//! Exit codes: 0 success, 1 internal error or failed numerical check, 2 malformed input,
//! 3 input is not a kernel of hyperbolic type, 64 bad command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{
    read_json, read_kernel_input, to_csv_bytes, to_json_bytes, write_output, EmbeddingFile,
    InduceSpec, KernelFile, LorentzMapFile, OrbitSpec,
};
use crate::isometry::{classify_detailed, default_base, make_translation};
use crate::kernels::{
    gns_embed, power_kernel, search_power_counterexample, validate_kht, BasepointPolicy,
    KhtReport, TOL_KERNEL,
};
use crate::minkowski::{HyperbolicPoint, ModelTag};
use crate::quadrature::{
    beta_n_post, beta_n_pre, bounds_check, convergence_table, monte_carlo_marginal_check,
    snowflake_gap,
};
use crate::representation::{
    induced_isometry_detailed, self_representation_orbit, KernelAutomorphism,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_NOT_A_KERNEL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Monte Carlo sample count behind `--slow`.
const SLOW_SAMPLES: usize = 1_000_000;
/// Allowed sup-norm distance of the empirical and exact marginal CDFs.
const MONTE_CARLO_TOL: f64 = 3e-3;

#[derive(Debug, Parser)]
#[command(name = "hyperkernel", version, about = "Kernels of hyperbolic type and their powers")]
struct Cli {
    /// Worker threads for grid sweeps; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = parse_threads)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the defining inequality of a kernel.
    Validate(ValidateArgs),
    /// Reconstruct hyperboloid points from a kernel.
    Embed(EmbedArgs),
    /// Entrywise power of a kernel, or a seeded search for a failing power.
    Power(PowerArgs),
    /// Elliptic / parabolic / hyperbolic type of a Lorentz map.
    Classify(ClassifyArgs),
    /// Isometry induced by a kernel-preserving permutation.
    Induce(InduceArgs),
    /// Orbit experiment for the powers of an orbit kernel.
    OrbitDemo(OrbitArgs),
    /// Sphere integrals before and after the change of variables.
    Integrate(IntegrateArgs),
    /// Convergence of the sphere integrals to cosh^t.
    Converge(GridArgs),
    /// Metric bounds cosh(tu) <= beta_n <= cosh^t(u).
    Bounds(GridArgs),
    /// Gap arcosh(cosh^t u) - t u against (1 - t) log 2.
    Snowflake(SnowflakeArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long = "out")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KernelCheck {
    /// Relative eigenvalue tolerance.
    #[arg(long, default_value_t = TOL_KERNEL, value_parser = parse_positive)]
    tol: f64,
    /// Basepoint index for the positivity test.
    #[arg(long, default_value_t = 0, conflicts_with = "all_basepoints")]
    basepoint: usize,
    /// Test at every basepoint.
    #[arg(long)]
    all_basepoints: bool,
}

impl KernelCheck {
    fn policy(&self) -> BasepointPolicy {
        if self.all_basepoints {
            BasepointPolicy::AllBasepoints
        } else {
            BasepointPolicy::OneBasepoint(self.basepoint)
        }
    }
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Kernel JSON, points JSON or kernel CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    check: KernelCheck,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = TOL_KERNEL, value_parser = parse_positive)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    basepoint: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[arg(long = "in", required_unless_present = "search")]
    input: Option<PathBuf>,
    /// Exponent t > 0.
    #[arg(long, allow_negative_numbers = true)]
    t: f64,
    /// Validate the power and report.
    #[arg(long)]
    then_validate: bool,
    /// Search random 4-point configurations of H^2 for a failing power instead.
    #[arg(long, conflicts_with = "input")]
    search: bool,
    #[arg(long, default_value = "0x5EED", value_parser = parse_seed)]
    seed: u64,
    #[command(flatten)]
    check: KernelCheck,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Lorentz map JSON with optional base point.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 64, value_parser = parse_horizon)]
    horizon: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct InduceArgs {
    /// `{"kernel": ..., "permutation": [...]}`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = TOL_KERNEL, value_parser = parse_positive)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    basepoint: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    /// Orbit experiment JSON; a translation of length 0.5 in H^2 when omitted.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Overrides the exponent of the experiment.
    #[arg(long)]
    t: Option<f64>,
    /// Overrides the horizon of the experiment.
    #[arg(long, value_parser = parse_horizon)]
    horizon: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Distances: comma list, `start:stop:count` ranges allowed.
    #[arg(long, default_value = "1", value_parser = parse_list)]
    u: FloatList,
    #[arg(long, default_value = "0.5", value_parser = parse_list)]
    t: FloatList,
    /// Sphere dimensions.
    #[arg(long, default_value = "3,10,30,100,300,1000", value_parser = parse_usize_list)]
    n: UsizeList,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct IntegrateArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Also run the 10^6-sample Monte Carlo check of the sphere marginal.
    #[arg(long)]
    slow: bool,
    #[arg(long, default_value = "0x5EED", value_parser = parse_seed)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SnowflakeArgs {
    #[arg(long, default_value = "0:50:40", value_parser = parse_list)]
    u: FloatList,
    #[arg(long, default_value = "0.04:1:25", value_parser = parse_list)]
    t: FloatList,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, PartialEq)]
struct FloatList(Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
struct UsizeList(Vec<usize>);

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn parse_threads(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("need at least one thread".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_horizon(s: &str) -> std::result::Result<usize, String> {
    let h: usize = s.parse().map_err(|e| format!("{e}"))?;
    if h < 8 {
        return Err(format!("horizon must be at least 8, got {h}"));
    }
    Ok(h)
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| e.to_string())
}

/// `a,b,c` with items either numbers or `start:stop:count` (inclusive, evenly spaced).
fn parse_list(s: &str) -> std::result::Result<FloatList, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(v.parse::<f64>().map_err(|e| format!("{item:?}: {e}"))?),
            [a, b, c] => {
                let a: f64 = a.parse().map_err(|e| format!("{item:?}: {e}"))?;
                let b: f64 = b.parse().map_err(|e| format!("{item:?}: {e}"))?;
                let c: usize = c.parse().map_err(|e| format!("{item:?}: {e}"))?;
                match c {
                    0 => return Err(format!("{item:?}: empty range")),
                    1 => out.push(a),
                    _ => out.extend((0..c).map(|i| a + (b - a) * i as f64 / (c - 1) as f64)),
                }
            }
            _ => return Err(format!("cannot parse {item:?}")),
        }
    }
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err(format!("need a non-empty list of finite numbers, got {s:?}"));
    }
    Ok(FloatList(out))
}

fn parse_usize_list(s: &str) -> std::result::Result<UsizeList, String> {
    let v = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<usize>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("need a non-empty list".into());
    }
    Ok(UsizeList(v))
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Ok,
    NotAKernel,
    CheckFailed,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_)
        | Error::InvalidInput(_)
        | Error::NotAnAutomorphism { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_INVALID_INPUT,
        Error::NotAKernel { .. } => EXIT_NOT_A_KERNEL,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first), runs the subcommand, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::NotAKernel) => EXIT_NOT_A_KERNEL,
        Ok(Outcome::CheckFailed) => EXIT_FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn emit_json<T: Serialize>(out: &Output, value: &T) -> Result<()> {
    write_output(out.out.as_deref(), &to_json_bytes(value)?)
}

fn emit_csv<T: Serialize>(out: &Output, rows: &[T]) -> Result<()> {
    write_output(out.out.as_deref(), &to_csv_bytes(rows)?)
}

fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Validate(a) => validate(a),
        Command::Embed(a) => embed(a),
        Command::Power(a) => power(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Induce(a) => induce(a),
        Command::OrbitDemo(a) => orbit_demo(a),
        Command::Integrate(a) => integrate(a),
        Command::Converge(a) => converge(a),
        Command::Bounds(a) => bounds(a),
        Command::Snowflake(a) => snowflake(a),
    }
}

fn verdict(report: &KhtReport) -> Outcome {
    if report.valid {
        Outcome::Ok
    } else {
        Outcome::NotAKernel
    }
}

fn validate(a: &ValidateArgs) -> Result<Outcome> {
    let k = read_kernel_input(&a.input)?;
    let report = validate_kht(&k, a.check.policy(), a.check.tol)?;
    emit_json(&a.output, &report)?;
    Ok(verdict(&report))
}

#[derive(Serialize)]
struct EmbedFailure {
    valid: bool,
    basepoint: usize,
    min_eigenvalue: f64,
    witness: Vec<f64>,
}

fn embed(a: &EmbedArgs) -> Result<Outcome> {
    let k = read_kernel_input(&a.input)?;
    match gns_embed(&k, a.basepoint, a.tol) {
        Ok(e) => {
            emit_json(&a.output, &EmbeddingFile::from(&e))?;
            Ok(Outcome::Ok)
        }
        Err(Error::NotAKernel {
            basepoint,
            min_eigenvalue,
            witness,
        }) => {
            emit_json(
                &a.output,
                &EmbedFailure {
                    valid: false,
                    basepoint,
                    min_eigenvalue,
                    witness,
                },
            )?;
            Ok(Outcome::NotAKernel)
        }
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct PowerReport {
    t: f64,
    kernel: KernelFile,
    report: KhtReport,
}

fn power(a: &PowerArgs) -> Result<Outcome> {
    if a.search {
        let found = search_power_counterexample(4, 2, a.t, a.seed, -1e-6, 100_000)?;
        return match found {
            Some(c) => {
                eprintln!(
                    "seed {:#x}: power {} fails after {} configurations, min eigenvalue {:.6e}",
                    c.seed, c.t, c.trials, c.report.min_eigenvalue
                );
                emit_json(&a.output, &KernelFile::from(&c.kernel))?;
                Ok(Outcome::Ok)
            }
            None => {
                eprintln!("no failing configuration found");
                Ok(Outcome::CheckFailed)
            }
        };
    }
    let input = a.input.as_deref().ok_or_else(|| Error::Usage("--in is required".into()))?;
    let kt = power_kernel(&read_kernel_input(input)?, a.t)?;
    if a.then_validate {
        let report = validate_kht(&kt, a.check.policy(), a.check.tol)?;
        let outcome = verdict(&report);
        emit_json(
            &a.output,
            &PowerReport {
                t: a.t,
                kernel: KernelFile::from(&kt),
                report,
            },
        )?;
        Ok(outcome)
    } else {
        emit_json(&a.output, &KernelFile::from(&kt))?;
        Ok(Outcome::Ok)
    }
}

fn classify_cmd(a: &ClassifyArgs) -> Result<Outcome> {
    let file: LorentzMapFile = read_json(&a.input)?;
    let g = file.to_map()?;
    let base = file.base_point()?.unwrap_or_else(|| default_base(g.model()));
    let report = classify_detailed(&g, &base, a.horizon)?;
    emit_json(&a.output, &report)?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct InduceReport {
    #[serde(flatten)]
    map: LorentzMapFile,
    rank: usize,
    equivariance_residual: f64,
    lorentz_drift: f64,
}

fn induce(a: &InduceArgs) -> Result<Outcome> {
    let spec: InduceSpec = read_json(&a.input)?;
    let k = spec.kernel.to_kernel()?;
    let pi = KernelAutomorphism::new(spec.permutation)?;
    let e = gns_embed(&k, a.basepoint, a.tol)?;
    let induced = induced_isometry_detailed(&k, &pi, &e)?;
    emit_json(
        &a.output,
        &InduceReport {
            map: LorentzMapFile::from_map(&induced.map, None),
            rank: e.rank,
            equivariance_residual: induced.equivariance_residual,
            lorentz_drift: induced.lorentz_drift,
        },
    )?;
    Ok(Outcome::Ok)
}

/// Translation of length 0.5 along the first axis of `H²`, off-axis base point.
fn default_orbit_spec() -> Result<OrbitSpec> {
    let model = ModelTag::First { k: 2 };
    let origin = HyperbolicPoint::reference(model);
    let along = HyperbolicPoint::from_slice(model, &[1f64.cosh(), 1f64.sinh(), 0.0])?;
    let g = make_translation(&origin, &along, 0.5)?;
    let (h1, h2) = (0.3f64, 0.4f64);
    Ok(OrbitSpec {
        generator: LorentzMapFile::from_map(&g, None),
        base: vec![(1.0 + h1 * h1 + h2 * h2).sqrt(), h1, h2],
        t: 0.6,
        horizon: 64,
    })
}

fn orbit_demo(a: &OrbitArgs) -> Result<Outcome> {
    let mut spec = match &a.input {
        Some(p) => read_json::<OrbitSpec>(p)?,
        None => default_orbit_spec()?,
    };
    if let Some(t) = a.t {
        spec.t = t;
    }
    if let Some(h) = a.horizon {
        spec.horizon = h;
    }
    let g = spec.generator.to_map()?;
    let base = HyperbolicPoint::from_slice(g.model(), &spec.base)
        .map_err(|e| Error::InvalidInput(format!("base point: {e}")))?;
    let experiment = self_representation_orbit(&g, &base, spec.t, spec.horizon)?;
    emit_json(&a.output, &experiment.report())?;
    Ok(Outcome::Ok)
}

fn grid(u: &FloatList, t: &FloatList, n: &UsizeList) -> Vec<(usize, f64, f64)> {
    let mut cells = Vec::new();
    for &n in &n.0 {
        for &u in &u.0 {
            for &t in &t.0 {
                cells.push((n, u, t));
            }
        }
    }
    cells
}

#[derive(Serialize)]
struct IntegrateRow {
    n: usize,
    u: f64,
    t: f64,
    beta_post: f64,
    beta_pre: f64,
    abs_difference: f64,
}

fn integrate(a: &IntegrateArgs) -> Result<Outcome> {
    let g = &a.grid;
    let rows: Vec<IntegrateRow> = grid(&g.u, &g.t, &g.n)
        .par_iter()
        .map(|&(n, u, t)| {
            let post = beta_n_post(u, t, n)?;
            let pre = beta_n_pre(u, t, n)?;
            Ok(IntegrateRow {
                n,
                u,
                t,
                beta_post: post,
                beta_pre: pre,
                abs_difference: (post - pre).abs(),
            })
        })
        .collect::<Result<_>>()?;
    emit_csv(&g.output, &rows)?;
    let mut outcome = Outcome::Ok;
    if a.slow {
        let mut dims = g.n.0.clone();
        dims.sort_unstable();
        dims.dedup();
        for n in dims {
            let r = monte_carlo_marginal_check(n, SLOW_SAMPLES, a.seed, 2000)?;
            eprintln!(
                "monte carlo n={} samples={} seed={:#x}: sup |F_emp - F| = {:.3e}",
                r.n, r.samples, r.seed, r.sup_error
            );
            if r.sup_error > MONTE_CARLO_TOL {
                outcome = Outcome::CheckFailed;
            }
        }
    }
    Ok(outcome)
}

fn converge(a: &GridArgs) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &u in &a.u.0 {
        for &t in &a.t.0 {
            rows.extend(convergence_table(u, t, &a.n.0)?);
        }
    }
    emit_csv(&a.output, &rows)?;
    Ok(Outcome::Ok)
}

fn bounds(a: &GridArgs) -> Result<Outcome> {
    let rows = grid(&a.u, &a.t, &a.n)
        .par_iter()
        .map(|&(n, u, t)| bounds_check(u, t, n))
        .collect::<Result<Vec<_>>>()?;
    emit_csv(&a.output, &rows)?;
    Ok(if rows.iter().all(|r| r.lower_ok && r.upper_ok) {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

#[derive(Serialize)]
struct SnowflakeRow {
    u: f64,
    t: f64,
    gap: f64,
    upper: f64,
    ok: bool,
}

fn snowflake(a: &SnowflakeArgs) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &t in &a.t.0 {
        for &u in &a.u.0 {
            let gap = snowflake_gap(u, t)?;
            let upper = (1.0 - t) * std::f64::consts::LN_2;
            rows.push(SnowflakeRow {
                u,
                t,
                gap,
                upper,
                ok: (0.0..=upper).contains(&gap),
            });
        }
    }
    emit_csv(&a.output, &rows)?;
    Ok(if rows.iter().all(|r| r.ok) {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("1,2.5").unwrap().0, vec![1.0, 2.5]);
        assert_eq!(parse_list("0:1:3").unwrap().0, vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_list("0:1:3,7").unwrap().0, vec![0.0, 0.5, 1.0, 7.0]);
        assert!(parse_list("").is_err());
        assert!(parse_list("a").is_err());
        assert!(parse_list("0:1:0").is_err());
        assert_eq!(parse_usize_list("3, 10").unwrap().0, vec![3, 10]);
        assert_eq!(parse_seed("0x5EED").unwrap(), 0x5EED);
        assert_eq!(parse_seed("17").unwrap(), 17);
        assert!(parse_horizon("4").is_err());
        assert!(parse_positive("0").is_err());
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["hyperkernel", "validate", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["hyperkernel", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["hyperkernel", "snowflake", "--u", "x"]), EXIT_USAGE);
        assert_eq!(run(["hyperkernel", "classify", "--in", "m.json", "--horizon", "4"]), EXIT_USAGE);
        assert_eq!(run(["hyperkernel", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_file_is_invalid_input() {
        assert_eq!(
            run(["hyperkernel", "validate", "--in", "/nonexistent/k.json"]),
            EXIT_INVALID_INPUT
        );
    }
}
