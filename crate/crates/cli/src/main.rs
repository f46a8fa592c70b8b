mod grid;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grid::GridSpec;
use levylab::degree_laws::DegreeLawReport;
use levylab::mechanism::{BranchingMechanism, MechanismSpec};
use levylab::samplers::{extract_big_node_forest, replica_rng, PathSimConfig, PathSimulator};
use levylab::special::{solve_c_gamma_lambda, StableConstants};
use levylab::verify::{run_suite, SuiteSpec};
use levylab::Error;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const LAWS_CSV_VERSION: u32 = 1;
const SAMPLE_CHUNK: u64 = 1000;
const SAMPLE_WAVE: u64 = 16;

#[derive(Parser)]
#[command(name = "levylab", version, about = "Maximal-degree laws of Lévy trees: tables, simulation and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Table of the degree laws over a grid of δ.
    Laws(LawsArgs),
    /// Simulate forests and write one JSON line per path.
    Sample(SampleArgs),
    /// Run a verification suite and write a JSON report.
    Verify(VerifyArgs),
    /// Stable-case constants a_γ, c_γ and c_γ(λ).
    Stable(StableArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
    Json,
}

#[derive(Args)]
struct Common {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct LawsArgs {
    #[arg(long)]
    mechanism: PathBuf,
    /// start:stop:count[:linear|:log]
    #[arg(long)]
    delta_grid: GridSpec,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    mechanism: PathBuf,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Extract the forest of nodes above δ for every path.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = 1e-2)]
    dt: f64,
    #[arg(long, default_value_t = 1e4)]
    max_time: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    mechanism: PathBuf,
    /// Suite name (default, degree, forest, analytic) or comma list of checks.
    #[arg(long, default_value = "default")]
    suite: String,
    /// Half the samples and wider budgets.
    #[arg(long)]
    quick: bool,
    /// Sample size for every Monte Carlo check.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StableArgs {
    #[arg(long, default_value_t = 1.5)]
    gamma: f64,
    #[arg(long, default_value = "0:5:11")]
    lambda_grid: GridSpec,
    #[command(flatten)]
    common: Common,
}

/// Failure with exit status 2: bad configuration or input.
struct ConfigError(String);

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl From<io::Error> for ConfigError {
    fn from(e: io::Error) -> Self {
        ConfigError(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        ConfigError(format!("serialization error: {e}"))
    }
}

type CliResult<T> = Result<T, ConfigError>;

struct LoadedMechanism {
    spec: MechanismSpec,
    mechanism: BranchingMechanism,
    sha256: String,
}

fn load_mechanism(path: &Path) -> CliResult<LoadedMechanism> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError(format!("{} is not UTF-8", path.display())))?;
    let spec = MechanismSpec::from_json(&text)?;
    let mechanism = spec.build()?;
    Ok(LoadedMechanism { spec, mechanism, sha256: hex::encode(Sha256::digest(&bytes)) })
}

fn open_out(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| ConfigError(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn only_format(got: Option<Format>, allowed: &[Format], default: Format, what: &str) -> CliResult<Format> {
    let f = got.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(ConfigError(format!("unsupported --format for {what}")))
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x.is_infinite() => if x > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(x) => format!("{x:e}"),
    }
}

fn cmd_laws(a: LawsArgs) -> CliResult<u8> {
    let format = only_format(a.common.format, &[Format::Csv, Format::Json, Format::Jsonl], Format::Csv, "laws")?;
    let mech = load_mechanism(&a.mechanism)?;
    let deltas = a.delta_grid.points();
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(ConfigError("delta grid points must be > 0".into()));
    }
    let rows: Vec<DegreeLawReport> = deltas.iter().map(|&d| DegreeLawReport::evaluate(&mech.mechanism, d)).collect();
    let mut noted: Vec<&str> = Vec::new();
    for row in &rows {
        for (col, err) in &row.errors {
            if !noted.contains(col) {
                eprintln!("note: column {col} left empty where unavailable: {err}");
                noted.push(col);
            }
        }
    }
    let mut out = open_out(&a.common.out)?;
    match format {
        Format::Csv => {
            writeln!(out, "# levylab laws v{LAWS_CSV_VERSION} mechanism_sha256={}", mech.sha256)?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(DegreeLawReport::COLUMNS).map_err(|e| ConfigError(e.to_string()))?;
            for row in &rows {
                w.write_record(row.values().iter().map(|v| fmt_cell(*v))).map_err(|e| ConfigError(e.to_string()))?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            for row in &rows {
                serde_json::to_writer(&mut out, row)?;
                writeln!(out)?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(0)
}

#[derive(Serialize)]
struct SampleLine {
    index: u64,
    sigma: f64,
    max_jump: f64,
    t_first_big: Option<f64>,
    z0: Option<u64>,
    w: Option<u64>,
    /// Entry k counts the nodes with k children.
    offspring_hist: Option<Vec<u64>>,
    flags: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct SampleTrailer {
    n: u64,
    truncated: u64,
    open_forests: u64,
    errors: u64,
    seed: u64,
    mechanism_sha256: String,
}

fn sample_chunk(sim: &PathSimulator, a: &SampleArgs, chunk: u64, count: u64) -> Result<Vec<SampleLine>, Error> {
    let mut rng = replica_rng(a.seed, chunk);
    let record_at = a.delta.unwrap_or(f64::INFINITY);
    let mut lines = Vec::with_capacity(count as usize);
    for i in 0..count {
        let p = sim.run(a.r, record_at, &mut rng)?;
        let mut line = SampleLine {
            index: chunk * SAMPLE_CHUNK + i,
            sigma: p.sigma_hat,
            max_jump: p.max_jump,
            t_first_big: p.t_first_big,
            z0: None,
            w: None,
            offspring_hist: None,
            flags: if p.truncated { vec!["truncated"] } else { Vec::new() },
            error: None,
        };
        if let Some(delta) = a.delta {
            match extract_big_node_forest(&p, delta) {
                Ok(f) => {
                    let mut hist = vec![0u64; f.offspring_counts.iter().max().map_or(0, |&m| m as usize + 1)];
                    for &k in &f.offspring_counts {
                        hist[k as usize] += 1;
                    }
                    if f.open.iter().any(|&o| o) {
                        line.flags.push("open_nodes");
                    }
                    line.z0 = Some(f.z0);
                    line.w = Some(f.w_total);
                    line.offspring_hist = Some(hist);
                }
                Err(e) => line.error = Some(e.to_string()),
            }
        }
        lines.push(line);
    }
    Ok(lines)
}

fn cmd_sample(a: SampleArgs) -> CliResult<u8> {
    only_format(a.common.format, &[Format::Jsonl], Format::Jsonl, "sample")?;
    let mech = load_mechanism(&a.mechanism)?;
    let cfg = PathSimConfig { eps: a.eps, dt: a.dt, max_steps: u64::MAX, max_time: a.max_time, seed: a.seed, replica_index: 0 };
    let sim = PathSimulator::new(&mech.mechanism, &cfg)?;
    if !(a.r > 0.0) {
        return Err(ConfigError(format!("--r must be > 0, got {}", a.r)));
    }
    if let Some(d) = a.delta {
        if !(d > a.eps) {
            return Err(ConfigError(format!("--delta {d} must exceed --eps {}", a.eps)));
        }
    }
    let mut out = open_out(&a.common.out)?;
    let mut trailer = SampleTrailer { n: a.n, truncated: 0, open_forests: 0, errors: 0, seed: a.seed, mechanism_sha256: mech.sha256.clone() };
    let chunks = a.n.div_ceil(SAMPLE_CHUNK);
    let mut next = 0;
    while next < chunks {
        let end = (next + SAMPLE_WAVE).min(chunks);
        let parts: Vec<Result<Vec<SampleLine>, Error>> = (next..end)
            .into_par_iter()
            .map(|c| sample_chunk(&sim, &a, c, SAMPLE_CHUNK.min(a.n - c * SAMPLE_CHUNK)))
            .collect();
        for part in parts {
            for line in part? {
                trailer.truncated += line.flags.contains(&"truncated") as u64;
                trailer.open_forests += line.flags.contains(&"open_nodes") as u64;
                trailer.errors += line.error.is_some() as u64;
                serde_json::to_writer(&mut out, &line)?;
                writeln!(out)?;
            }
        }
        next = end;
    }
    serde_json::to_writer(&mut out, &serde_json::json!({ "trailer": trailer }))?;
    writeln!(out)?;
    out.flush()?;
    Ok(if trailer.errors > 0 { 2 } else { 0 })
}

fn cmd_verify(a: VerifyArgs) -> CliResult<u8> {
    only_format(a.common.format, &[Format::Json], Format::Json, "verify")?;
    let mech = load_mechanism(&a.mechanism)?;
    let mut spec = SuiteSpec::new(&a.suite)?;
    if a.quick {
        spec = spec.quick();
    }
    if let Some(n) = a.n {
        spec = spec.with_n(n);
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(r) = a.r {
        spec.r = r;
    }
    if let Some(d) = a.delta {
        spec.delta = d;
    }
    if let Some(eps) = a.eps {
        spec.degree_sim.eps = eps;
        spec.forest_sim.eps = eps;
    }
    if let Some(dt) = a.dt {
        spec.degree_sim.dt = dt;
        spec.forest_sim.dt = dt;
    }
    let mut report = run_suite(&spec, &mech.spec)?;
    report.mechanism_sha256 = Some(mech.sha256);
    let mut out = open_out(&a.common.out)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    for c in &report.checks {
        eprintln!("{:<20} {:?}", c.name, c.status);
    }
    Ok(report.exit_code() as u8)
}

#[derive(Serialize)]
struct Prop92 {
    tail_coeff: f64,
    z0_coeff: f64,
    w1_coeff: f64,
}

#[derive(Serialize)]
struct StableOut {
    gamma: f64,
    a_gamma: f64,
    c_gamma: f64,
    c_gamma_lambda: Vec<(f64, f64)>,
    prop92: Prop92,
}

fn cmd_stable(a: StableArgs) -> CliResult<u8> {
    only_format(a.common.format, &[Format::Json], Format::Json, "stable")?;
    let k = StableConstants::new(a.gamma)?;
    let lambdas = a.lambda_grid.points();
    let c_gamma_lambda = lambdas.iter().map(|&l| Ok((l, solve_c_gamma_lambda(a.gamma, l)?))).collect::<Result<Vec<_>, Error>>()?;
    let out_value = StableOut {
        gamma: k.gamma,
        a_gamma: k.a_gamma,
        c_gamma: k.c_gamma,
        c_gamma_lambda,
        prop92: Prop92 { tail_coeff: k.tail_coeff(), z0_coeff: k.z0_coeff(), w1_coeff: k.w1_coeff() },
    };
    let mut out = open_out(&a.common.out)?;
    serde_json::to_writer_pretty(&mut out, &out_value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(0)
}

fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("LEVYLAB_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| ConfigError(format!("LEVYLAB_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("cannot set up {n} threads: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match cli.command {
        Command::Laws(a) => cmd_laws(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Stable(a) => cmd_stable(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
