use clap::{Args, Parser, Subcommand};
use pseudodisc::report::{Report, Status};
use pseudodisc::Error;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;

/// Correct approximately holomorphic discs into J-holomorphic ones.
#[derive(Parser, Debug)]
#[command(name = "pseudodisc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Total polynomial degree of the discretization.
    #[arg(long, default_value_t = 12)]
    pub degree: usize,
    /// Sobolev exponent (must exceed 2).
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for CSV series.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// `builtin:std`, `builtin:r6` or a structure JSON file.
    #[arg(long, default_value = "builtin:std")]
    pub structure: String,
    /// Inline expression such as "zeta + 0.05*conj(zeta)^2" or a disc JSON file.
    #[arg(long)]
    pub initial: String,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub maxiter: usize,
    /// Relative kernel threshold for the stabilizer.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    /// Rebuild the right inverse at every step.
    #[arg(long)]
    pub refresh_q: bool,
    /// Write the solution as a disc JSON file.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlueArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value = "builtin:std")]
    pub structure: String,
    /// Map whose restriction to {Re ζ > −τ} is used.
    #[arg(long)]
    pub half1: String,
    /// Map whose restriction to {Re ζ < τ} is used.
    #[arg(long)]
    pub half2: String,
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Radius of the W^{2,p} ball; twice the larger half norm when omitted.
    #[arg(long)]
    pub m: Option<f64>,
    /// Newton-correct each half before gluing.
    #[arg(long)]
    pub correct_halves: bool,
    /// Report the kernel dimension of the pre-glued map.
    #[arg(long)]
    pub check_regularity: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value = "builtin:std")]
    pub structure: String,
    /// Map at which the linearization is taken.
    #[arg(long)]
    pub at: String,
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Order of the truncated series for ψ₂.
    #[arg(long, default_value_t = 20)]
    pub kmax: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CgArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Convergence tolerance of the quadrature oracle.
    #[arg(long, default_value_t = 1e-10)]
    pub quad_tol: f64,
    /// Accepted relative disagreement with the oracle.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct NormsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Inline expression or disc JSON file.
    #[arg(long)]
    pub disc: String,
    /// `disc`, `half1:τ`, `half2:τ` or `overlap:τ`.
    #[arg(long, default_value = "disc")]
    pub region: String,
    /// Hölder exponent for the C^{0,α} entry.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Newton correction of one disc.
    Solve(SolveArgs),
    /// Glue two half-disc maps.
    Glue(GlueArgs),
    /// Kernel spectrum of the linearization.
    Kernel(KernelArgs),
    /// Certificate and tables for the non-regular example on R^6.
    ExampleR6(ExampleArgs),
    /// Cross-check the Cauchy-Green operator against quadrature.
    CgVerify(CgArgs),
    /// Norm table of a disc.
    Norms(NormsArgs),
}

/// What a command produced, successful or not.
pub struct Outcome {
    pub status: Status,
    pub error: Option<String>,
    pub result: Option<serde_json::Value>,
    pub csv: Vec<(&'static str, String)>,
}

impl Outcome {
    pub fn ok(result: serde_json::Value) -> Self {
        Self { status: Status::Ok, error: None, result: Some(result), csv: vec![] }
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("PSEUDODISC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("PSEUDODISC_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

fn emit<Cfg: Serialize>(name: &str, common: &Common, cfg: &Cfg, out: Outcome) -> Result<Status, Error> {
    let report = match out.status {
        Status::Ok => Report::ok(name, cfg, out.result),
        s => Report::failed(name, cfg, s, out.error.unwrap_or_default(), out.result.map(Some)),
    };
    let json = report.to_json()?;
    match &common.report {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    if let Some(dir) = &common.csv_dir {
        std::fs::create_dir_all(dir)?;
        for (file, body) in &out.csv {
            std::fs::write(dir.join(file), body)?;
        }
    }
    Ok(out.status)
}

fn run<Cfg: Serialize>(
    name: &str,
    common: &Common,
    cfg: &Cfg,
    f: impl FnOnce() -> Result<Outcome, Error>,
) -> Result<Status, Error> {
    if !(common.p > 2.0) {
        return Err(Error::InvalidInput(format!("p = {} must exceed 2", common.p)));
    }
    match f() {
        Ok(out) => emit(name, common, cfg, out),
        Err(e) if e.is_validation() => Err(e),
        Err(e) => {
            let out = Outcome { status: Status::Failed, error: Some(e.to_string()), result: None, csv: vec![] };
            emit(name, common, cfg, out)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Status, Error> {
    configure_threads()?;
    match cli.command {
        Command::Solve(a) => run("solve", &a.common, &a, || commands::solve_disc(&a)),
        Command::Glue(a) => run("glue", &a.common, &a, || commands::glue(&a)),
        Command::Kernel(a) => run("kernel", &a.common, &a, || commands::kernel(&a)),
        Command::ExampleR6(a) => run("example-r6", &a.common, &a, || commands::example_r6(&a)),
        Command::CgVerify(a) => run("cg-verify", &a.common, &a, || commands::cg_verify(&a)),
        Command::Norms(a) => run("norms", &a.common, &a, || commands::norms(&a)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
