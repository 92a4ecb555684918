use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nodal_core::functional::{lambda_1p, EigenOptions};
use nodal_core::harness::{export_csv, solve_once, sweep_epsilon, write_atomic, MeshSpec, ProblemSpec};
use nodal_core::{Error, SolveOptions};

#[derive(Parser)]
#[command(name = "nodal", version, about = "Least-energy nodal solutions of -eps^2 Lap u - Lap_p u = f(u)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write its run record.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Epsilon continuation with warm starts.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "0,0.05,0.1,0.2,0.4")]
        eps_grid: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the structural hypotheses on the nonlinearity.
    Validate {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Estimate the first Dirichlet eigenvalue of the p-Laplacian.
    Eigen {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        p: f64,
    },
}

#[derive(Clone, Copy, Debug)]
enum MeshKind {
    Interval(usize),
    Rect(usize, usize),
}

impl FromStr for MeshKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<usize>().map_err(|e| format!("bad resolution {x:?}: {e}"));
        match parts.as_slice() {
            ["interval", n] => Ok(MeshKind::Interval(num(n)?)),
            ["rect", nx, ny] => Ok(MeshKind::Rect(num(nx)?, num(ny)?)),
            _ => Err(format!("expected interval:N or rect:NX:NY, got {s:?}")),
        }
    }
}

#[derive(Args)]
struct DomainArgs {
    #[arg(long, default_value = "interval:128")]
    mesh: MeshKind,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    w: f64,
    #[arg(long, default_value_t = 1.0)]
    h: f64,
}

impl DomainArgs {
    fn spec(&self) -> MeshSpec {
        match self.mesh {
            MeshKind::Interval(n) => MeshSpec::Interval {
                n,
                extents: [self.a, self.b],
            },
            MeshKind::Rect(nx, ny) => MeshSpec::Rect {
                nx,
                ny,
                extents: [self.w, self.h],
            },
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 4.0)]
    q: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
}

impl ProblemArgs {
    fn spec(&self, eps: f64) -> ProblemSpec {
        ProblemSpec {
            mesh: self.domain.spec(),
            p: self.p,
            q: self.q,
            mu: self.mu,
            kappa: self.kappa,
            eps: eps.abs(),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    tol_grad: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    n_starts: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            tol_grad: self.tol_grad,
            seed: self.seed,
            n_starts: self.n_starts,
            max_iter: self.max_iter,
            ..Default::default()
        }
    }
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InvalidResolution(_) | Error::InvalidDomain(_) => Failure::Usage(e.to_string()),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Failure::Usage(format!("bad eps grid entry {x:?}: {e}"))))
        .collect()
}

fn json(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            problem,
            eps,
            solver,
            out,
        } => {
            let spec = problem.spec(eps.unwrap_or(0.0));
            let opts = solver.options();
            opts.validate()?;
            let rec = solve_once(&spec, &opts)?;
            if let Some(path) = out {
                rec.write(&path)?;
            }
            println!("{}", json(&serde_json::json!({ "status": rec.status, "result": rec.result })));
            if !rec.is_ok() {
                return Err(Failure::Solver(rec.meta.error.unwrap_or_else(|| "did not converge".into())));
            }
        }
        Command::Sweep {
            problem,
            eps_grid,
            solver,
            out,
        } => {
            let grid = parse_grid(&eps_grid)?;
            let spec = problem.spec(0.0);
            let opts = solver.options();
            opts.validate()?;
            let report = sweep_epsilon(&spec, &grid, &opts)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Failure::Usage(e.to_string()))?;
                for (k, rec) in report.records.iter().enumerate() {
                    rec.write(&dir.join(format!("run_{k:03}.json")))?;
                }
                write_atomic(&dir.join("sweep.csv"), export_csv(&report.records)?.as_bytes())?;
            }
            println!(
                "{}",
                json(&serde_json::json!({
                    "eps": report.eps,
                    "energies": report.energies(),
                    "monotone": report.monotone,
                    "violations": report.violations,
                    "fit": report.fit,
                    "distances": report.distances,
                    "distances_decay": report.distances_decay,
                    "index_constant": report.index_constant,
                }))
            );
            if report.records.iter().any(|r| !r.is_ok()) {
                return Err(Failure::Solver("some grid points did not converge".into()));
            }
        }
        Command::Validate { problem } => {
            let spec = problem.spec(0.0);
            let (rep, lambda) = spec.hypotheses()?;
            println!(
                "{}",
                json(&serde_json::json!({
                    "growth": rep.growth,
                    "superlinear": rep.superlinear,
                    "below_first_eigenvalue": rep.below_first_eigenvalue,
                    "monotone_quotient": rep.monotone_quotient,
                    "m": rep.m,
                    "threshold": rep.threshold,
                    "critical_exponent": rep.critical_exponent,
                    "lambda_1p": lambda,
                    "all_pass": rep.all_pass(),
                }))
            );
            if !rep.all_pass() {
                return Err(Failure::Solver("hypotheses fail".into()));
            }
        }
        Command::Eigen { domain, p } => {
            let mesh = Arc::new(domain.spec().build()?);
            let est = lambda_1p(&mesh, p, &EigenOptions::default())?;
            println!("lambda_1p = {:.10}", est.lambda);
            log::info!("residual {:.3e} after {} iterations", est.residual, est.iterations);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NODAL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
