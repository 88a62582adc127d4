use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rwbsde::benchmarks::BenchmarkCase;
use rwbsde::exit_time::{ExitTimeCdf, DEFAULT_GRID_SIZE, DEFAULT_T_MAX, DEFAULT_T_MIN};
use rwbsde::experiment::{
    emit_csv, run_mc_with, ConvergenceSummary, ExperimentConfig, SchemeChoice,
    DEFAULT_REPLICATIONS, DEFAULT_SEED,
};
use rwbsde::solver::solve_with;
use rwbsde::{verify, Execution};

#[derive(Parser)]
#[command(
    name = "rwbsde",
    version,
    about = "Random-walk schemes for Markovian BSDEs"
)]
struct Cli {
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the exit-time CDF of [-sqrt(h), sqrt(h)] as CSV `t,F`.
    TabulateExit {
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo L2 errors against the exact solution, with log-log slopes.
    Convergence {
        #[arg(long)]
        case: BenchmarkCase,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        /// Defaults to T/2.
        #[arg(long)]
        t_eval: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800")]
        n: Vec<usize>,
        #[arg(long = "M", default_value_t = DEFAULT_REPLICATIONS)]
        replications: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "explicit")]
        scheme: SchemeChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one lattice and print the root values.
    Solve {
        #[arg(long)]
        case: BenchmarkCase,
        #[arg(long)]
        n: usize,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value = "explicit")]
        scheme: SchemeChoice,
    },
    /// Run the built-in oracle checks; exits nonzero on any failure.
    Verify,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn tabulate_exit(h: f64, points: usize, out: PathBuf) -> Result<()> {
    let table = ExitTimeCdf::tabulate(h, points, DEFAULT_T_MIN * h, DEFAULT_T_MAX * h)?;
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    table.write_csv(BufWriter::new(file))?;
    eprintln!(
        "wrote {points} points on [{:e}, {:e}], tail mass {:.3e}, to {}",
        DEFAULT_T_MIN * h,
        DEFAULT_T_MAX * h,
        table.tail_mass(),
        out.display()
    );
    Ok(())
}

fn convergence(config: ExperimentConfig, out: Option<PathBuf>, exec: Execution) -> Result<()> {
    config.validate()?;
    let (series, _) = run_mc_with(&config, exec)?;
    let summary = ConvergenceSummary::from_series(&series, config.case.alpha());
    println!("n,E_Y,SE_Y,E_Z,SE_Z");
    for r in &series.rows {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.6e}")).unwrap_or_default();
        println!(
            "{},{:.6e},{:.6e},{},{}",
            r.n,
            r.e_y,
            r.se_y,
            opt(r.e_z),
            opt(r.se_z)
        );
    }
    if let Some(f) = summary.y {
        println!("slope_Y = {:.4} (r2 {:.4})", f.slope, f.r_squared);
    }
    if let Some(f) = summary.z {
        println!("slope_Z = {:.4} (r2 {:.4})", f.slope, f.r_squared);
    }
    println!("reference slope = {:.4}", summary.reference_slope);
    if summary.y_flagged() {
        println!("note: Y slope is markedly above the reference rate");
    }
    if let Some(path) = out {
        emit_csv(&series, &summary, &path, Some(&config))?;
    }
    Ok(())
}

fn solve_case(
    case: BenchmarkCase,
    n: usize,
    horizon: f64,
    scheme: SchemeChoice,
    exec: Execution,
) -> Result<()> {
    let problem = case.problem(horizon, n)?;
    let lattice = solve_with(&problem, scheme.scheme(), exec)?;
    let (y, z) = lattice.root();
    let exact = case.exact(horizon)?;
    println!("y00 = {y:.17e}");
    println!("z00 = {z:.17e}");
    println!("exact Y(0,0) = {:.17e}", exact.y(0.0, 0.0));
    if let Some(z) = exact.z(0.0, 0.0) {
        println!("exact Z(0,0) = {z:.17e}");
    }
    Ok(())
}

fn run_verify() -> Result<bool> {
    let mut ok = true;
    for c in verify::run_all()? {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = execution(cli.sequential);
    let result = match cli.command {
        Command::TabulateExit { h, points, out } => tabulate_exit(h, points, out).map(|_| true),
        Command::Convergence {
            case,
            horizon,
            t_eval,
            n,
            replications,
            seed,
            scheme,
            out,
        } => {
            let config = ExperimentConfig {
                t_eval: t_eval.unwrap_or(horizon / 2.0),
                horizon,
                n_list: n,
                replications,
                seed,
                scheme,
                ..ExperimentConfig::new(case)
            };
            convergence(config, out, exec).map(|_| true)
        }
        Command::Solve {
            case,
            n,
            horizon,
            scheme,
        } => solve_case(case, n, horizon, scheme, exec).map(|_| true),
        Command::Verify => run_verify(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_convergence_flags() {
        let cli = Cli::parse_from([
            "rwbsde",
            "convergence",
            "--case",
            "square",
            "--T",
            "1",
            "--t-eval",
            "0.5",
            "--n",
            "50,100",
            "--M",
            "10",
            "--seed",
            "3",
            "--scheme",
            "implicit",
        ]);
        match cli.command {
            Command::Convergence {
                case,
                n,
                replications,
                scheme,
                ..
            } => {
                assert_eq!(case, BenchmarkCase::Square);
                assert_eq!(n, vec![50, 100]);
                assert_eq!(replications, 10);
                assert_eq!(scheme, SchemeChoice::Implicit);
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
