//! Command-line surface for TT decomposition, rank selection, spiked-model
//! sweeps, and Markov transition estimation.
//!
//! Exit codes: 0 success, 1 I/O error, 2 argument error, 3 format error,
//! 4 numeric error. The environment variable `TTOI_SEED` overrides any
//! `--seed` flag.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use ttoi::error::{Error, Result};
use ttoi::io::{
    read_tensor, read_trajectory, write_experiment_csv, write_tensor, write_trace_csv,
};
use ttoi::markov::{
    empirical_from_trajectory, empirical_generative, estimate_transition, generate_aggregatable,
};
use ttoi::rankselect::{select_ranks, SearchStrategy};
use ttoi::rng::SeededRng;
use ttoi::simlab::{
    mean_sd, run_spiked_sweep, ExperimentRecord, Method, NoiseFamily, SpikedModelConfig,
};
use ttoi::tensor::{DenseTensor, Matrix};
use ttoi::tt::{ttoi, TtoiConfig};

#[derive(Parser)]
#[command(name = "ttoi", about = "Tensor-train orthogonal iteration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Exhaustive,
    Greedy,
}

impl From<StrategyArg> for SearchStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Auto => SearchStrategy::Auto,
            StrategyArg::Exhaustive => SearchStrategy::Exhaustive,
            StrategyArg::Greedy => SearchStrategy::Greedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ttsvd,
    Ttoi1,
    Ttoi2,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ttsvd => Method::Ttsvd,
            MethodArg::Ttoi1 => Method::Ttoi1,
            MethodArg::Ttoi2 => Method::Ttoi2,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run TTOI on a tensor file and write cores and/or the estimate.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        /// TT-ranks r1,...,r_{d-1}
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        /// Update steps after TT-SVD initialization; 0 is plain TT-SVD.
        #[arg(long, default_value_t = 10)]
        iters: usize,
        /// Stop once the objective decreases by at most this much.
        #[arg(long)]
        eps: Option<f64>,
        /// Directory receiving one tensor file per TT core.
        #[arg(long)]
        output_cores: Option<PathBuf>,
        /// Path receiving the dense estimate X̂.
        #[arg(long)]
        output_estimate: Option<PathBuf>,
        /// Print the objective trace as CSV on standard output.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Select TT-ranks by BIC and print them comma separated.
    SelectRanks {
        #[arg(long)]
        input: PathBuf,
        /// Per-mode upper bounds r_max,1,...,r_max,d-1
        #[arg(long, value_delimiter = ',', required = true)]
        rmax: Vec<usize>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
        strategy: StrategyArg,
        /// TTOI update steps per candidate evaluation.
        #[arg(long, default_value_t = 2)]
        iters: usize,
    },
    /// Monte-Carlo sweep on the spiked model; emits CSV records.
    Spiked {
        /// Tensor dimensions p1,...,pd
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// TT-ranks r1,...,r_{d-1}
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        /// Gaussian noise levels; each value is one sweep cell.
        #[arg(long, value_delimiter = ',', conflicts_with = "bound")]
        sigma: Vec<f64>,
        /// Uniform(-b, b) noise bounds; each value is one sweep cell.
        #[arg(long, value_delimiter = ',')]
        bound: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        replications: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Ttsvd, MethodArg::Ttoi1, MethodArg::Ttoi2])]
        methods: Vec<MethodArg>,
        /// CSV output path; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate a Markov transition tensor from a trajectory file or by
    /// generative sampling from a seeded aggregatable model.
    Markov {
        /// Trajectory file: one 1-based state per line.
        #[arg(long, conflicts_with = "generative_n")]
        trajectory: Option<PathBuf>,
        /// Generative mode: next-state draws per prefix.
        #[arg(long)]
        generative_n: Option<usize>,
        /// Number of states p.
        #[arg(long)]
        states: usize,
        /// Markov order d-1 (number of conditioning states).
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// TT-ranks r1,...,r_{d-1}
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TTOI update steps for the estimator.
        #[arg(long, default_value_t = 1)]
        iters: usize,
        /// Path receiving the empirical transition tensor.
        #[arg(long)]
        output_empirical: Option<PathBuf>,
        /// Path receiving the TTOI transition estimate.
        #[arg(long)]
        output_estimate: Option<PathBuf>,
    },
}

fn resolve_seed(flag: u64) -> Result<u64> {
    match std::env::var("TTOI_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::argument(format!("TTOI_SEED must be an unsigned integer, got {:?}", s))),
        Err(_) => Ok(flag),
    }
}

fn matrix_as_tensor(m: &Matrix) -> Result<DenseTensor> {
    DenseTensor::new(vec![m.rows(), m.cols()], m.data().to_vec())
}

fn run_decompose(
    input: PathBuf,
    ranks: Vec<usize>,
    iters: usize,
    eps: Option<f64>,
    output_cores: Option<PathBuf>,
    output_estimate: Option<PathBuf>,
    diagnostics: bool,
) -> Result<()> {
    let y = read_tensor(&input)?;
    let cfg = TtoiConfig {
        epsilon: eps,
        t_max: iters,
        materialize: output_estimate.is_some(),
    };
    let out = ttoi(&y, &ranks, &cfg)?;
    if let Some(dir) = output_cores {
        std::fs::create_dir_all(&dir)?;
        let d = y.order();
        write_tensor(
            &dir.join("core_1.tnsr"),
            &matrix_as_tensor(out.cores.core_first())?,
        )?;
        for (k, core) in out.cores.cores_mid().iter().enumerate() {
            write_tensor(&dir.join(format!("core_{}.tnsr", k + 2)), core)?;
        }
        write_tensor(
            &dir.join(format!("core_{}.tnsr", d)),
            &matrix_as_tensor(out.cores.core_last())?,
        )?;
    }
    if let Some(path) = output_estimate {
        write_tensor(&path, out.estimate.as_ref().expect("materialized"))?;
    }
    if diagnostics {
        let stdout = std::io::stdout();
        write_trace_csv(&mut stdout.lock(), &out.objective_trace)?;
    }
    Ok(())
}

fn run_select_ranks(
    input: PathBuf,
    rmax: Vec<usize>,
    strategy: StrategyArg,
    iters: usize,
) -> Result<()> {
    let y = read_tensor(&input)?;
    let cfg = TtoiConfig {
        epsilon: None,
        t_max: iters,
        materialize: false,
    };
    let result = select_ranks(&y, &rmax, strategy.into(), &cfg)?;
    let line = result
        .ranks
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(",");
    println!("{}", line);
    Ok(())
}

fn run_spiked(
    dims: Vec<usize>,
    ranks: Vec<usize>,
    sigma: Vec<f64>,
    bound: Vec<f64>,
    seed: u64,
    replications: usize,
    methods: Vec<MethodArg>,
    output: Option<PathBuf>,
) -> Result<()> {
    let seed = resolve_seed(seed)?;
    let mut grid = Vec::new();
    let noises: Vec<NoiseFamily> = if !bound.is_empty() {
        bound.iter().map(|&b| NoiseFamily::Uniform { bound: b }).collect()
    } else if !sigma.is_empty() {
        sigma.iter().map(|&s| NoiseFamily::Gaussian { sigma: s }).collect()
    } else {
        return Err(Error::argument("provide --sigma or --bound noise levels"));
    };
    for noise in noises {
        grid.push(SpikedModelConfig {
            dims: dims.clone(),
            ranks: ranks.clone(),
            noise,
            seed,
            replications,
        });
    }
    let methods: Vec<Method> = methods.into_iter().map(Into::into).collect();
    let records = run_spiked_sweep(&grid, &methods)?;
    match output {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            write_experiment_csv(&mut f, &records)?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            write_experiment_csv(&mut stdout.lock(), &records)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_markov(
    trajectory: Option<PathBuf>,
    generative_n: Option<usize>,
    states: usize,
    order: usize,
    ranks: Vec<usize>,
    seed: u64,
    iters: usize,
    output_empirical: Option<PathBuf>,
    output_estimate: Option<PathBuf>,
) -> Result<()> {
    if order == 0 {
        return Err(Error::argument("order must be >= 1"));
    }
    let d = order + 1;
    if ranks.len() != d - 1 {
        return Err(Error::argument(format!(
            "expected {} ranks for order {}, got {}",
            d - 1,
            order,
            ranks.len()
        )));
    }
    let seed = resolve_seed(seed)?;
    let cfg = TtoiConfig {
        epsilon: None,
        t_max: iters,
        materialize: true,
    };

    let emp = match (&trajectory, generative_n) {
        (Some(path), None) => {
            let traj = read_trajectory(path, states)?;
            empirical_from_trajectory(&traj, d)?
        }
        (None, Some(n)) => {
            let mut rng = SeededRng::new(seed, 0);
            let model = generate_aggregatable(states, d, &ranks, &mut rng)?;
            let start = Instant::now();
            let emp = empirical_generative(&model, n, &mut rng)?;
            let emp_ms = start.elapsed().as_secs_f64() * 1e3;
            let e_emp = emp.sub(model.transition())?.frob_norm();
            let start = Instant::now();
            let est = estimate_transition(&emp, &ranks, Some(&cfg))?;
            let ttoi_ms = emp_ms + start.elapsed().as_secs_f64() * 1e3;
            let e_ttoi = est.model.transition().sub(model.transition())?.frob_norm();
            let cell = format!(
                "markov-generative p={} d={} n={} seed={}",
                states, d, n, seed
            );
            let records = [
                (Method::Empirical, e_emp, emp_ms),
                (Method::TtoiMarkov, e_ttoi, ttoi_ms),
            ]
            .map(|(method, error, wall)| {
                let (mean, std_dev) = mean_sd(&[error]);
                ExperimentRecord {
                    cell: cell.clone(),
                    method,
                    errors: vec![error],
                    wall_ms: vec![wall],
                    mean,
                    std_dev,
                    failure: None,
                }
            });
            let stdout = std::io::stdout();
            write_experiment_csv(&mut stdout.lock(), &records)?;
            emp
        }
        _ => {
            return Err(Error::argument(
                "provide exactly one of --trajectory or --generative-n",
            ))
        }
    };

    if let Some(path) = &output_empirical {
        write_tensor(path, &emp)?;
    }
    if let Some(path) = &output_estimate {
        let est = estimate_transition(&emp, &ranks, Some(&cfg))?;
        write_tensor(path, est.model.transition())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose {
            input,
            ranks,
            iters,
            eps,
            output_cores,
            output_estimate,
            diagnostics,
        } => run_decompose(input, ranks, iters, eps, output_cores, output_estimate, diagnostics),
        Command::SelectRanks {
            input,
            rmax,
            strategy,
            iters,
        } => run_select_ranks(input, rmax, strategy, iters),
        Command::Spiked {
            dims,
            ranks,
            sigma,
            bound,
            seed,
            replications,
            methods,
            output,
        } => run_spiked(dims, ranks, sigma, bound, seed, replications, methods, output),
        Command::Markov {
            trajectory,
            generative_n,
            states,
            order,
            ranks,
            seed,
            iters,
            output_empirical,
            output_estimate,
        } => run_markov(
            trajectory,
            generative_n,
            states,
            order,
            ranks,
            seed,
            iters,
            output_empirical,
            output_estimate,
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e);
        std::process::exit(e.exit_code());
    }
}
