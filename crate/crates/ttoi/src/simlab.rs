//! Spiked-model instance generation and Monte-Carlo experiment sweeps.
//!
//! The spiked model observes 𝒴 = 𝒳 + 𝒵 where 𝒳 is the contraction of
//! i.i.d. standard normal TT cores at the configured ranks and 𝒵 has
//! i.i.d. N(0, σ²) or Unif(−b, b) entries. Sweeps use a paired design:
//! every method within a cell consumes bit-identical (𝒳, 𝒴) draws, with
//! the replication index selecting the generator stream so cells are
//! reproducible in isolation. Replications inside a cell run concurrently;
//! aggregation order is fixed by replication index.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::markov::{
    empirical_from_trajectory, estimate_transition, generate_aggregatable, sample_trajectory,
};
use crate::rankselect::{select_ranks, SearchStrategy};
use crate::rng::SeededRng;
use crate::tensor::DenseTensor;
use crate::tt::{contract, random_tt, ttoi, TtoiConfig};

/// Noise distribution for the spiked model, entrywise i.i.d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian { sigma: f64 },
    Uniform { bound: f64 },
}

impl NoiseFamily {
    fn draw(&self, rng: &mut SeededRng) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => sigma * rng.standard_normal(),
            NoiseFamily::Uniform { bound } => rng.uniform_symmetric(bound),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            NoiseFamily::Gaussian { sigma } => format!("gaussian({})", sigma),
            NoiseFamily::Uniform { bound } => format!("uniform({})", bound),
        }
    }
}

/// One cell of a spiked-model experiment.
#[derive(Debug, Clone)]
pub struct SpikedModelConfig {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub noise: NoiseFamily,
    pub seed: u64,
    pub replications: usize,
}

impl SpikedModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 || self.dims.iter().any(|&p| p == 0) {
            return Err(Error::argument("dims must be >= 2 positive values"));
        }
        if self.ranks.len() != self.dims.len() - 1 || self.ranks.iter().any(|&r| r == 0) {
            return Err(Error::argument("ranks must be d-1 positive values"));
        }
        if self.replications == 0 {
            return Err(Error::argument("replications must be >= 1"));
        }
        match self.noise {
            NoiseFamily::Gaussian { sigma } if sigma < 0.0 || !sigma.is_finite() => {
                Err(Error::argument("sigma must be finite and nonnegative"))
            }
            NoiseFamily::Uniform { bound } if bound < 0.0 || !bound.is_finite() => {
                Err(Error::argument("bound must be finite and nonnegative"))
            }
            _ => Ok(()),
        }
    }

    /// Short description used as the cell label in records and CSV output.
    pub fn digest(&self) -> String {
        let dims = self
            .dims
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join("x");
        // joined with 'x' so the label stays a single CSV field
        let ranks = self
            .ranks
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join("x");
        format!(
            "dims={} ranks={} noise={} seed={}",
            dims,
            ranks,
            self.noise.label(),
            self.seed
        )
    }
}

/// Estimation methods compared in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ttsvd,
    Ttoi1,
    Ttoi2,
    Empirical,
    TtoiMarkov,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ttsvd => "ttsvd",
            Method::Ttoi1 => "ttoi1",
            Method::Ttoi2 => "ttoi2",
            Method::Empirical => "empirical",
            Method::TtoiMarkov => "ttoi-markov",
        }
    }

    fn iterations(&self) -> Option<usize> {
        match self {
            Method::Ttsvd => Some(0),
            Method::Ttoi1 => Some(1),
            Method::Ttoi2 => Some(2),
            _ => None,
        }
    }
}

/// Aggregated per-cell, per-method results.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub cell: String,
    pub method: Method,
    /// ‖X̂ − 𝒳‖_F (or ‖𝒫̂ − 𝒫‖_F) per replication, indexed by replication.
    pub errors: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// Set when any replication failed; the cell is reported but flagged.
    pub failure: Option<String>,
}

impl ExperimentRecord {
    fn from_samples(
        cell: String,
        method: Method,
        errors: Vec<f64>,
        wall_ms: Vec<f64>,
        failure: Option<String>,
    ) -> Self {
        let (mean, std_dev) = mean_sd(&errors);
        ExperimentRecord {
            cell,
            method,
            errors,
            wall_ms,
            mean,
            std_dev,
            failure,
        }
    }
}

/// Sample mean and (n−1)-normalized standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Draw the (𝒳, 𝒴) pair for one replication, deterministic in
/// (config.seed, replication): the replication index selects the stream.
pub fn generate_spiked(
    config: &SpikedModelConfig,
    replication: usize,
) -> Result<(DenseTensor, DenseTensor)> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed, replication as u64);
    let tt = random_tt(&config.dims, &config.ranks, &mut rng)?;
    let x = contract(&tt)?;
    let mut y = x.clone();
    for v in y.data_mut() {
        *v += config.noise.draw(&mut rng);
    }
    Ok((x, y))
}

/// Run `f` once per replication index on a small thread pool; results are
/// returned in replication order regardless of completion order.
fn parallel_reps<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(reps)
        .max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..reps).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let rep = next.fetch_add(1, Ordering::Relaxed);
                if rep >= reps {
                    break;
                }
                let out = f(rep);
                slots.lock().unwrap()[rep] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("all replications completed"))
        .collect()
}

fn spiked_method_error(
    method: Method,
    x: &DenseTensor,
    y: &DenseTensor,
    ranks: &[usize],
) -> Result<f64> {
    let t_max = method
        .iterations()
        .ok_or_else(|| Error::argument(format!("{} is not a spiked-model method", method.name())))?;
    let cfg = TtoiConfig {
        epsilon: None,
        t_max,
        materialize: true,
    };
    let out = ttoi(y, ranks, &cfg)?;
    let estimate = out.estimate.expect("materialization requested");
    Ok(estimate.sub(x)?.frob_norm())
}

/// Run every method on every cell with paired (𝒳, 𝒴) draws. Failures are
/// recorded on the affected record instead of aborting the sweep.
pub fn run_spiked_sweep(
    grid: &[SpikedModelConfig],
    methods: &[Method],
) -> Result<Vec<ExperimentRecord>> {
    if grid.is_empty() || methods.is_empty() {
        return Err(Error::argument("sweep needs a non-empty grid and methods"));
    }
    let mut records = Vec::new();
    for config in grid {
        config.validate()?;
        type RepOut = Vec<std::result::Result<(f64, f64), String>>;
        let per_rep: Vec<RepOut> = parallel_reps(config.replications, |rep| {
            match generate_spiked(config, rep) {
                Ok((x, y)) => methods
                    .iter()
                    .map(|&m| {
                        let start = Instant::now();
                        spiked_method_error(m, &x, &y, &config.ranks)
                            .map(|e| (e, start.elapsed().as_secs_f64() * 1e3))
                            .map_err(|e| e.to_string())
                    })
                    .collect(),
                Err(e) => methods.iter().map(|_| Err(e.to_string())).collect(),
            }
        });
        for (mi, &method) in methods.iter().enumerate() {
            let mut errors = Vec::new();
            let mut wall = Vec::new();
            let mut failure = None;
            for row in &per_rep {
                match &row[mi] {
                    Ok((e, w)) => {
                        errors.push(*e);
                        wall.push(*w);
                    }
                    Err(msg) => {
                        if failure.is_none() {
                            failure = Some(msg.clone());
                        }
                    }
                }
            }
            records.push(ExperimentRecord::from_samples(
                config.digest(),
                method,
                errors,
                wall,
                failure,
            ));
        }
    }
    Ok(records)
}

/// Compare the empirical and TTOI transition estimators across trajectory
/// lengths. One aggregatable model is drawn per replication (shared across
/// lengths since the stream restarts at the replication index).
pub fn run_markov_sweep(
    p: usize,
    d: usize,
    ranks: &[usize],
    lengths: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    if lengths.is_empty() || replications == 0 {
        return Err(Error::argument("need lengths and replications >= 1"));
    }
    for config_len in lengths {
        if *config_len < d - 1 {
            return Err(Error::argument(format!(
                "trajectory length {} below d-1 = {}",
                config_len,
                d - 1
            )));
        }
    }
    let mut records = Vec::new();
    for &length in lengths {
        type RepOut = std::result::Result<(f64, f64, f64, f64), String>;
        let per_rep: Vec<RepOut> = parallel_reps(replications, |rep| {
            let run = || -> Result<(f64, f64, f64, f64)> {
                let mut rng = SeededRng::new(seed, rep as u64);
                let model = generate_aggregatable(p, d, ranks, &mut rng)?;
                let traj = sample_trajectory(&model, length, &mut rng)?;
                let start = Instant::now();
                let emp = empirical_from_trajectory(&traj, d)?;
                let emp_ms = start.elapsed().as_secs_f64() * 1e3;
                let e_emp = emp.sub(model.transition())?.frob_norm();
                let start = Instant::now();
                let est = estimate_transition(&emp, ranks, None)?;
                let ttoi_ms = emp_ms + start.elapsed().as_secs_f64() * 1e3;
                let e_ttoi = est.model.transition().sub(model.transition())?.frob_norm();
                Ok((e_emp, emp_ms, e_ttoi, ttoi_ms))
            };
            run().map_err(|e| e.to_string())
        });
        let cell = format!(
            "markov p={} d={} ranks={} length={} seed={}",
            p,
            d,
            ranks
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join("x"),
            length,
            seed
        );
        for (mi, method) in [Method::Empirical, Method::TtoiMarkov].into_iter().enumerate() {
            let mut errors = Vec::new();
            let mut wall = Vec::new();
            let mut failure = None;
            for row in &per_rep {
                match row {
                    Ok(vals) => {
                        let (e, w) = if mi == 0 {
                            (vals.0, vals.1)
                        } else {
                            (vals.2, vals.3)
                        };
                        errors.push(e);
                        wall.push(w);
                    }
                    Err(msg) => {
                        if failure.is_none() {
                            failure = Some(msg.clone());
                        }
                    }
                }
            }
            records.push(ExperimentRecord::from_samples(
                cell.clone(),
                method,
                errors,
                wall,
                failure,
            ));
        }
    }
    Ok(records)
}

/// One cell of a BIC rank-selection experiment.
#[derive(Debug, Clone)]
pub struct RankSelectionCell {
    pub config: SpikedModelConfig,
    pub r_max: Vec<usize>,
    pub strategy: SearchStrategy,
    pub ttoi: TtoiConfig,
}

/// Selection frequencies for one rank-selection cell.
#[derive(Debug, Clone)]
pub struct RankSelectionRecord {
    pub cell: String,
    pub true_ranks: Vec<usize>,
    /// Selected tuple per replication, indexed by replication.
    pub selections: Vec<Vec<usize>>,
    pub wall_ms: Vec<f64>,
    pub hits: usize,
    pub frequency: f64,
    pub failure: Option<String>,
}

/// Run `select_ranks` per replication and tabulate how often the generating
/// rank tuple is recovered.
pub fn run_rank_selection_sweep(grid: &[RankSelectionCell]) -> Result<Vec<RankSelectionRecord>> {
    if grid.is_empty() {
        return Err(Error::argument("sweep needs a non-empty grid"));
    }
    let mut records = Vec::new();
    for cell in grid {
        cell.config.validate()?;
        if cell.r_max.len() != cell.config.ranks.len() {
            return Err(Error::argument("r_max arity must match ranks"));
        }
        type RepOut = std::result::Result<(Vec<usize>, f64), String>;
        let per_rep: Vec<RepOut> = parallel_reps(cell.config.replications, |rep| {
            let run = || -> Result<(Vec<usize>, f64)> {
                let (_, y) = generate_spiked(&cell.config, rep)?;
                let start = Instant::now();
                let result = select_ranks(&y, &cell.r_max, cell.strategy, &cell.ttoi)?;
                Ok((result.ranks, start.elapsed().as_secs_f64() * 1e3))
            };
            run().map_err(|e| e.to_string())
        });
        let mut selections = Vec::new();
        let mut wall = Vec::new();
        let mut hits = 0;
        let mut failure = None;
        for row in per_rep {
            match row {
                Ok((ranks, w)) => {
                    if ranks == cell.config.ranks {
                        hits += 1;
                    }
                    selections.push(ranks);
                    wall.push(w);
                }
                Err(msg) => {
                    if failure.is_none() {
                        failure = Some(msg);
                    }
                }
            }
        }
        let total = selections.len().max(1);
        records.push(RankSelectionRecord {
            cell: cell.config.digest(),
            true_ranks: cell.config.ranks.clone(),
            hits,
            frequency: hits as f64 / total as f64,
            selections,
            wall_ms: wall,
            failure,
        });
    }
    Ok(records)
}
