//! High-order Markov chains with low TT-rank transition structure.
//!
//! An order-(d-1) chain on p states has transition tensor 𝒫 of order d with
//! `P[x_{t-d+2}, ..., x_t, :]` the distribution of the next state; every
//! mode-d fiber lies on the probability simplex. State-aggregatable chains
//! have 𝒫 of low TT-rank, generated here by drawing standard normal TT
//! cores and normalizing absolute values along the last core index so the
//! contraction is automatically stochastic.
//!
//! Estimation follows the plug-in pipeline: an empirical transition tensor
//! (from one long trajectory or from generative per-prefix sampling), a few
//! TTOI steps at the target ranks, then Euclidean projection of every fiber
//! back onto the simplex.
//!
//! States are 0-based in this module; the I/O layer converts the external
//! 1-based labels.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{checked_product, fold, sequential_unfold, DenseTensor, Matrix};
use crate::tt::{contract, random_tt, ttoi, TtoiConfig};

/// How far fiber sums may stray from 1.
const FIBER_TOL: f64 = 1e-12;

/// A transition tensor with validated stochastic fibers.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    p: usize,
    transition: DenseTensor,
}

impl MarkovModel {
    /// Wrap a transition tensor, validating shape and fiber stochasticity.
    pub fn new(transition: DenseTensor) -> Result<Self> {
        let dims = transition.dims();
        if dims.len() < 2 {
            return Err(Error::argument("transition tensor must have order >= 2"));
        }
        let p = dims[0];
        if dims.iter().any(|&q| q != p) {
            return Err(Error::argument(format!(
                "transition tensor must be hypercubic, got dims {:?}",
                dims
            )));
        }
        let prefixes = checked_product(&dims[..dims.len() - 1])?;
        let stride = prefixes;
        for prefix in 0..prefixes {
            let mut sum = 0.0;
            for j in 0..p {
                let v = transition.data()[prefix + j * stride];
                if v < -FIBER_TOL || !v.is_finite() {
                    return Err(Error::argument(format!(
                        "fiber {} has invalid entry {}",
                        prefix, v
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > FIBER_TOL {
                return Err(Error::argument(format!(
                    "fiber {} sums to {}, expected 1",
                    prefix, sum
                )));
            }
        }
        Ok(MarkovModel { p, transition })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Order of the chain: d - 1 conditioning states.
    pub fn order(&self) -> usize {
        self.transition.order() - 1
    }

    pub fn tensor_order(&self) -> usize {
        self.transition.order()
    }

    pub fn transition(&self) -> &DenseTensor {
        &self.transition
    }

    pub fn into_transition(self) -> DenseTensor {
        self.transition
    }

    /// The mode-d fiber for a linearized prefix (first conditioning state
    /// fastest).
    pub fn fiber(&self, prefix: usize) -> Vec<f64> {
        let stride = self.transition.len() / self.p;
        (0..self.p)
            .map(|j| self.transition.data()[prefix + j * stride])
            .collect()
    }
}

/// A state sequence, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    p: usize,
    states: Vec<usize>,
}

impl Trajectory {
    pub fn new(p: usize, states: Vec<usize>) -> Result<Self> {
        if p == 0 {
            return Err(Error::argument("state count must be >= 1"));
        }
        if let Some(&bad) = states.iter().find(|&&s| s >= p) {
            return Err(Error::argument(format!(
                "state {} out of range for {} states",
                bad, p
            )));
        }
        Ok(Trajectory { p, states })
    }

    /// Build from external 1-based labels.
    pub fn from_one_based(p: usize, labels: &[u64]) -> Result<Self> {
        let states = labels
            .iter()
            .map(|&l| {
                if l == 0 || l as usize > p {
                    Err(Error::argument(format!(
                        "state label {} out of range 1..={}",
                        l, p
                    )))
                } else {
                    Ok(l as usize - 1)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { p, states })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn one_based(&self) -> Vec<u64> {
        self.states.iter().map(|&s| s as u64 + 1).collect()
    }
}

fn normalize_rows_abs(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let sum: f64 = (0..m.cols()).map(|j| m.get(i, j).abs()).sum();
        for j in 0..m.cols() {
            out.set(i, j, m.get(i, j).abs() / sum);
        }
    }
    out
}

/// Generate a state-aggregatable transition tensor of order `d` on `p`
/// states with TT-rank at most `ranks`: draw standard normal cores and
/// normalize absolute values along each core's last index.
pub fn generate_aggregatable(
    p: usize,
    d: usize,
    ranks: &[usize],
    rng: &mut SeededRng,
) -> Result<MarkovModel> {
    if p < 1 || d < 2 {
        return Err(Error::argument("need p >= 1 and d >= 2"));
    }
    let dims = vec![p; d];
    let raw = random_tt(&dims, ranks, rng)?;

    let core_first = normalize_rows_abs(raw.core_first());
    let mut cores_mid = Vec::with_capacity(d - 2);
    for core in raw.cores_mid() {
        let (r_prev, pk, r_next) = (core.dims()[0], core.dims()[1], core.dims()[2]);
        let mut data = vec![0.0; core.len()];
        for a in 0..r_prev {
            for i in 0..pk {
                let sum: f64 = (0..r_next).map(|b| core.get(&[a, i, b]).abs()).sum();
                for b in 0..r_next {
                    data[a + r_prev * i + r_prev * pk * b] = core.get(&[a, i, b]).abs() / sum;
                }
            }
        }
        cores_mid.push(DenseTensor::new(core.dims().to_vec(), data)?);
    }
    // normalize G̃_d over the state index: columns of the p x r_{d-1} core
    // then sum to 1
    let last = raw.core_last();
    let mut core_last = Matrix::zeros(last.rows(), last.cols());
    for a in 0..last.cols() {
        let sum: f64 = (0..last.rows()).map(|i| last.get(i, a).abs()).sum();
        for i in 0..last.rows() {
            core_last.set(i, a, last.get(i, a).abs() / sum);
        }
    }

    let tt = crate::tt::TTTensor::new(core_first, cores_mid, core_last)?;
    MarkovModel::new(contract(&tt)?)
}

fn sample_categorical(weights: &[f64], rng: &mut SeededRng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Sample a trajectory of `length` states: the first d-1 i.i.d. uniform on
/// [p], the rest drawn from the conditioning fiber.
pub fn sample_trajectory(m: &MarkovModel, length: usize, rng: &mut SeededRng) -> Result<Trajectory> {
    let d = m.tensor_order();
    let p = m.p();
    if length < d - 1 {
        return Err(Error::argument(format!(
            "trajectory length {} below the {} conditioning states",
            length,
            d - 1
        )));
    }
    let mut states = Vec::with_capacity(length);
    for _ in 0..d - 1 {
        states.push(rng.below(p));
    }
    let mut prefix_stride = Vec::with_capacity(d - 1);
    let mut s = 1usize;
    for _ in 0..d - 1 {
        prefix_stride.push(s);
        s *= p;
    }
    while states.len() < length {
        let t = states.len();
        let mut prefix = 0usize;
        for (j, &stride) in prefix_stride.iter().enumerate() {
            prefix += states[t - (d - 1) + j] * stride;
        }
        let fiber = m.fiber(prefix);
        states.push(sample_categorical(&fiber, rng));
    }
    Trajectory::new(p, states)
}

/// Empirical transition tensor from one trajectory: overlapping windows of
/// length d are counted, fibers are count ratios, and prefixes never seen
/// fall back to the uniform distribution 1/p.
pub fn empirical_from_trajectory(traj: &Trajectory, d: usize) -> Result<DenseTensor> {
    if d < 2 {
        return Err(Error::argument("need tensor order d >= 2"));
    }
    let p = traj.p();
    if traj.len() < d - 1 {
        return Err(Error::argument(format!(
            "trajectory of length {} is shorter than d-1 = {}",
            traj.len(),
            d - 1
        )));
    }
    let dims = vec![p; d];
    let total = checked_product(&dims)?;
    let prefixes = total / p;
    let mut counts = vec![0u64; total];
    let mut prefix_totals = vec![0u64; prefixes];
    let states = traj.states();
    for t in 0..states.len().saturating_sub(d - 1) {
        let mut prefix = 0usize;
        let mut stride = 1usize;
        for j in 0..d - 1 {
            prefix += states[t + j] * stride;
            stride *= p;
        }
        let next = states[t + d - 1];
        counts[prefix + next * prefixes] += 1;
        prefix_totals[prefix] += 1;
    }
    let mut data = vec![0.0; total];
    for prefix in 0..prefixes {
        if prefix_totals[prefix] == 0 {
            for j in 0..p {
                data[prefix + j * prefixes] = 1.0 / p as f64;
            }
        } else {
            let n = prefix_totals[prefix] as f64;
            for j in 0..p {
                data[prefix + j * prefixes] = counts[prefix + j * prefixes] as f64 / n;
            }
        }
    }
    DenseTensor::new(dims, data)
}

/// Empirical transition tensor in the generative setting: `n` independent
/// next-state draws per prefix, fibers are the observed frequencies.
pub fn empirical_generative(
    m: &MarkovModel,
    n: usize,
    rng: &mut SeededRng,
) -> Result<DenseTensor> {
    if n < 1 {
        return Err(Error::argument("need n >= 1 draws per prefix"));
    }
    let p = m.p();
    let d = m.tensor_order();
    let dims = vec![p; d];
    let total = checked_product(&dims)?;
    let prefixes = total / p;
    let mut data = vec![0.0; total];
    for prefix in 0..prefixes {
        let fiber = m.fiber(prefix);
        let mut counts = vec![0u64; p];
        for _ in 0..n {
            counts[sample_categorical(&fiber, rng)] += 1;
        }
        for j in 0..p {
            data[prefix + j * prefixes] = counts[j] as f64 / n as f64;
        }
    }
    DenseTensor::new(dims, data)
}

/// Euclidean projection onto the probability simplex {x >= 0, Σx = 1},
/// by the exact sort-and-threshold procedure.
pub fn simplex_project(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::argument("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("simplex projection of non-finite vector"));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if x - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| (x - tau).max(0.0)).collect())
}

/// Output of the TTOI transition estimator.
#[derive(Debug, Clone)]
pub struct TransitionEstimate {
    /// The simplex-projected estimate, a valid transition tensor.
    pub model: MarkovModel,
    /// The raw TTOI iterate before projection.
    pub raw: DenseTensor,
}

/// Estimate a transition tensor from an empirical one: TTOI at the given
/// ranks (one step by default), then projection of every fiber onto the
/// simplex.
pub fn estimate_transition(
    p_emp: &DenseTensor,
    ranks: &[usize],
    config: Option<&TtoiConfig>,
) -> Result<TransitionEstimate> {
    let d = p_emp.order();
    if d < 2 {
        return Err(Error::argument("need tensor order d >= 2"));
    }
    let default_cfg = TtoiConfig {
        epsilon: None,
        t_max: 1,
        materialize: true,
    };
    let mut cfg = config.cloned().unwrap_or(default_cfg);
    cfg.materialize = true;
    let out = ttoi(p_emp, ranks, &cfg)?;
    let raw = out.estimate.expect("materialization requested");

    let unfolded = sequential_unfold(&raw, d - 1)?; // prefixes x p
    let mut projected = Matrix::zeros(unfolded.rows(), unfolded.cols());
    let mut row = vec![0.0; unfolded.cols()];
    for i in 0..unfolded.rows() {
        for j in 0..unfolded.cols() {
            row[j] = unfolded.get(i, j);
        }
        let proj = simplex_project(&row)?;
        for j in 0..unfolded.cols() {
            projected.set(i, j, proj[j]);
        }
    }
    let tensor = fold(&projected, raw.dims(), d - 1)?;
    Ok(TransitionEstimate {
        model: MarkovModel::new(tensor)?,
        raw,
    })
}
