//! Tensor-train decomposition and tensor-train orthogonal iteration (TTOI).
//!
//! A tensor 𝒳 of order d with TT-rank (r_1, ..., r_{d-1}) factors entrywise
//! as
//!
//!   X_{i_1...i_d} = G_1[i_1, :] 𝒢_2[:, i_2, :] ⋯ 𝒢_{d-1}[:, i_{d-1}, :] G_d[i_d, :]ᵀ
//!
//! with G_1 ∈ p_1 x r_1, 𝒢_k ∈ r_{k-1} x p_k x r_k and G_d ∈ p_d x r_{d-1}.
//!
//! Estimation from a noisy observation 𝒴 proceeds by TT-SVD ([`tt_svd`]),
//! which sweeps truncated SVDs left to right over reshaped residuals, and is
//! then refined by alternating [`backward_update`] / [`forward_update`]
//! steps. Each update projects the data onto the orthonormal Kronecker chain
//! built from the opposite sweep, so `‖𝒴 - X̂‖² = ‖𝒴‖² - ‖X̂‖²` at every
//! iterate and `‖X̂‖²` is monotonically non-decreasing. All chain products
//! use the implicit Kronecker primitives from the tensor module; nothing of
//! size beyond the data itself is materialized.

use crate::error::{Error, Result};
use crate::linalg::{svd_left, svd_right, OrthonormalFrame};
use crate::rng::SeededRng;
use crate::tensor::{
    apply_backward_chain, checked_product, fold, kron_identity_apply, kron_identity_expand,
    mult_kron_identity_right, reshape_matrix, sequential_unfold, DenseTensor, Matrix,
};

/// A tensor in TT format: first core `p_1 x r_1`, middle cores
/// `r_{k-1} x p_k x r_k`, last core `p_d x r_{d-1}`.
#[derive(Debug, Clone)]
pub struct TTTensor {
    core_first: Matrix,
    cores_mid: Vec<DenseTensor>,
    core_last: Matrix,
}

impl TTTensor {
    pub fn new(core_first: Matrix, cores_mid: Vec<DenseTensor>, core_last: Matrix) -> Result<Self> {
        let mut prev_rank = core_first.cols();
        for (i, core) in cores_mid.iter().enumerate() {
            if core.order() != 3 {
                return Err(Error::argument(format!(
                    "middle core {} must have order 3, got {}",
                    i + 2,
                    core.order()
                )));
            }
            if core.dims()[0] != prev_rank {
                return Err(Error::argument(format!(
                    "middle core {} has leading rank {}, expected {}",
                    i + 2,
                    core.dims()[0],
                    prev_rank
                )));
            }
            prev_rank = core.dims()[2];
        }
        if core_last.cols() != prev_rank {
            return Err(Error::argument(format!(
                "last core has rank {}, expected {}",
                core_last.cols(),
                prev_rank
            )));
        }
        Ok(TTTensor {
            core_first,
            cores_mid,
            core_last,
        })
    }

    pub fn order(&self) -> usize {
        self.cores_mid.len() + 2
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.core_first.rows()];
        dims.extend(self.cores_mid.iter().map(|c| c.dims()[1]));
        dims.push(self.core_last.rows());
        dims
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![self.core_first.cols()];
        ranks.extend(self.cores_mid.iter().map(|c| c.dims()[2]));
        ranks
    }

    pub fn core_first(&self) -> &Matrix {
        &self.core_first
    }

    pub fn cores_mid(&self) -> &[DenseTensor] {
        &self.cores_mid
    }

    pub fn core_last(&self) -> &Matrix {
        &self.core_last
    }

    /// Number of free parameters: p_1 r_1 + Σ_k r_{k-1} p_k r_k + p_d r_{d-1}.
    pub fn param_count(&self) -> usize {
        self.core_first.rows() * self.core_first.cols()
            + self.cores_mid.iter().map(|c| c.len()).sum::<usize>()
            + self.core_last.rows() * self.core_last.cols()
    }
}

/// Evaluate the TT format densely. A left-to-right sweep builds the
/// unfoldings `[X]_k` incrementally, costing O((Π p_k) max r²).
pub fn contract(x: &TTTensor) -> Result<DenseTensor> {
    let dims = x.dims();
    let d = dims.len();
    let mut cur = x.core_first.clone(); // (p_1...p_{k}) x r_k
    for core in &x.cores_mid {
        let unfolded = sequential_unfold(core, 2)?; // (r_{k-1} p_k) x r_k
        cur = kron_identity_apply(&cur, &unfolded, core.dims()[1])?;
    }
    let last = cur.matmul(&x.core_last.transpose())?; // (p_1...p_{d-1}) x p_d
    fold(&last, &dims, d - 1)
}

/// TT tensor with iid standard normal core entries.
pub fn random_tt(dims: &[usize], ranks: &[usize], rng: &mut SeededRng) -> Result<TTTensor> {
    let d = dims.len();
    if d < 2 || ranks.len() != d - 1 {
        return Err(Error::argument(format!(
            "need {} ranks for order {}, got {}",
            d.saturating_sub(1),
            d,
            ranks.len()
        )));
    }
    let core_first = Matrix::from_fn(dims[0], ranks[0], |_, _| rng.standard_normal());
    let mut cores_mid = Vec::with_capacity(d.saturating_sub(2));
    for k in 2..d {
        let shape = vec![ranks[k - 2], dims[k - 1], ranks[k - 1]];
        let n = checked_product(&shape)?;
        let data = (0..n).map(|_| rng.standard_normal()).collect();
        cores_mid.push(DenseTensor::new(shape, data)?);
    }
    let core_last = Matrix::from_fn(dims[d - 1], ranks[d - 2], |_, _| rng.standard_normal());
    TTTensor::new(core_first, cores_mid, core_last)
}

/// Which update produced the state, fixing the parity of the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// TT-SVD output (t = 0); behaves like a forward stage for parity.
    Init,
    /// Odd t: right frames V̂_2..V̂_d and the loading matrix V̂_1 are live.
    Backward,
    /// Even t ≥ 2: left frames Û_1..Û_{d-1} and residuals are live.
    Forward,
}

/// Iteration state of TTOI. Exactly the data belonging to the current stage
/// is populated; the dense iterate is formed on demand by [`TtoiState::materialize`].
#[derive(Debug, Clone)]
pub struct TtoiState {
    dims: Vec<usize>,
    ranks: Vec<usize>,
    y_norm_sq: f64,
    iteration: usize,
    stage: Stage,
    /// Û_1..Û_{d-1} (Init / Forward stages).
    left_frames: Vec<OrthonormalFrame>,
    /// R̃_1..R̃_{d-1} with R̃_k ∈ r_k x (p_{k+1}...p_d) (Init / Forward stages).
    residuals: Vec<Matrix>,
    /// V̂_1 ∈ p_1 x r_1, not orthonormal (Backward stage).
    v_first: Option<Matrix>,
    /// V̂_2..V̂_d with V̂_k ∈ (p_k r_k) x r_{k-1} (Backward stage).
    right_frames: Vec<OrthonormalFrame>,
    iterate_norm_sq: f64,
    objective_trace: Vec<f64>,
    gap_degenerate: bool,
    padded: bool,
}

impl TtoiState {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn y_norm_sq(&self) -> f64 {
        self.y_norm_sq
    }

    /// ‖X̂^(t)‖_F², computed from the compressed factors.
    pub fn iterate_norm_sq(&self) -> f64 {
        self.iterate_norm_sq
    }

    /// ‖𝒴‖_F² - ‖X̂^(t)‖_F² per recorded iteration, t = 0 first.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn left_frames(&self) -> &[OrthonormalFrame] {
        &self.left_frames
    }

    pub fn right_frames(&self) -> &[OrthonormalFrame] {
        &self.right_frames
    }

    pub fn residuals(&self) -> &[Matrix] {
        &self.residuals
    }

    pub fn v_first(&self) -> Option<&Matrix> {
        self.v_first.as_ref()
    }

    /// Any truncated SVD along the way had σ_r ≈ σ_{r+1}.
    pub fn gap_degenerate(&self) -> bool {
        self.gap_degenerate
    }

    /// Any truncated SVD was padded beyond the numerical rank.
    pub fn padded(&self) -> bool {
        self.padded
    }

    /// The dense iterate X̂^(t) = contract(extract_cores(self)).
    pub fn materialize(&self) -> Result<DenseTensor> {
        contract(&extract_cores(self)?)
    }
}

fn tail_product(dims: &[usize], from: usize) -> Result<usize> {
    checked_product(&dims[from..])
}

/// Feasibility of the requested ranks against the left chain:
/// 1 ≤ r_k ≤ min(r_{k-1} p_k, p_{k+1}...p_d).
fn validate_ranks_left(dims: &[usize], ranks: &[usize]) -> Result<()> {
    let d = dims.len();
    if ranks.len() != d - 1 {
        return Err(Error::argument(format!(
            "need {} ranks for order {}, got {}",
            d - 1,
            d,
            ranks.len()
        )));
    }
    let mut prev = 1usize;
    for k in 1..d {
        let r = ranks[k - 1];
        let cap = (prev * dims[k - 1]).min(tail_product(dims, k)?);
        if r < 1 || r > cap {
            return Err(Error::argument(format!(
                "rank r_{} = {} out of range 1..={} for dims {:?}",
                k, r, cap, dims
            )));
        }
        prev = r;
    }
    Ok(())
}

/// The backward sweep needs orthonormal factors V̂_k ∈ (p_k r_k) x r_{k-1},
/// which only exist when r_{k-1} ≤ p_k r_k for every k (r_d = 1).
fn validate_ranks_right(dims: &[usize], ranks: &[usize]) -> Result<()> {
    let d = dims.len();
    for k in 2..=d {
        let r_k = if k == d { 1 } else { ranks[k - 1] };
        if ranks[k - 2] > dims[k - 1] * r_k {
            return Err(Error::argument(format!(
                "rank r_{} = {} exceeds p_{} r_{} = {}; no orthonormal backward factor exists",
                k - 1,
                ranks[k - 2],
                k,
                k,
                dims[k - 1] * r_k
            )));
        }
    }
    Ok(())
}

/// TT-SVD initialization: R_1 = [𝒴]_1, then for k = 1..d-1 take
/// Û_k = SVD^L_{r_k}(R_k), R̃_k = Û_kᵀ R_k, R_{k+1} = Reshape(R̃_k).
pub fn tt_svd(y: &DenseTensor, ranks: &[usize]) -> Result<TtoiState> {
    let d = y.order();
    if d < 2 {
        return Err(Error::argument("TT-SVD requires order >= 2"));
    }
    let dims = y.dims().to_vec();
    validate_ranks_left(&dims, ranks)?;
    let y_norm_sq = y.frob_norm_sq();
    if !y_norm_sq.is_finite() {
        return Err(Error::numeric("input tensor has non-finite entries"));
    }

    let mut left_frames = Vec::with_capacity(d - 1);
    let mut residuals = Vec::with_capacity(d - 1);
    let mut gap_degenerate = false;
    let mut padded = false;
    let mut r_mat = sequential_unfold(y, 1)?;
    for k in 1..d {
        let frame = svd_left(&r_mat, ranks[k - 1])?;
        gap_degenerate |= frame.gap_degenerate();
        padded |= frame.padded();
        let rt = frame.matrix().matmul_tn(&r_mat)?;
        if k < d - 1 {
            r_mat = reshape_matrix(&rt, ranks[k - 1] * dims[k], tail_product(&dims, k + 1)?)?;
        }
        left_frames.push(frame);
        residuals.push(rt);
    }
    let iterate_norm_sq = residuals[d - 2].frob_norm_sq();
    Ok(TtoiState {
        dims,
        ranks: ranks.to_vec(),
        y_norm_sq,
        iteration: 0,
        stage: Stage::Init,
        left_frames,
        residuals,
        v_first: None,
        right_frames: Vec::new(),
        iterate_norm_sq,
        objective_trace: vec![y_norm_sq - iterate_norm_sq],
        gap_degenerate,
        padded,
    })
}

/// TT backward update (odd t): from the residuals of the previous forward
/// stage, compute right frames V̂_d, ..., V̂_2 and the loading V̂_1 = [𝒴]_1 V_prod.
pub fn backward_update(y: &DenseTensor, state: &TtoiState) -> Result<TtoiState> {
    match state.stage {
        Stage::Init | Stage::Forward => {}
        Stage::Backward => {
            return Err(Error::state(
                "backward update requires an init or forward stage state",
            ))
        }
    }
    let dims = &state.dims;
    let ranks = &state.ranks;
    let d = dims.len();
    if y.dims() != &dims[..] {
        return Err(Error::argument("tensor dims do not match the state"));
    }
    validate_ranks_right(dims, ranks)?;

    let mut gap_degenerate = state.gap_degenerate;
    let mut padded = state.padded;
    let mut frames_rev: Vec<OrthonormalFrame> = Vec::with_capacity(d - 1);
    let fd = svd_right(&state.residuals[d - 2], ranks[d - 2])?;
    gap_degenerate |= fd.gap_degenerate();
    padded |= fd.padded();
    let mut v_prod = fd.matrix().clone(); // (p_{k+1}...p_d) x r_k as k decreases
    frames_rev.push(fd);
    for k in (2..d).rev() {
        let m = mult_kron_identity_right(&state.residuals[k - 2], &v_prod, dims[k - 1])?;
        let fk = svd_right(&m, ranks[k - 2])?;
        gap_degenerate |= fk.gap_degenerate();
        padded |= fk.padded();
        v_prod = kron_identity_expand(&v_prod, fk.matrix(), dims[k - 1])?;
        frames_rev.push(fk);
    }
    frames_rev.reverse(); // V̂_2, ..., V̂_d
    let v_first = sequential_unfold(y, 1)?.matmul(&v_prod)?;
    let iterate_norm_sq = v_first.frob_norm_sq();

    let mut objective_trace = state.objective_trace.clone();
    objective_trace.push(state.y_norm_sq - iterate_norm_sq);
    Ok(TtoiState {
        dims: dims.clone(),
        ranks: ranks.clone(),
        y_norm_sq: state.y_norm_sq,
        iteration: state.iteration + 1,
        stage: Stage::Backward,
        left_frames: Vec::new(),
        residuals: Vec::new(),
        v_first: Some(v_first),
        right_frames: frames_rev,
        iterate_norm_sq,
        objective_trace,
        gap_degenerate,
        padded,
    })
}

/// TT forward update (even t): Û_1 from V̂_1, then for k = 2..d-1 the left
/// frame of R_k projected through the backward chain V̂_{k+1}..V̂_d, with
/// fresh residuals R̃_k = Û_kᵀ R_k recomputed from 𝒴.
pub fn forward_update(y: &DenseTensor, state: &TtoiState) -> Result<TtoiState> {
    if state.stage != Stage::Backward {
        return Err(Error::state("forward update requires a backward stage state"));
    }
    let dims = &state.dims;
    let ranks = &state.ranks;
    let d = dims.len();
    if y.dims() != &dims[..] {
        return Err(Error::argument("tensor dims do not match the state"));
    }
    let v_first = state
        .v_first
        .as_ref()
        .ok_or_else(|| Error::state("backward state is missing V̂_1"))?;

    let mut gap_degenerate = state.gap_degenerate;
    let mut padded = state.padded;
    let mut left_frames = Vec::with_capacity(d - 1);
    let mut residuals = Vec::with_capacity(d - 1);

    let f1 = svd_left(v_first, ranks[0])?;
    gap_degenerate |= f1.gap_degenerate();
    padded |= f1.padded();
    let y1 = sequential_unfold(y, 1)?;
    residuals.push(f1.matrix().matmul_tn(&y1)?);
    left_frames.push(f1);

    for k in 2..d {
        let r_mat = reshape_matrix(
            &residuals[k - 2],
            ranks[k - 2] * dims[k - 1],
            tail_product(dims, k)?,
        )?;
        let factor_refs: Vec<&Matrix> = (k - 1..d - 1)
            .map(|j| state.right_frames[j].matrix())
            .collect();
        let projected = apply_backward_chain(&r_mat, &dims[k..], &factor_refs)?;
        let fk = svd_left(&projected, ranks[k - 1])?;
        gap_degenerate |= fk.gap_degenerate();
        padded |= fk.padded();
        residuals.push(fk.matrix().matmul_tn(&r_mat)?);
        left_frames.push(fk);
    }
    let iterate_norm_sq = residuals[d - 2].frob_norm_sq();

    let mut objective_trace = state.objective_trace.clone();
    objective_trace.push(state.y_norm_sq - iterate_norm_sq);
    Ok(TtoiState {
        dims: dims.clone(),
        ranks: ranks.clone(),
        y_norm_sq: state.y_norm_sq,
        iteration: state.iteration + 1,
        stage: Stage::Forward,
        left_frames,
        residuals,
        v_first: None,
        right_frames: Vec::new(),
        iterate_norm_sq,
        objective_trace,
        gap_degenerate,
        padded,
    })
}

/// Extract TT cores from the current stage: (Û_1, reshaped Û_k, R̃_{d-1}ᵀ)
/// after init/forward, (V̂_1, reshaped V̂_k, V̂_d) after backward.
pub fn extract_cores(state: &TtoiState) -> Result<TTTensor> {
    let dims = &state.dims;
    let ranks = &state.ranks;
    let d = dims.len();
    match state.stage {
        Stage::Init | Stage::Forward => {
            let core_first = state.left_frames[0].matrix().clone();
            let mut cores_mid = Vec::with_capacity(d - 2);
            for k in 2..d {
                let shape = vec![ranks[k - 2], dims[k - 1], ranks[k - 1]];
                let data = state.left_frames[k - 1].matrix().data().to_vec();
                cores_mid.push(DenseTensor::new(shape, data)?);
            }
            let core_last = state.residuals[d - 2].transpose();
            TTTensor::new(core_first, cores_mid, core_last)
        }
        Stage::Backward => {
            let core_first = state
                .v_first
                .clone()
                .ok_or_else(|| Error::state("backward state is missing V̂_1"))?;
            let mut cores_mid = Vec::with_capacity(d - 2);
            for k in 2..d {
                // 𝒢_k[a, i, b] = V̂_k[i + p_k b, a]: the transpose buffer is
                // exactly the (r_{k-1}, p_k, r_k) layout.
                let shape = vec![ranks[k - 2], dims[k - 1], ranks[k - 1]];
                let data = state.right_frames[k - 2].matrix().transpose().data().to_vec();
                cores_mid.push(DenseTensor::new(shape, data)?);
            }
            let core_last = state.right_frames[d - 2].matrix().clone();
            TTTensor::new(core_first, cores_mid, core_last)
        }
    }
}

/// Configuration for the TTOI driver.
#[derive(Debug, Clone)]
pub struct TtoiConfig {
    /// Stop once ‖X̂^(t)‖² - ‖X̂^(t-1)‖² ≤ ε. `None` uses 1e-6 · ‖𝒴‖_F².
    pub epsilon: Option<f64>,
    /// Maximum number of update steps after initialization; 0 is plain TT-SVD.
    pub t_max: usize,
    /// Form the dense estimate in the output.
    pub materialize: bool,
}

impl Default for TtoiConfig {
    fn default() -> Self {
        TtoiConfig {
            epsilon: None,
            t_max: 10,
            materialize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TtoiOutput {
    pub cores: TTTensor,
    /// Dense X̂, present when the config asked for materialization.
    pub estimate: Option<DenseTensor>,
    pub state: TtoiState,
    /// ‖𝒴‖² - ‖X̂^(t)‖² for t = 0, 1, ..., non-increasing.
    pub objective_trace: Vec<f64>,
    /// Number of update steps actually performed.
    pub iterations: usize,
    /// The increment rule fired before t_max.
    pub converged_early: bool,
}

/// The full TTOI driver: TT-SVD initialization followed by alternating
/// backward / forward updates until the objective increment drops below ε
/// or `t_max` steps have run.
pub fn ttoi(y: &DenseTensor, ranks: &[usize], config: &TtoiConfig) -> Result<TtoiOutput> {
    if let Some(eps) = config.epsilon {
        if !(eps >= 0.0) {
            return Err(Error::argument("epsilon must be >= 0"));
        }
    }
    let mut state = tt_svd(y, ranks)?;
    // The increment comparison carries a relative floating-point slack so
    // that an exact fixed point (zero increment up to rounding) stops the
    // iteration even at ε = 0.
    let epsilon = config
        .epsilon
        .unwrap_or(1e-6 * state.y_norm_sq())
        .max(1e-12 * state.y_norm_sq());
    let mut converged_early = false;
    let mut prev_norm_sq = state.iterate_norm_sq();
    for t in 1..=config.t_max {
        state = if t % 2 == 1 {
            backward_update(y, &state)?
        } else {
            forward_update(y, &state)?
        };
        let increment = state.iterate_norm_sq() - prev_norm_sq;
        prev_norm_sq = state.iterate_norm_sq();
        if increment <= epsilon {
            converged_early = t < config.t_max;
            break;
        }
    }
    let cores = extract_cores(&state)?;
    let estimate = if config.materialize {
        Some(contract(&cores)?)
    } else {
        None
    };
    Ok(TtoiOutput {
        objective_trace: state.objective_trace().to_vec(),
        iterations: state.iteration(),
        converged_early,
        estimate,
        cores,
        state,
    })
}

/// Result of probing the TT-rank of a dense tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtRanks {
    pub ranks: Vec<usize>,
    /// The tensor was (numerically) zero, making ranks ill-defined.
    pub degenerate: bool,
}

/// TT-rank of a dense tensor: r_k = #{σ_i([𝒳]_k) > tol · σ_1}, computed
/// with the reference SVD.
pub fn tt_ranks_of(x: &DenseTensor, tol: f64) -> Result<TtRanks> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::argument("tt_ranks_of tolerance must lie in (0, 1)"));
    }
    let d = x.order();
    if d < 2 {
        return Err(Error::argument("tt_ranks_of requires order >= 2"));
    }
    let mut ranks = Vec::with_capacity(d - 1);
    let mut degenerate = false;
    for k in 1..d {
        let unfolded = sequential_unfold(x, k)?;
        let (_, s, _) = crate::linalg::full_svd(&unfolded)?;
        let sigma1 = s.first().copied().unwrap_or(0.0);
        if sigma1 == 0.0 {
            degenerate = true;
            ranks.push(0);
        } else {
            ranks.push(s.iter().filter(|&&v| v > tol * sigma1).count());
        }
    }
    Ok(TtRanks { ranks, degenerate })
}
