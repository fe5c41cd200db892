//! BIC-based TT-rank selection.
//!
//! For candidate ranks r = (r_1, ..., r_{d-1}) the criterion is
//!
//!   BIC(r) = (Π p_k) · ln ‖𝒴 - X̂(r)‖_F² + N(r) · Σ ln p_k
//!
//! with N(r) = p_1 r_1 + Σ r_{k-1} p_k r_k + p_d r_{d-1} the TT parameter
//! count and X̂(r) the TTOI estimate at ranks r. Natural logarithms are used
//! in both terms. Perfect fits (residual at the floating-point noise floor)
//! are floored so they all share the maximally favorable fit term and the
//! penalty alone discriminates among them.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use crate::tt::{ttoi, TtoiConfig};

/// Residual floor inside the logarithm.
const RESIDUAL_FLOOR: f64 = 1e-300;
/// Residuals at or below this fraction of ‖𝒴‖² count as perfect fits.
const PERFECT_FIT_REL: f64 = 1e-20;
/// Boxes up to this many candidates are searched exhaustively by default.
const EXHAUSTIVE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStrategy {
    /// Exhaustive when the box holds at most 1024 candidates, greedy otherwise.
    Auto,
    Exhaustive,
    /// Coordinate-wise descent from (1, ..., 1), two full sweeps.
    Greedy,
}

#[derive(Debug, Clone)]
pub struct BicResult {
    pub ranks: Vec<usize>,
    pub score: f64,
    /// ‖𝒴 - X̂(r)‖_F², already floored to 0 for perfect fits.
    pub residual_sq: f64,
    pub param_count: usize,
    /// Every evaluated candidate exactly once, in evaluation order.
    pub search_log: Vec<(Vec<usize>, f64)>,
}

fn penalty_weights(dims: &[usize]) -> (f64, f64) {
    let n: f64 = dims.iter().map(|&p| p as f64).product();
    let log_sum: f64 = dims.iter().map(|&p| (p as f64).ln()).sum();
    (n, log_sum)
}

fn param_count(dims: &[usize], ranks: &[usize]) -> usize {
    let d = dims.len();
    let mut count = dims[0] * ranks[0] + dims[d - 1] * ranks[d - 2];
    for k in 2..d {
        count += ranks[k - 2] * dims[k - 1] * ranks[k - 1];
    }
    count
}

/// Both chains must admit orthonormal factors: r_k ≤ r_{k-1} p_k and
/// r_k ≤ r_{k+1} p_{k+1} with r_0 = r_d = 1.
fn is_feasible(dims: &[usize], ranks: &[usize]) -> bool {
    let d = dims.len();
    let mut prev = 1usize;
    for k in 1..d {
        if ranks[k - 1] < 1 || ranks[k - 1] > prev * dims[k - 1] {
            return false;
        }
        prev = ranks[k - 1];
    }
    let mut next = 1usize;
    for k in (1..d).rev() {
        if ranks[k - 1] > next * dims[k] {
            return false;
        }
        next = ranks[k - 1];
    }
    true
}

fn evaluate(y: &DenseTensor, ranks: &[usize], config: &TtoiConfig) -> Result<(f64, f64, usize)> {
    let mut cfg = config.clone();
    cfg.materialize = false;
    let out = ttoi(y, ranks, &cfg)?;
    let y_norm_sq = out.state.y_norm_sq();
    let mut residual_sq = (y_norm_sq - out.state.iterate_norm_sq()).max(0.0);
    if residual_sq <= PERFECT_FIT_REL * y_norm_sq {
        residual_sq = 0.0;
    }
    let (n, log_sum) = penalty_weights(y.dims());
    let params = param_count(y.dims(), ranks);
    let score = n * residual_sq.max(RESIDUAL_FLOOR).ln() + params as f64 * log_sum;
    Ok((score, residual_sq, params))
}

/// Evaluate the BIC criterion at one rank tuple.
pub fn bic_score(y: &DenseTensor, ranks: &[usize], config: &TtoiConfig) -> Result<BicResult> {
    let d = y.order();
    if d < 2 || ranks.len() != d - 1 {
        return Err(Error::argument(format!(
            "need {} ranks for order {}, got {}",
            d.saturating_sub(1),
            d,
            ranks.len()
        )));
    }
    if !is_feasible(y.dims(), ranks) {
        return Err(Error::argument(format!(
            "ranks {:?} are infeasible for dims {:?}",
            ranks,
            y.dims()
        )));
    }
    let (score, residual_sq, params) = evaluate(y, ranks, config)?;
    Ok(BicResult {
        ranks: ranks.to_vec(),
        score,
        residual_sq,
        param_count: params,
        search_log: vec![(ranks.to_vec(), score)],
    })
}

/// (score, param_count, ranks) ordering: lower score first, ties toward
/// fewer parameters, then lexicographically smaller ranks.
fn better(
    a: &(f64, usize, Vec<usize>),
    b: &(f64, usize, Vec<usize>),
) -> bool {
    if a.0 != b.0 {
        return a.0 < b.0;
    }
    if a.1 != b.1 {
        return a.1 < b.1;
    }
    a.2 < b.2
}

struct SearchCtx<'a> {
    y: &'a DenseTensor,
    config: &'a TtoiConfig,
    cache: HashMap<Vec<usize>, (f64, f64, usize)>,
    log: Vec<(Vec<usize>, f64)>,
}

impl<'a> SearchCtx<'a> {
    fn eval(&mut self, ranks: &[usize]) -> Result<(f64, f64, usize)> {
        if let Some(hit) = self.cache.get(ranks) {
            return Ok(*hit);
        }
        let val = evaluate(self.y, ranks, self.config)?;
        self.cache.insert(ranks.to_vec(), val);
        self.log.push((ranks.to_vec(), val.0));
        Ok(val)
    }
}

/// Select TT-ranks minimizing the BIC over the box [1, r_max_k] per mode.
pub fn select_ranks(
    y: &DenseTensor,
    r_max: &[usize],
    strategy: SearchStrategy,
    config: &TtoiConfig,
) -> Result<BicResult> {
    let d = y.order();
    if d < 2 || r_max.len() != d - 1 {
        return Err(Error::argument(format!(
            "need {} rank bounds for order {}, got {}",
            d.saturating_sub(1),
            d,
            r_max.len()
        )));
    }
    if r_max.iter().any(|&r| r < 1) {
        return Err(Error::argument("rank bounds must all be >= 1"));
    }
    let box_size = r_max
        .iter()
        .try_fold(1usize, |acc, &r| acc.checked_mul(r))
        .ok_or_else(|| Error::argument("rank box size overflows"))?;
    let exhaustive = match strategy {
        SearchStrategy::Exhaustive => true,
        SearchStrategy::Greedy => false,
        SearchStrategy::Auto => box_size <= EXHAUSTIVE_LIMIT,
    };

    let mut ctx = SearchCtx {
        y,
        config,
        cache: HashMap::new(),
        log: Vec::new(),
    };
    let mut best: Option<(f64, usize, Vec<usize>)> = None;

    if exhaustive {
        // odometer over the box, last coordinate fastest: lexicographic order
        let mut ranks = vec![1usize; d - 1];
        loop {
            if is_feasible(y.dims(), &ranks) {
                let (score, _, params) = ctx.eval(&ranks)?;
                let cand = (score, params, ranks.clone());
                if best.as_ref().map_or(true, |b| better(&cand, b)) {
                    best = Some(cand);
                }
            }
            let mut k = d - 1;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                if ranks[k] < r_max[k] {
                    ranks[k] += 1;
                    for r in ranks.iter_mut().skip(k + 1) {
                        *r = 1;
                    }
                    break;
                }
                if k == 0 {
                    k = usize::MAX;
                    break;
                }
            }
            if k == usize::MAX {
                break;
            }
        }
    } else {
        let mut current = vec![1usize; d - 1];
        let (score, _, params) = ctx.eval(&current)?;
        best = Some((score, params, current.clone()));
        for _sweep in 0..2 {
            for k in 0..d - 1 {
                let mut coord_best: Option<(f64, usize, Vec<usize>)> = None;
                for r in 1..=r_max[k] {
                    let mut cand_ranks = current.clone();
                    cand_ranks[k] = r;
                    if !is_feasible(y.dims(), &cand_ranks) {
                        continue;
                    }
                    let (score, _, params) = ctx.eval(&cand_ranks)?;
                    let cand = (score, params, cand_ranks);
                    if coord_best.as_ref().map_or(true, |b| better(&cand, b)) {
                        coord_best = Some(cand);
                    }
                }
                if let Some(cb) = coord_best {
                    current = cb.2.clone();
                    if best.as_ref().map_or(true, |b| better(&cb, b)) {
                        best = Some(cb);
                    }
                }
            }
        }
    }

    let (score, _, ranks) = best.ok_or_else(|| {
        Error::argument("no feasible rank tuple in the search box")
    })?;
    let (_, residual_sq, params) = *ctx.cache.get(&ranks).expect("best candidate was evaluated");
    Ok(BicResult {
        ranks,
        score,
        residual_sq,
        param_count: params,
        search_log: ctx.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::tt::{contract, random_tt};

    fn add_noise(x: &DenseTensor, sigma: f64, rng: &mut SeededRng) -> DenseTensor {
        let data = x
            .data()
            .iter()
            .map(|&v| v + sigma * rng.standard_normal())
            .collect();
        DenseTensor::new(x.dims().to_vec(), data).unwrap()
    }

    fn fast_config() -> TtoiConfig {
        TtoiConfig {
            epsilon: None,
            t_max: 2,
            materialize: false,
        }
    }

    #[test]
    fn singleton_box() {
        let mut rng = SeededRng::new(60, 0);
        let x = contract(&random_tt(&[4, 4, 4], &[2, 2], &mut rng).unwrap()).unwrap();
        let res = select_ranks(&x, &[1, 1], SearchStrategy::Auto, &fast_config()).unwrap();
        assert_eq!(res.ranks, vec![1, 1]);
        assert_eq!(res.search_log.len(), 1);
    }

    #[test]
    fn noiseless_exact_rank_selected() {
        let mut rng = SeededRng::new(61, 0);
        let x = contract(&random_tt(&[6, 6, 6], &[2, 2], &mut rng).unwrap()).unwrap();
        let res = select_ranks(&x, &[4, 4], SearchStrategy::Auto, &fast_config()).unwrap();
        assert_eq!(res.ranks, vec![2, 2]);
        assert_eq!(res.residual_sq, 0.0);
    }

    #[test]
    fn param_count_formula() {
        let dims = [20usize, 20, 20, 20, 20];
        let ranks = [1usize, 1, 1, 1];
        assert_eq!(param_count(&dims, &ranks), 100);
        let ranks2 = [2usize, 3, 3, 2];
        assert_eq!(
            param_count(&dims, &ranks2),
            20 * 2 + 2 * 20 * 3 + 3 * 20 * 3 + 3 * 20 * 2 + 20 * 2
        );
    }

    #[test]
    fn penalty_monotone_at_equal_fit() {
        let mut rng = SeededRng::new(62, 0);
        let x = contract(&random_tt(&[8, 8], &[1], &mut rng).unwrap()).unwrap();
        let r1 = bic_score(&x, &[1], &fast_config()).unwrap();
        let r2 = bic_score(&x, &[2], &fast_config()).unwrap();
        assert!(r1.residual_sq == 0.0 && r2.residual_sq == 0.0);
        assert!(r1.score < r2.score);
    }

    #[test]
    fn score_recomputable_from_fields() {
        let mut rng = SeededRng::new(63, 0);
        let x = contract(&random_tt(&[5, 5, 5], &[2, 2], &mut rng).unwrap()).unwrap();
        let y = add_noise(&x, 0.5, &mut rng);
        let res = bic_score(&y, &[2, 2], &fast_config()).unwrap();
        let n: f64 = 125.0;
        let log_sum = 3.0 * (5.0f64).ln();
        let recomputed =
            n * res.residual_sq.max(1e-300).ln() + res.param_count as f64 * log_sum;
        assert_eq!(res.score, recomputed);
    }

    #[test]
    fn true_ranks_beat_overfit_on_noisy_instances() {
        let mut wins = 0;
        for rep in 0..20 {
            let mut rng = SeededRng::new(64, rep);
            let x = contract(&random_tt(&[12, 12, 12, 12], &[1, 1, 1], &mut rng).unwrap()).unwrap();
            let y = add_noise(&x, 1.0, &mut rng);
            let s1 = bic_score(&y, &[1, 1, 1], &fast_config()).unwrap();
            let s2 = bic_score(&y, &[2, 2, 2], &fast_config()).unwrap();
            if s1.score < s2.score {
                wins += 1;
            }
        }
        assert!(wins >= 18, "true ranks won only {} of 20", wins);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        let mut rng = SeededRng::new(65, 0);
        let x = contract(&random_tt(&[4, 4, 4], &[2, 2], &mut rng).unwrap()).unwrap();
        let y = add_noise(&x, 0.3, &mut rng);
        let res = select_ranks(&y, &[2, 2], SearchStrategy::Exhaustive, &fast_config()).unwrap();
        let mut brute: Option<(f64, usize, Vec<usize>)> = None;
        for r1 in 1..=2usize {
            for r2 in 1..=2usize {
                let b = bic_score(&y, &[r1, r2], &fast_config()).unwrap();
                let cand = (b.score, b.param_count, vec![r1, r2]);
                if brute.as_ref().map_or(true, |bb| better(&cand, bb)) {
                    brute = Some(cand);
                }
            }
        }
        assert_eq!(res.ranks, brute.unwrap().2);
        assert_eq!(res.search_log.len(), 4);
    }

    #[test]
    fn search_log_has_no_duplicates() {
        let mut rng = SeededRng::new(66, 0);
        let x = contract(&random_tt(&[5, 5, 5], &[2, 2], &mut rng).unwrap()).unwrap();
        let y = add_noise(&x, 0.3, &mut rng);
        for strategy in [SearchStrategy::Exhaustive, SearchStrategy::Greedy] {
            let res = select_ranks(&y, &[3, 3], strategy, &fast_config()).unwrap();
            let mut seen = std::collections::HashSet::new();
            for (ranks, _) in &res.search_log {
                assert!(seen.insert(ranks.clone()), "duplicate log entry {:?}", ranks);
            }
        }
    }

    #[test]
    fn greedy_finds_truth_on_easy_instance() {
        let mut rng = SeededRng::new(67, 0);
        let x = contract(&random_tt(&[8, 8, 8], &[2, 1], &mut rng).unwrap()).unwrap();
        let res = select_ranks(&x, &[4, 4], SearchStrategy::Greedy, &fast_config()).unwrap();
        assert_eq!(res.ranks, vec![2, 1]);
    }

    #[test]
    fn deterministic() {
        let mut rng = SeededRng::new(68, 0);
        let x = contract(&random_tt(&[5, 5, 5], &[2, 2], &mut rng).unwrap()).unwrap();
        let y = add_noise(&x, 0.4, &mut rng);
        let a = select_ranks(&y, &[3, 3], SearchStrategy::Auto, &fast_config()).unwrap();
        let b = select_ranks(&y, &[3, 3], SearchStrategy::Auto, &fast_config()).unwrap();
        assert_eq!(a.ranks, b.ranks);
        assert_eq!(a.score.to_bits(), b.score.to_bits());
    }

    #[test]
    fn argument_errors() {
        let y = DenseTensor::zeros(&[3, 3, 3]).unwrap();
        assert!(select_ranks(&y, &[2], SearchStrategy::Auto, &fast_config()).is_err());
        assert!(select_ranks(&y, &[0, 2], SearchStrategy::Auto, &fast_config()).is_err());
        assert!(bic_score(&y, &[9, 1], &fast_config()).is_err());
    }
}
