//! Estimate the transition tensor of a state-aggregatable second-order
//! Markov chain from a single trajectory: empirical frequencies versus the
//! TTOI estimator with simplex projection.
//!
//! Run with `cargo run --release --example markov_estimation`.

use ttoi::markov::{
    empirical_from_trajectory, estimate_transition, generate_aggregatable, sample_trajectory,
};
use ttoi::rng::SeededRng;
use ttoi::tt::tt_ranks_of;

fn main() -> ttoi::Result<()> {
    let (p, d) = (20usize, 3usize); // 20 states, order-2 chain
    let ranks = [1usize, 1];
    let mut rng = SeededRng::new(11, 0);
    let model = generate_aggregatable(p, d, &ranks, &mut rng)?;
    let probed = tt_ranks_of(model.transition(), 1e-10)?;
    println!("generated transition tensor with TT-ranks {:?}", probed.ranks);

    for length in [1_000usize, 10_000, 100_000] {
        let traj = sample_trajectory(&model, length, &mut rng)?;
        let emp = empirical_from_trajectory(&traj, d)?;
        let est = estimate_transition(&emp, &ranks, None)?;
        let e_emp = emp.sub(model.transition())?.frob_norm();
        let e_ttoi = est.model.transition().sub(model.transition())?.frob_norm();
        println!(
            "length {:>6}: empirical error {:.4}, TTOI error {:.4}",
            length, e_emp, e_ttoi
        );
    }
    Ok(())
}
