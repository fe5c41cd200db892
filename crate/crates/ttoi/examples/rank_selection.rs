//! Select TT-ranks by BIC: exhaustive search over a small rank box and
//! greedy coordinate descent on a larger one.
//!
//! Run with `cargo run --release --example rank_selection`.

use ttoi::rankselect::{select_ranks, SearchStrategy};
use ttoi::simlab::{generate_spiked, NoiseFamily, SpikedModelConfig};
use ttoi::tt::TtoiConfig;

fn main() -> ttoi::Result<()> {
    let config = SpikedModelConfig {
        dims: vec![20, 20, 20, 20],
        ranks: vec![2, 1, 2],
        noise: NoiseFamily::Gaussian { sigma: 2.0 },
        seed: 7,
        replications: 1,
    };
    let (_, y) = generate_spiked(&config, 0)?;
    let ttoi_cfg = TtoiConfig {
        epsilon: None,
        t_max: 2,
        materialize: false,
    };

    for strategy in [SearchStrategy::Exhaustive, SearchStrategy::Greedy] {
        let result = select_ranks(&y, &[3, 3, 3], strategy, &ttoi_cfg)?;
        println!(
            "{:?}: selected {:?} (true {:?}), BIC {:.3}, {} candidates evaluated",
            strategy,
            result.ranks,
            config.ranks,
            result.score,
            result.search_log.len()
        );
    }
    Ok(())
}
