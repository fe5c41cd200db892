//! Tensor-train orthogonal iteration.
//!
//! Estimation of low tensor-train (TT) rank structure from noisy high-order
//! tensors: TT-SVD initialization, alternating backward/forward orthogonal
//! iteration refinement, BIC-based TT-rank selection, and an application
//! layer that estimates transition probability tensors of high-order Markov
//! chains from observed trajectories.

pub mod error;
pub mod io;
pub mod linalg;
pub mod markov;
pub mod rankselect;
pub mod rng;
pub mod simlab;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
