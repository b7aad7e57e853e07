//! Benchmark models.

pub mod kalman;
pub mod lgssm;
pub mod sir;

pub use kalman::kalman_loglik;
pub use lgssm::Lgssm;
pub use sir::{Sir, SirState};
