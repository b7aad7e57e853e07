//! Linear-Gaussian state-space model.
//!
//! `x_t = μ x_{t-1} + φ w_t`, `y_t = x_t + σ v_t`, with `x_0 = 0` and
//! θ = (μ, φ, σ) under uniform priors on (−1, 1) × (0, 5) × (0, 5).

use alloc::vec::Vec;

use rand::Rng;

use crate::rng::standard_normal;
use crate::ssm::{BoxPrior, ParamVector, StateProposal, StateSpaceModel};
use crate::tangent::{gaussian_logpdf, DomainError, Tangent};

pub const MU: usize = 0;
pub const PHI: usize = 1;
pub const SIGMA: usize = 2;

/// True parameters used for the benchmark data.
pub const TRUE_THETA: [f64; 3] = [0.75, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lgssm {
    prior: BoxPrior<3>,
    proposal: StateProposal,
}

impl Default for Lgssm {
    fn default() -> Self {
        Self::new(StateProposal::Optimal)
    }
}

impl Lgssm {
    pub fn new(proposal: StateProposal) -> Self {
        Self { prior: BoxPrior::new([-1.0, 0.0, 0.0], [1.0, 5.0, 5.0]), proposal }
    }
}

fn variances(theta: &[Tangent<3>; 3]) -> Result<(Tangent<3>, Tangent<3>), DomainError> {
    let (phi, sigma) = (theta[PHI], theta[SIGMA]);
    if !(phi.value > 0.0) {
        return Err(DomainError::NonPositiveVariance(phi.value));
    }
    if !(sigma.value > 0.0) {
        return Err(DomainError::NonPositiveVariance(sigma.value));
    }
    Ok((phi * phi, sigma * sigma))
}

/// Draw from `N(ρ²[σ⁻² y + φ⁻² μ x_prev], ρ²)` with `ρ⁻² = φ⁻² + σ⁻²`.
pub fn lgssm_optimal_proposal(x_prev: Tangent<3>, theta: &[Tangent<3>; 3], y: f64, eps: f64) -> Result<Tangent<3>, DomainError> {
    let (phi2, sigma2) = variances(theta)?;
    let inv_phi2 = phi2.recip()?;
    let inv_sigma2 = sigma2.recip()?;
    let rho2 = (inv_phi2 + inv_sigma2).recip()?;
    let mean = rho2 * (inv_sigma2 * y + inv_phi2 * theta[MU] * x_prev);
    Ok(mean + rho2.sqrt()? * eps)
}

/// Log incremental weight of the optimal proposal, the predictive density
/// `log N(y_t; μ x_{t-1}, φ² + σ²)`.
pub fn lgssm_weight_increment(x_prev: Tangent<3>, theta: &[Tangent<3>; 3], y: f64) -> Result<Tangent<3>, DomainError> {
    let (phi2, sigma2) = variances(theta)?;
    gaussian_logpdf(y, theta[MU] * x_prev, phi2 + sigma2)
}

impl StateSpaceModel<3> for Lgssm {
    type State = Tangent<3>;
    const NOISE_DIM: usize = 1;

    fn prior(&self) -> &BoxPrior<3> {
        &self.prior
    }

    fn state_proposal(&self) -> StateProposal {
        self.proposal
    }

    fn initial_state(&self, _: &[Tangent<3>; 3]) -> Tangent<3> {
        Tangent::constant(0.0)
    }

    fn propose_state(&self, prev: &Tangent<3>, theta: &[Tangent<3>; 3], y: f64, noise: &[f64]) -> Result<Tangent<3>, DomainError> {
        match self.proposal {
            StateProposal::Optimal => lgssm_optimal_proposal(*prev, theta, y, noise[0]),
            StateProposal::Transition => {
                variances(theta)?;
                Ok(theta[MU] * *prev + theta[PHI] * noise[0])
            }
        }
    }

    fn log_incremental_weight(
        &self,
        current: &Tangent<3>,
        prev: &Tangent<3>,
        theta: &[Tangent<3>; 3],
        y: f64,
    ) -> Result<Tangent<3>, DomainError> {
        match self.proposal {
            StateProposal::Optimal => lgssm_weight_increment(*prev, theta, y),
            StateProposal::Transition => {
                let (_, sigma2) = variances(theta)?;
                gaussian_logpdf(y, *current, sigma2)
            }
        }
    }

    fn simulate<R: Rng + ?Sized>(&self, theta: &ParamVector<3>, t: usize, rng: &mut R) -> Vec<f64> {
        let mut x = 0.0;
        (0..t)
            .map(|_| {
                x = theta[MU] * x + theta[PHI] * standard_normal(rng);
                x + theta[SIGMA] * standard_normal(rng)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    fn lift(t: [f64; 3]) -> [Tangent<3>; 3] {
        Tangent::lift_all(&t)
    }

    #[test]
    fn unit_noise_proposal_mean() {
        // φ = σ = 1 → ρ² = ½ and the mean is (y + μ x_prev)/2.
        let th = lift([0.6, 1.0, 1.0]);
        let x = lgssm_optimal_proposal(Tangent::constant(2.0), &th, 1.0, 0.0).unwrap();
        assert!((x.value - (1.0 + 0.6 * 2.0) / 2.0).abs() < 1e-15);
        let x1 = lgssm_optimal_proposal(Tangent::constant(2.0), &th, 1.0, 1.0).unwrap();
        assert!((x1.value - x.value - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diffuse_observation_recovers_transition_mean() {
        let th = lift([0.6, 1.0, 1e6]);
        let x = lgssm_optimal_proposal(Tangent::constant(2.0), &th, 50.0, 0.0).unwrap();
        assert!((x.value - 1.2).abs() < 1e-9);
    }

    #[test]
    fn constant_theta_gives_zero_tangent() {
        let th = [Tangent::constant(0.6), Tangent::constant(1.3), Tangent::constant(0.7)];
        let x = lgssm_optimal_proposal(Tangent::constant(0.4), &th, 1.0, 0.3).unwrap();
        let w = lgssm_weight_increment(Tangent::constant(0.4), &th, 1.0).unwrap();
        assert_eq!(x.tangent, [0.0; 3]);
        assert_eq!(w.tangent, [0.0; 3]);
    }

    #[test]
    fn weight_at_mode() {
        let th = lift([0.5, 1.0, 2.0]);
        let w = lgssm_weight_increment(Tangent::constant(2.0), &th, 1.0).unwrap();
        assert!((w.value + 0.5 * (2.0 * core::f64::consts::PI * 5.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn proposal_and_weight_match_finite_differences() {
        let base = [0.6, 1.3, 0.7];
        let (x_prev, y, eps) = (0.4, 1.1, -0.8);
        let f = |t: [f64; 3]| {
            let th = [Tangent::constant(t[0]), Tangent::constant(t[1]), Tangent::constant(t[2])];
            let x = lgssm_optimal_proposal(Tangent::constant(x_prev), &th, y, eps).unwrap().value;
            let w = math::normal_logpdf(y, t[0] * x_prev, t[1] * t[1] + t[2] * t[2]);
            (x, w)
        };
        let th = lift(base);
        let x = lgssm_optimal_proposal(Tangent::constant(x_prev), &th, y, eps).unwrap();
        let w = lgssm_weight_increment(Tangent::constant(x_prev), &th, y).unwrap();
        let h = 1e-6;
        for d in 0..3 {
            let (mut p, mut m) = (base, base);
            p[d] += h;
            m[d] -= h;
            let (xp, wp) = f(p);
            let (xm, wm) = f(m);
            assert!((x.tangent[d] - (xp - xm) / (2.0 * h)).abs() < 1e-7);
            assert!((w.tangent[d] - (wp - wm) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_nonpositive_noise() {
        let th = lift([0.5, 0.0, 1.0]);
        assert!(lgssm_optimal_proposal(Tangent::constant(0.0), &th, 0.0, 0.0).is_err());
        assert!(lgssm_weight_increment(Tangent::constant(0.0), &lift([0.5, 1.0, -1.0]), 0.0).is_err());
    }
}
