//! Exact log-likelihood of the linear-Gaussian model by Kalman filtering.

use crate::math;
use crate::models::lgssm::{MU, PHI, SIGMA};
use crate::tangent::DomainError;

/// `log p(y_{1:T} | μ, φ, σ)` for `x_t = μ x_{t-1} + φ w`, `y_t = x_t + σ v`,
/// starting from the known state `x_0 = 0`.
pub fn kalman_loglik(theta: &[f64; 3], observations: &[f64]) -> Result<f64, DomainError> {
    let (mu, phi, sigma) = (theta[MU], theta[PHI], theta[SIGMA]);
    if !(phi > 0.0) {
        return Err(DomainError::NonPositiveVariance(phi));
    }
    if !(sigma > 0.0) {
        return Err(DomainError::NonPositiveVariance(sigma));
    }
    let (q, r) = (phi * phi, sigma * sigma);
    let (mut m, mut p) = (0.0, 0.0);
    let mut ll = 0.0;
    for &y in observations {
        m *= mu;
        p = mu * mu * p + q;
        let s = p + r;
        ll += math::normal_logpdf(y, m, s);
        let k = p / s;
        m += k * (y - m);
        p *= 1.0 - k;
    }
    Ok(ll)
}
