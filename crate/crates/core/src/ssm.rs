//! State-space model abstraction used by the particle filter.

use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use rand::Rng;

use crate::math;
use crate::tangent::{DomainError, Tangent};

/// A point θ in parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamVector<const D: usize>(pub [f64; D]);

impl<const D: usize> ParamVector<D> {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// θ lifted into tangent space with unit seeds.
    pub fn lift(&self) -> [Tangent<D>; D] {
        Tangent::lift_all(&self.0)
    }

    pub fn lift_param(&self, d: usize) -> Result<Tangent<D>, DomainError> {
        match self.0.get(d) {
            Some(&v) => Tangent::param(v, d),
            None => Err(DomainError::IndexOutOfRange { index: d, dim: D }),
        }
    }
}

impl<const D: usize> Deref for ParamVector<D> {
    type Target = [f64; D];
    fn deref(&self) -> &[f64; D] {
        &self.0
    }
}

impl<const D: usize> DerefMut for ParamVector<D> {
    fn deref_mut(&mut self) -> &mut [f64; D] {
        &mut self.0
    }
}

/// Independent uniform priors on an open box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPrior<const D: usize> {
    pub lower: [f64; D],
    pub upper: [f64; D],
}

impl<const D: usize> BoxPrior<D> {
    /// Panics when any `lower_d >= upper_d`.
    pub fn new(lower: [f64; D], upper: [f64; D]) -> Self {
        for d in 0..D {
            assert!(lower[d] < upper[d], "empty prior interval in dimension {d}");
        }
        Self { lower, upper }
    }

    pub fn contains(&self, theta: &ParamVector<D>) -> bool {
        (0..D).all(|d| theta[d] > self.lower[d] && theta[d] < self.upper[d])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector<D> {
        let mut out = [0.0; D];
        for d in 0..D {
            // Resample the (probability-zero) endpoint so the point is interior.
            loop {
                let u: f64 = rng.random();
                let v = self.lower[d] + u * (self.upper[d] - self.lower[d]);
                if v > self.lower[d] && v < self.upper[d] {
                    out[d] = v;
                    break;
                }
            }
        }
        ParamVector(out)
    }

    /// `−Σ log(upper_d − lower_d)` inside the box, `−∞` outside.
    pub fn log_density(&self, theta: &ParamVector<D>) -> f64 {
        if !theta.is_finite() || !self.contains(theta) {
            return f64::NEG_INFINITY;
        }
        -(0..D).map(|d| math::ln(self.upper[d] - self.lower[d])).sum::<f64>()
    }

    /// The gradient of a flat density: zero everywhere, including the boundary.
    pub fn log_density_gradient(&self, _theta: &ParamVector<D>) -> [f64; D] {
        [0.0; D]
    }
}

/// How the filter proposes new states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateProposal {
    /// Locally optimal proposal `p(x_t | x_{t-1}, y_t)`.
    Optimal,
    /// The transition density, leaving only the likelihood in the weight.
    Transition,
}

/// Everything the particle filter needs from a model, in tangent arithmetic.
///
/// Implementations must be pure: the same inputs give bitwise identical
/// outputs, and constants (observations, noise) enter with zero tangent.
pub trait StateSpaceModel<const D: usize>: Sync {
    type State: Copy + core::fmt::Debug + Send + Sync;

    /// Standard normals consumed per particle per step.
    const NOISE_DIM: usize;

    fn prior(&self) -> &BoxPrior<D>;

    fn state_proposal(&self) -> StateProposal;

    fn initial_state(&self, theta: &[Tangent<D>; D]) -> Self::State;

    /// Reparameterized draw `x_t = μ(x_{t-1}, θ, y_t) + √C(x_{t-1}, θ, y_t) · ε`.
    fn propose_state(&self, prev: &Self::State, theta: &[Tangent<D>; D], y: f64, noise: &[f64]) -> Result<Self::State, DomainError>;

    /// Log of the incremental weight `g·f/q` (just `log g` when the transition
    /// is the proposal).
    fn log_incremental_weight(
        &self,
        current: &Self::State,
        prev: &Self::State,
        theta: &[Tangent<D>; D],
        y: f64,
    ) -> Result<Tangent<D>, DomainError>;

    /// Draws a synthetic observation sequence of length `t` under θ.
    fn simulate<R: Rng + ?Sized>(&self, theta: &ParamVector<D>, t: usize, rng: &mut R) -> Vec<f64>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn box_log_density() {
        let lg = BoxPrior::new([-1.0, 0.0, 0.0], [1.0, 5.0, 5.0]);
        let v = lg.log_density(&ParamVector([0.75, 1.0, 1.0]));
        assert!((v + 50f64.ln()).abs() < 1e-14);
        assert_eq!(lg.log_density(&ParamVector([1.5, 1.0, 1.0])), f64::NEG_INFINITY);
        assert_eq!(lg.log_density(&ParamVector([f64::NAN, 1.0, 1.0])), f64::NEG_INFINITY);

        let sir = BoxPrior::new([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(sir.log_density(&ParamVector([0.6, 0.3])), 0.0);
        assert_eq!(sir.log_density_gradient(&ParamVector([0.6, 0.3])), [0.0, 0.0]);
    }

    #[test]
    fn samples_are_interior() {
        let lg = BoxPrior::new([-1.0, 0.0, 0.0], [1.0, 5.0, 5.0]);
        let mut rng = stream(1, Purpose::Prior, 0, 0);
        for _ in 0..1000 {
            let s = lg.sample(&mut rng);
            assert!(lg.contains(&s));
        }
    }

    #[test]
    fn lift_param_bounds() {
        let p = ParamVector([0.75, 1.0, 1.0]);
        let t = p.lift_param(0).unwrap();
        assert_eq!((t.value, t.tangent), (0.75, [1.0, 0.0, 0.0]));
        assert!(p.lift_param(3).is_err());
    }

    #[test]
    #[should_panic]
    fn empty_interval_rejected() {
        BoxPrior::new([1.0], [1.0]);
    }
}
