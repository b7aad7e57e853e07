//! Forward-mode value-and-tangent arithmetic.
//!
//! A [`Tangent<D>`] carries a scalar together with its partial derivatives
//! with respect to the `D` model parameters. Building the particle filter out
//! of these values makes the state-derivative and weight-derivative
//! recursions fall out of ordinary arithmetic: every state carries
//! `dx/dθ` and every log-weight carries `d log w / dθ`.

use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of non-positive value {0}")]
    SqrtNonPositive(f64),
    #[error("non-positive variance {0}")]
    NonPositiveVariance(f64),
    #[error("parameter index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

/// A scalar with a dense tangent of width `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent<const D: usize> {
    pub value: f64,
    pub tangent: [f64; D],
}

impl<const D: usize> Tangent<D> {
    /// A constant: zero tangent.
    #[inline]
    pub const fn constant(value: f64) -> Self {
        Self { value, tangent: [0.0; D] }
    }

    #[inline]
    pub const fn new(value: f64, tangent: [f64; D]) -> Self {
        Self { value, tangent }
    }

    /// Seeds parameter `d`: value `value`, tangent `e_d`.
    pub fn param(value: f64, d: usize) -> Result<Self, DomainError> {
        if d >= D {
            return Err(DomainError::IndexOutOfRange { index: d, dim: D });
        }
        let mut tangent = [0.0; D];
        tangent[d] = 1.0;
        Ok(Self { value, tangent })
    }

    /// Lifts a whole parameter vector, one unit tangent per component.
    pub fn lift_all(theta: &[f64; D]) -> [Self; D] {
        let mut out = [Self::constant(0.0); D];
        for (d, slot) in out.iter_mut().enumerate() {
            slot.value = theta[d];
            slot.tangent[d] = 1.0;
        }
        out
    }

    #[inline]
    fn map_tangent(self, scale: f64) -> [f64; D] {
        let mut t = self.tangent;
        for v in &mut t {
            *v *= scale;
        }
        t
    }

    #[inline]
    pub fn scale(self, c: f64) -> Self {
        Self { value: self.value * c, tangent: self.map_tangent(c) }
    }

    pub fn recip(self) -> Result<Self, DomainError> {
        if self.value == 0.0 {
            return Err(DomainError::DivisionByZero);
        }
        let r = 1.0 / self.value;
        Ok(Self { value: r, tangent: self.map_tangent(-r * r) })
    }

    pub fn try_div(self, rhs: Self) -> Result<Self, DomainError> {
        if rhs.value == 0.0 {
            return Err(DomainError::DivisionByZero);
        }
        let q = self.value / rhs.value;
        let mut tangent = [0.0; D];
        for (d, t) in tangent.iter_mut().enumerate() {
            *t = (self.tangent[d] - q * rhs.tangent[d]) / rhs.value;
        }
        Ok(Self { value: q, tangent })
    }

    #[inline]
    pub fn exp(self) -> Self {
        let e = math::exp(self.value);
        Self { value: e, tangent: self.map_tangent(e) }
    }

    pub fn ln(self) -> Result<Self, DomainError> {
        if !(self.value > 0.0) {
            return Err(DomainError::LogNonPositive(self.value));
        }
        Ok(Self { value: math::ln(self.value), tangent: self.map_tangent(1.0 / self.value) })
    }

    /// Square root; zero is rejected because its tangent is unbounded.
    pub fn sqrt(self) -> Result<Self, DomainError> {
        if !(self.value > 0.0) {
            return Err(DomainError::SqrtNonPositive(self.value));
        }
        let s = math::sqrt(self.value);
        Ok(Self { value: s, tangent: self.map_tangent(0.5 / s) })
    }

    /// `max(self, floor)` where the clamped branch is a constant.
    pub fn clamp_below(self, floor: f64) -> Self {
        if self.value < floor {
            Self::constant(floor)
        } else {
            self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.tangent.iter().all(|t| t.is_finite())
    }
}

impl<const D: usize> Add for Tangent<D> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const D: usize> AddAssign for Tangent<D> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.value += rhs.value;
        for (a, b) in self.tangent.iter_mut().zip(rhs.tangent) {
            *a += b;
        }
    }
}

impl<const D: usize> Sub for Tangent<D> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const D: usize> SubAssign for Tangent<D> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.value -= rhs.value;
        for (a, b) in self.tangent.iter_mut().zip(rhs.tangent) {
            *a -= b;
        }
    }
}

impl<const D: usize> Mul for Tangent<D> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut tangent = [0.0; D];
        for (d, t) in tangent.iter_mut().enumerate() {
            *t = self.tangent[d] * rhs.value + self.value * rhs.tangent[d];
        }
        Self { value: self.value * rhs.value, tangent }
    }
}

impl<const D: usize> Neg for Tangent<D> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const D: usize> Add<f64> for Tangent<D> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.value += rhs;
        self
    }
}

impl<const D: usize> Sub<f64> for Tangent<D> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.value -= rhs;
        self
    }
}

impl<const D: usize> Mul<f64> for Tangent<D> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

/// `log N(y; mean, var)` with the tangent assembled from the two partials
/// `∂/∂mean = (y − mean)/var` and `∂/∂var = −1/(2 var) + (y − mean)²/(2 var²)`.
pub fn gaussian_logpdf<const D: usize>(y: f64, mean: Tangent<D>, var: Tangent<D>) -> Result<Tangent<D>, DomainError> {
    if !(var.value > 0.0) {
        return Err(DomainError::NonPositiveVariance(var.value));
    }
    let r = y - mean.value;
    let inv = 1.0 / var.value;
    let value = -0.5 * (math::LN_2PI + math::ln(var.value)) - 0.5 * r * r * inv;
    let d_mean = r * inv;
    let d_var = -0.5 * inv + 0.5 * r * r * inv * inv;
    let mut tangent = [0.0; D];
    for (d, t) in tangent.iter_mut().enumerate() {
        *t = d_mean * mean.tangent[d] + d_var * var.tangent[d];
    }
    Ok(Tangent { value, tangent })
}

/// Tangent-aware `log Σ exp(x_j)`. The tangent is the softmax-weighted
/// mixture `Σ w̃_j dx_j`, which is how a log-weight normalizer (and hence a
/// per-step log-likelihood increment) differentiates.
///
/// Returns `-inf` with a zero tangent when every entry is `-inf`.
pub fn log_sum_exp<const D: usize>(xs: &[Tangent<D>]) -> Tangent<D> {
    let m = xs.iter().map(|x| x.value).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Tangent::constant(f64::NEG_INFINITY);
    }
    let mut sum = 0.0;
    let mut acc = [0.0; D];
    for x in xs {
        let e = math::exp(x.value - m);
        sum += e;
        for (a, t) in acc.iter_mut().zip(x.tangent) {
            *a += e * t;
        }
    }
    for a in &mut acc {
        *a /= sum;
    }
    Tangent { value: m + math::ln(sum), tangent: acc }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn seeding() {
        let t = Tangent::<3>::param(0.75, 0).unwrap();
        assert_eq!(t.value, 0.75);
        assert_eq!(t.tangent, [1.0, 0.0, 0.0]);
        let t = Tangent::<2>::param(0.3, 1).unwrap();
        assert_eq!(t.tangent, [0.0, 1.0]);
        assert_eq!(Tangent::<3>::constant(5.0).tangent, [0.0; 3]);
        assert!(matches!(Tangent::<2>::param(1.0, 2), Err(DomainError::IndexOutOfRange { index: 2, dim: 2 })));
    }

    #[test]
    fn elementary_rules() {
        let a = Tangent::new(2.0, [1.0, 0.0]);
        let b = Tangent::new(3.0, [0.0, 1.0]);
        assert_eq!(a * b, Tangent::new(6.0, [3.0, 2.0]));
        let l = Tangent::new(1.0, [5.0, 0.0]).ln().unwrap();
        assert_eq!(l, Tangent::new(0.0, [5.0, 0.0]));

        // √x at 4: analytic 1/(2√4) = 0.25, checked against a central difference
        let s = Tangent::new(4.0, [1.0, 0.0]).sqrt().unwrap();
        let h = 1e-6;
        let fd = ((4.0f64 + h).sqrt() - (4.0f64 - h).sqrt()) / (2.0 * h);
        assert_eq!(s.value, 2.0);
        assert!((s.tangent[0] - fd).abs() < 1e-9);
        assert!((s.tangent[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let z = Tangent::<1>::constant(0.0);
        assert_eq!(Tangent::<1>::constant(1.0).try_div(z), Err(DomainError::DivisionByZero));
        assert!(matches!(z.ln(), Err(DomainError::LogNonPositive(_))));
        assert!(matches!(z.sqrt(), Err(DomainError::SqrtNonPositive(_))));
        assert!(matches!(Tangent::<1>::constant(-1.0).sqrt(), Err(DomainError::SqrtNonPositive(_))));
        assert!(matches!(gaussian_logpdf(0.0, z, Tangent::constant(0.0)), Err(DomainError::NonPositiveVariance(_))));
    }

    #[test]
    fn gaussian_logpdf_partials() {
        let v = gaussian_logpdf::<2>(0.0, Tangent::constant(0.0), Tangent::constant(1.0)).unwrap();
        assert!((v.value + 0.5 * (2.0 * core::f64::consts::PI).ln()).abs() < 1e-15);
        assert_eq!(v.tangent, [0.0, 0.0]);

        let g = gaussian_logpdf(1.0, Tangent::new(0.0, [1.0, 0.0]), Tangent::constant(1.0)).unwrap();
        assert_eq!(g.tangent[0], 1.0);
        let h = 1e-6;
        let fd = (math::normal_logpdf(1.0, h, 1.0) - math::normal_logpdf(1.0, -h, 1.0)) / (2.0 * h);
        assert!((fd - 1.0).abs() < 1e-8);

        let g = gaussian_logpdf(1.0, Tangent::constant(0.0), Tangent::new(1.0, [0.0, 1.0])).unwrap();
        assert!(g.tangent[1].abs() < 1e-15);
        let fd = (math::normal_logpdf(1.0, 0.0, 1.0 + h) - math::normal_logpdf(1.0, 0.0, 1.0 - h)) / (2.0 * h);
        assert!(fd.abs() < 1e-8);
    }

    /// A composite exercising every op, written once over tangents and once
    /// over plain floats so the latter can be finite-differenced.
    fn composite_t(x: [Tangent<3>; 3], c: f64) -> Tangent<3> {
        let a = x[0] * x[1] + x[2].exp() * c;
        let b = (x[1] * x[1] + 1.0).sqrt().unwrap();
        let q = a.try_div(b).unwrap();
        let l = (x[2] * x[2] + 0.5).ln().unwrap();
        let g = gaussian_logpdf(c, q, b * b).unwrap();
        q - l + g - x[0].recip().unwrap() * 0.25
    }

    fn composite_f(x: [f64; 3], c: f64) -> f64 {
        let a = x[0] * x[1] + x[2].exp() * c;
        let b = (x[1] * x[1] + 1.0).sqrt();
        let q = a / b;
        let l = (x[2] * x[2] + 0.5).ln();
        let g = math::normal_logpdf(c, q, b * b);
        q - l + g - 0.25 / x[0]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn composite_matches_central_differences(
            x0 in 0.5f64..2.0, x1 in -2.0f64..2.0, x2 in -1.0f64..1.0, c in -1.0f64..1.0
        ) {
            let x = [x0, x1, x2];
            let t = composite_t(Tangent::lift_all(&x), c);
            let h = 1e-5;
            for d in 0..3 {
                let mut p = x;
                let mut m = x;
                p[d] += h;
                m[d] -= h;
                let fd = (composite_f(p, c) - composite_f(m, c)) / (2.0 * h);
                let rel = (t.tangent[d] - fd).abs() / fd.abs().max(1e-3);
                prop_assert!(rel < 1e-4, "d={} ad={} fd={}", d, t.tangent[d], fd);
            }
            prop_assert!(close(t.value, composite_f(x, c), 1e-12));
        }

        #[test]
        fn constants_stay_constant(a in -3.0f64..3.0, b in 0.1f64..3.0, y in -2.0f64..2.0) {
            let ca = Tangent::<2>::constant(a);
            let cb = Tangent::<2>::constant(b);
            let r = gaussian_logpdf(y, ca * cb + ca.exp(), cb.sqrt().unwrap()).unwrap();
            let r = r + cb.ln().unwrap() - ca.try_div(cb).unwrap();
            prop_assert_eq!(r.tangent, [0.0, 0.0]);
        }

        #[test]
        fn linear_combinations(x0 in -2.0f64..2.0, x1 in 0.1f64..2.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let x = Tangent::<2>::lift_all(&[x0, x1]);
            let f = x[0] * x[1];
            let g = x[1].ln().unwrap();
            let lin = f * a + g * b;
            for d in 0..2 {
                prop_assert_eq!(lin.tangent[d], f.tangent[d] * a + g.tangent[d] * b);
            }
        }
    }
}
