//! Scalar helpers shared by the filter and the sampler.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `log N(x; mean, var)` on plain floats.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + ln(var)) - r * r / (2.0 * var)
}

/// Log-density of an isotropic Gaussian `N(0, var·I)` evaluated at `p`.
pub fn isotropic_logpdf(p: &[f64], var: f64) -> f64 {
    let sq: f64 = p.iter().map(|v| v * v).sum();
    -0.5 * p.len() as f64 * (LN_2PI + ln(var)) - sq / (2.0 * var)
}

/// Numerically stable `log Σ exp(x_i)`; `-inf` when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ln(xs.iter().map(|&x| exp(x - m)).sum::<f64>())
}

/// `1 / Σ w²` for normalized weights.
pub fn ess(normalized: &[f64]) -> f64 {
    1.0 / normalized.iter().map(|w| w * w).sum::<f64>()
}
