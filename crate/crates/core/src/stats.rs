//! Standard normal density and distribution function.

use core::f64::consts::{PI, SQRT_2};

/// Density of the standard normal at `z`.
pub fn normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * PI)
}

/// Cumulative distribution function of the standard normal at `z`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / SQRT_2))
}
