//! Robust location and scale of an explicit density: median and
//! interquartile range.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pwfunc::{DomainKind, PiecewiseLinearDensity};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustMoments {
    /// Median.
    pub mu: f64,
    /// Interquartile range, after the degenerate-scale guard.
    pub sigma: f64,
    /// The guard replaced a vanishing interquartile range.
    pub guarded: bool,
}

/// Smallest admissible scale on ℝ, relative to the support width.
pub const REAL_SCALE_GUARD: f64 = 1e-6;

pub fn robust_location_scale<T: Scalar>(g: &PiecewiseLinearDensity<T>) -> Result<RobustMoments> {
    let mu = g.quantile(T::half())?.f64();
    let iqr = (g.quantile(T::lit(0.75))? - g.quantile(T::lit(0.25))?).f64();
    let (lo, hi) = g.support();
    let (sigma, guarded) = match g.domain() {
        DomainKind::Integer if iqr < 1.0 => (1.0, true),
        DomainKind::Real if iqr < 1e-12 => (REAL_SCALE_GUARD * (hi - lo).f64(), true),
        _ => (iqr, false),
    };
    Ok(RobustMoments { mu, sigma, guarded })
}
