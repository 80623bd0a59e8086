use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::segment::{Segment, Shape};
use super::{Density, DomainKind, Piecewise};

/// Piecewise linear density, possibly discontinuous at its breakpoints.
///
/// Cell `i` is `[x_i, x_{i+1})`; on ℤ it holds the integers
/// `x_i, …, x_{i+1} - 1`. At a breakpoint the right piece wins.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearDensity<T> {
    domain: DomainKind,
    breakpoints: Vec<T>,
    /// `(slope, intercept)` per cell, in global coordinates.
    pieces: Vec<(T, T)>,
    total_mass: T,
}

impl<T: Scalar> PiecewiseLinearDensity<T> {
    /// Validates and caches the total mass. Values below zero at a cell end
    /// (beyond rounding noise) are rejected.
    pub fn new(domain: DomainKind, breakpoints: Vec<T>, pieces: Vec<(T, T)>) -> Result<Self> {
        if pieces.is_empty() || breakpoints.len() != pieces.len() + 1 {
            return Err(Error::InvalidDensity(format!(
                "{} breakpoints for {} pieces",
                breakpoints.len(),
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) || pieces.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidDensity("non-finite coefficient".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDensity("breakpoints not strictly increasing".into()));
        }
        if domain.is_integer() && breakpoints.iter().any(|x| x.fract() != T::zero()) {
            return Err(Error::InvalidDensity("non-integer breakpoint on ℤ".into()));
        }
        let mut out = Self { domain, breakpoints, pieces, total_mass: T::zero() };
        let scale = out
            .segments()
            .iter()
            .flat_map(|s| [s.shape.value(T::zero()).abs(), out.last_value(s).abs()])
            .fold(T::zero(), T::max);
        let slack = T::lit(1e-12) * scale.max(T::one());
        for s in out.segments() {
            if s.shape.value(T::zero()) < -slack || out.last_value(&s) < -slack {
                return Err(Error::InvalidDensity(format!("negative value on cell starting at {}", s.lo)));
            }
        }
        out.total_mass = Piecewise::total_mass(&out);
        Ok(out)
    }

    fn last_value(&self, s: &Segment<T>) -> T {
        let w = match self.domain {
            DomainKind::Real => s.hi - s.lo,
            DomainKind::Integer => s.hi - s.lo - T::one(),
        };
        s.shape.value(w)
    }

    /// Scales to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.total_mass;
        if !(m > T::zero()) {
            return Err(Error::InvalidDensity("zero total mass".into()));
        }
        for p in &mut self.pieces {
            p.0 = p.0 / m;
            p.1 = p.1 / m;
        }
        self.total_mass = Piecewise::total_mass(&self);
        Ok(self)
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[(T, T)] {
        &self.pieces
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    /// Smallest and largest point of the support.
    pub fn support(&self) -> (T, T) {
        let lo = self.breakpoints[0];
        let hi = *self.breakpoints.last().expect("non-empty");
        match self.domain {
            DomainKind::Real => (lo, hi),
            DomainKind::Integer => (lo, hi - T::one()),
        }
    }

    fn cell_of(&self, x: T) -> Option<usize> {
        let bp = &self.breakpoints;
        if x < bp[0] || x >= bp[bp.len() - 1] {
            // The right end of the support belongs to the last cell on ℝ.
            if self.domain == DomainKind::Real && x == bp[bp.len() - 1] {
                return Some(self.pieces.len() - 1);
            }
            return None;
        }
        Some(bp.partition_point(|b| *b <= x) - 1)
    }

    pub fn eval(&self, x: T) -> T {
        if self.domain.is_integer() && x.fract() != T::zero() {
            return T::zero();
        }
        match self.cell_of(x) {
            Some(i) => {
                let (a, b) = self.pieces[i];
                (a * x + b).max(T::zero())
            }
            None => T::zero(),
        }
    }

    /// Least `x` with `CDF(x) >= p`.
    pub fn quantile(&self, p: T) -> Result<T> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidProbability(p.f64()));
        }
        let target = p * self.total_mass;
        let slack = T::lit(1e-12) * self.total_mass;
        let domain = self.domain;
        let segs = self.segments();
        let mut acc = T::zero();
        for s in &segs {
            let w = s.hi - s.lo;
            let m = s.shape.mass(domain, w);
            if acc + m < target - slack || m <= T::zero() {
                acc = acc + m;
                continue;
            }
            let rem = (target - acc).max(T::zero());
            let Shape::Linear { v0, slope } = s.shape else { unreachable!("linear density") };
            return Ok(match domain {
                DomainKind::Real => s.lo + invert_linear_mass(v0, slope, rem).min(w),
                DomainKind::Integer => {
                    // Partial sums are increasing in the point count.
                    let (mut lo, mut hi) = (0i64, crate::scalar::to_i64(w) - 1);
                    while lo < hi {
                        let mid = lo + (hi - lo) / 2;
                        let cnt = T::of_i64(mid + 1);
                        let partial = s.shape.mass(domain, cnt);
                        if partial >= rem - slack {
                            hi = mid;
                        } else {
                            lo = mid + 1;
                        }
                    }
                    s.lo + T::of_i64(lo)
                }
            });
        }
        Ok(self.support().1)
    }
}

/// Smallest `t >= 0` with `v0 t + slope t^2 / 2 = rem`.
fn invert_linear_mass<T: Scalar>(v0: T, slope: T, rem: T) -> T {
    let disc = (v0 * v0 + T::two() * slope * rem).max(T::zero());
    let denom = v0 + disc.sqrt();
    if denom > T::zero() {
        T::two() * rem / denom
    } else {
        T::zero()
    }
}

impl<T: Scalar> Density<T> for PiecewiseLinearDensity<T> {
    fn domain(&self) -> DomainKind {
        self.domain
    }

    fn pdf(&self, x: T) -> T {
        self.eval(x)
    }
}

impl<T: Scalar> Piecewise<T> for PiecewiseLinearDensity<T> {
    fn segments(&self) -> Vec<Segment<T>> {
        self.breakpoints
            .windows(2)
            .zip(&self.pieces)
            .map(|(w, &(a, b))| Segment { lo: w[0], hi: w[1], shape: Shape::Linear { v0: a * w[0] + b, slope: a } })
            .collect()
    }
}
