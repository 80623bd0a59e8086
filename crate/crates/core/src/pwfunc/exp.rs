use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::segment::{Segment, Shape};
use super::{check_log_concave, Density, DomainKind, IntegerCodedLevels, Piecewise};

/// Continuous piecewise exponential density on `[x_l, x_r]`.
///
/// The value at `x` is `exp(a(x)) / (scale * norm)` where `a` linearly
/// interpolates the log-levels between breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExpDensity<T> {
    domain: DomainKind,
    breakpoints: Vec<T>,
    log_levels: Vec<T>,
    codes: Option<IntegerCodedLevels>,
    scale: T,
    norm: T,
    grid_origin: T,
    cell_length: T,
    support_lo: usize,
}

impl<T: Scalar> PiecewiseExpDensity<T> {
    /// Builds the density from finite level codes on a uniform grid and
    /// normalizes it. `support_lo` is the grid index of the first code.
    pub fn from_grid_levels(
        domain: DomainKind,
        grid_origin: T,
        cell_length: T,
        support_lo: usize,
        codes: &[i64],
        level_step: f64,
        scale: T,
    ) -> Result<Self> {
        let coded = IntegerCodedLevels::new(codes.iter().copied().map(Some).collect(), level_step);
        if !check_log_concave(&coded) {
            return Err(Error::InvalidDensity("level codes are not concave".into()));
        }
        let breakpoints = (0..codes.len()).map(|j| grid_origin + T::of_usize(support_lo + j) * cell_length).collect();
        let log_levels = codes.iter().map(|&c| T::of_i64(c) * T::lit(level_step)).collect();
        let mut out = Self::assemble(domain, breakpoints, log_levels, scale)?;
        out.codes = Some(coded);
        out.grid_origin = grid_origin;
        out.cell_length = cell_length;
        out.support_lo = support_lo;
        Ok(out)
    }

    /// Builds the density from explicit breakpoints and real log-levels.
    /// Concavity of the slopes is checked with a relative tolerance of 1e-12.
    pub fn from_parts(domain: DomainKind, breakpoints: Vec<T>, log_levels: Vec<T>, scale: T) -> Result<Self> {
        let out = Self::assemble(domain, breakpoints, log_levels, scale)?;
        let slopes: Vec<T> = out
            .breakpoints
            .windows(2)
            .zip(out.log_levels.windows(2))
            .map(|(x, a)| (a[1] - a[0]) / (x[1] - x[0]))
            .collect();
        for w in slopes.windows(2) {
            let slack = T::lit(1e-12) * (T::one() + w[0].abs().max(w[1].abs()));
            if w[1] > w[0] + slack {
                return Err(Error::InvalidDensity("log-levels are not concave".into()));
            }
        }
        Ok(out)
    }

    /// Attaches integer codes read back from a file.
    pub fn with_codes(mut self, codes: IntegerCodedLevels) -> Result<Self> {
        if codes.len() != self.log_levels.len() || !check_log_concave(&codes) {
            return Err(Error::InvalidDensity("level codes do not match the levels".into()));
        }
        self.codes = Some(codes);
        Ok(self)
    }

    fn assemble(domain: DomainKind, breakpoints: Vec<T>, log_levels: Vec<T>, scale: T) -> Result<Self> {
        let min_len = if domain.is_integer() { 1 } else { 2 };
        if breakpoints.len() < min_len || breakpoints.len() != log_levels.len() {
            return Err(Error::InvalidDensity(format!(
                "{} breakpoints for {} levels",
                breakpoints.len(),
                log_levels.len()
            )));
        }
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::InvalidDensity("scale must be positive".into()));
        }
        if breakpoints.iter().chain(&log_levels).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity("non-finite breakpoint or level".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDensity("breakpoints not strictly increasing".into()));
        }
        if domain.is_integer() && breakpoints.iter().any(|x| x.fract() != T::zero()) {
            return Err(Error::InvalidDensity("non-integer breakpoint on ℤ".into()));
        }
        let cell_length = if breakpoints.len() > 1 { breakpoints[1] - breakpoints[0] } else { T::one() };
        let mut out = Self {
            domain,
            grid_origin: breakpoints[0],
            cell_length,
            support_lo: 0,
            breakpoints,
            log_levels,
            codes: None,
            scale,
            norm: T::one(),
        };
        let z = Piecewise::total_mass(&out);
        if !(z > T::zero() && z.is_finite()) {
            return Err(Error::InvalidDensity("cannot normalize".into()));
        }
        out.norm = z;
        Ok(out)
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn log_levels(&self) -> &[T] {
        &self.log_levels
    }

    pub fn codes(&self) -> Option<&IntegerCodedLevels> {
        self.codes.as_ref()
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Renormalization constant: mass of `exp(a(x)) / scale` before scaling.
    pub fn normalization(&self) -> T {
        self.norm
    }

    pub fn grid_origin(&self) -> T {
        self.grid_origin
    }

    pub fn cell_length(&self) -> T {
        self.cell_length
    }

    /// Grid indices `(l, r)` of the first and last support endpoints.
    pub fn support_indices(&self) -> (usize, usize) {
        (self.support_lo, self.support_lo + self.breakpoints.len() - 1)
    }

    pub fn support(&self) -> (T, T) {
        (self.breakpoints[0], *self.breakpoints.last().expect("non-empty"))
    }

    /// Exact check on the integer codes when present, otherwise on the real
    /// slopes.
    pub fn is_log_concave(&self) -> bool {
        match &self.codes {
            Some(c) => check_log_concave(c),
            None => {
                let s: Vec<T> = self
                    .breakpoints
                    .windows(2)
                    .zip(self.log_levels.windows(2))
                    .map(|(x, a)| (a[1] - a[0]) / (x[1] - x[0]))
                    .collect();
                s.windows(2).all(|w| w[1] <= w[0] + T::lit(1e-12) * (T::one() + w[0].abs()))
            }
        }
    }

    pub fn eval(&self, x: T) -> T {
        let (lo, hi) = self.support();
        if x < lo || x > hi || (self.domain.is_integer() && x.fract() != T::zero()) {
            return T::zero();
        }
        let bp = &self.breakpoints;
        let i = (bp.partition_point(|b| *b <= x) - 1).min(bp.len().saturating_sub(2));
        let a = if bp.len() == 1 {
            self.log_levels[0]
        } else {
            let t = (x - bp[i]) / (bp[i + 1] - bp[i]);
            self.log_levels[i] + (self.log_levels[i + 1] - self.log_levels[i]) * t
        };
        a.exp() / (self.scale * self.norm)
    }
}

impl<T: Scalar> Density<T> for PiecewiseExpDensity<T> {
    fn domain(&self) -> DomainKind {
        self.domain
    }

    fn pdf(&self, x: T) -> T {
        self.eval(x)
    }
}

impl<T: Scalar> Piecewise<T> for PiecewiseExpDensity<T> {
    fn segments(&self) -> Vec<Segment<T>> {
        let denom = self.scale * self.norm;
        let mut out: Vec<Segment<T>> = self
            .breakpoints
            .windows(2)
            .zip(self.log_levels.windows(2))
            .map(|(x, a)| Segment {
                lo: x[0],
                hi: x[1],
                shape: Shape::Exp { v0: a[0].exp() / denom, rate: (a[1] - a[0]) / (x[1] - x[0]) },
            })
            .collect();
        if self.domain.is_integer() {
            // The right endpoint is a lattice point of its own.
            let x = *self.breakpoints.last().expect("non-empty");
            let a = *self.log_levels.last().expect("non-empty");
            out.push(Segment { lo: x, hi: x + T::one(), shape: Shape::Exp { v0: a.exp() / denom, rate: T::zero() } });
        }
        out
    }
}
