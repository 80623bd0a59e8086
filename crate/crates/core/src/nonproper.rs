//! Stage 1: a non-proper piecewise linear density learned from samples.
//!
//! Knots sit at empirical quantiles of equal mass. On every cell the line
//! matching the cell's empirical mass and first moment is fitted; when that
//! line would go negative it is replaced by the triangle with the same mass
//! that vanishes at the offending end.

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::pwfunc::{DomainKind, PiecewiseLinearDensity};
use crate::scalar::Scalar;

/// Right-continuous empirical CDF over a sorted copy of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { got: 0, need: 1 });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.sorted.len() as f64
    }

    fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&s| s <= x)
    }

    fn count_lt(&self, x: f64) -> usize {
        self.sorted.partition_point(|&s| s < x)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub eps: f64,
    /// Target piece count `t`.
    pub pieces: usize,
    /// Sample-size multiplier behind [`LearnerConfig::enough_samples`].
    pub c_n: f64,
}

impl LearnerConfig {
    /// `t = ceil(c_t / sqrt(eps))`.
    pub fn new(eps: f64, constants: &Constants) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidEpsilon(eps));
        }
        let pieces = (constants.c_t / eps.sqrt()).ceil().max(1.0) as usize;
        Ok(Self { eps, pieces, c_n: constants.c_n })
    }

    /// `n >= c_n t / eps^2`.
    pub fn enough_samples(&self, n: usize) -> bool {
        n as f64 >= self.c_n * self.pieces as f64 / (self.eps * self.eps)
    }
}

/// Anything that turns samples into a piecewise linear density.
pub trait PwlLearner<T: Scalar> {
    fn learn(&self, samples: &[f64], domain: DomainKind) -> Result<PiecewiseLinearDensity<T>>;
}

/// The equal-mass, moment-matching learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatching {
    pub config: LearnerConfig,
}

impl<T: Scalar> PwlLearner<T> for MomentMatching {
    fn learn(&self, samples: &[f64], domain: DomainKind) -> Result<PiecewiseLinearDensity<T>> {
        learn_pwl(samples, domain, &self.config)
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}

/// Fits the stage-1 density. Output has at most `config.pieces` pieces and
/// unit mass.
pub fn learn_pwl<T: Scalar>(
    samples: &[f64],
    domain: DomainKind,
    config: &LearnerConfig,
) -> Result<PiecewiseLinearDensity<T>> {
    let t = config.pieces.max(1);
    if samples.len() < 2 * t {
        return Err(Error::TooFewSamples { got: samples.len(), need: 2 * t });
    }
    if domain.is_integer() && samples.iter().any(|x| x.fract() != 0.0) {
        return Err(Error::InvalidParameter("non-integer sample on ℤ".into()));
    }
    let ecdf = EmpiricalCdf::new(samples)?;
    let xs = ecdf.sorted();
    let n = xs.len();
    let mut knots: Vec<f64> = (0..t).map(|j| xs[j * n / t]).collect();
    let last = xs[n - 1];
    match domain {
        DomainKind::Integer => knots.push(last + 1.0),
        DomainKind::Real => {
            knots.push(last);
            knots.dedup();
            if knots.len() == 1 {
                let d = 1e-9 * last.abs().max(1.0);
                knots = vec![last - d, last + d];
            }
        }
    }
    knots.dedup();

    // Prefix sums for cell moments.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &x in xs {
        prefix.push(prefix[prefix.len() - 1] + x);
    }
    let nf = n as f64;
    let cells = knots.len() - 1;
    let mut pieces = Vec::with_capacity(cells);
    for j in 0..cells {
        let (u, v) = (knots[j], knots[j + 1]);
        let i0 = ecdf.count_lt(u);
        let i1 = if j + 1 == cells && domain == DomainKind::Real { n } else { ecdf.count_lt(v) };
        let count = (i1 - i0) as f64;
        let p = count / nf;
        let mean = if i1 > i0 { (prefix[i1] - prefix[i0]) / count } else { 0.5 * (u + v) };
        pieces.push(match domain {
            DomainKind::Real => real_cell(u, v, p, mean),
            DomainKind::Integer => lattice_cell(u, v, p, mean),
        });
    }
    let bps = knots.iter().map(|&x| T::lit(x)).collect();
    let pieces = pieces.into_iter().map(|(a, b)| (T::lit(a), T::lit(b))).collect();
    PiecewiseLinearDensity::new(domain, bps, pieces)?.normalized()
}

/// `(slope, intercept)` of the line on `[u, v]` with mass `p` and mean `mean`.
fn real_cell(u: f64, v: f64, p: f64, mean: f64) -> (f64, f64) {
    let w = v - u;
    let c = 0.5 * (u + v);
    let off = mean - c;
    let avg = p / w;
    let slope = if off.abs() <= w / 6.0 { 12.0 * p * off / (w * w * w) } else { 2.0 * avg / w * off.signum() };
    (slope, avg - slope * c)
}

/// Same on the integers `u..v`, matching sums instead of integrals.
fn lattice_cell(u: f64, v: f64, p: f64, mean: f64) -> (f64, f64) {
    let m = v - u;
    let avg = p / m;
    if m < 2.0 {
        return (0.0, avg);
    }
    let c = u + 0.5 * (m - 1.0);
    let off = mean - c;
    let slope = if off.abs() <= (m + 1.0) / 6.0 {
        12.0 * p * off / (m * (m * m - 1.0))
    } else {
        2.0 * avg / (m - 1.0) * off.signum()
    };
    (slope, avg - slope * c)
}
