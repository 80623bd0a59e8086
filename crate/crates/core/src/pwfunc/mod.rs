//! Piecewise densities on ℝ and ℤ: representations, evaluation, masses,
//! distances, quantiles and exact log-concavity checks.

mod exp;
pub mod io;
mod levels;
mod linear;
pub mod segment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use exp::PiecewiseExpDensity;
pub use levels::{check_log_concave, IntegerCodedLevels};
pub use linear::PiecewiseLinearDensity;
pub use segment::{Segment, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Real,
    Integer,
}

impl DomainKind {
    pub fn is_integer(self) -> bool {
        self == DomainKind::Integer
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Real => "real",
            DomainKind::Integer => "integer",
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" | "r" => Ok(DomainKind::Real),
            "integer" | "int" | "z" => Ok(DomainKind::Integer),
            other => Err(Error::Parse(format!("unknown domain {other:?}"))),
        }
    }
}

/// Anything with a pointwise density (pdf on ℝ, pmf on ℤ).
pub trait Density<T: Scalar> {
    fn domain(&self) -> DomainKind;

    /// Density at `x`; zero outside the support and at non-integers on ℤ.
    fn pdf(&self, x: T) -> T;
}

/// A density made of finitely many linear or exponential segments.
pub trait Piecewise<T: Scalar>: Density<T> {
    /// Disjoint segments sorted left to right.
    fn segments(&self) -> Vec<Segment<T>>;

    /// Mass over `[u, v]`: integral on ℝ, sum over the integers of `[u, v]`
    /// on ℤ.
    fn mass(&self, u: T, v: T) -> T {
        if v < u {
            return T::zero();
        }
        let domain = self.domain();
        let (a, b) = match domain {
            DomainKind::Real => (u, v),
            DomainKind::Integer => (u.ceil(), v.floor() + T::one()),
        };
        self.segments().iter().map(|s| s.mass_within(domain, a, b)).sum()
    }

    fn total_mass(&self) -> T {
        let domain = self.domain();
        self.segments().iter().map(|s| s.shape.mass(domain, s.hi - s.lo)).sum()
    }

    /// `P(X <= x)`.
    fn cdf(&self, x: T) -> T {
        let domain = self.domain();
        let b = match domain {
            DomainKind::Real => x,
            DomainKind::Integer => x.floor() + T::one(),
        };
        let m: T = self.segments().iter().map(|s| s.mass_within(domain, s.lo, b)).sum();
        m.min(T::one()).max(T::zero())
    }
}

/// `||f - g||_1`, splitting at the union of breakpoints and at every
/// crossing inside the resulting cells.
pub fn l1_distance<T, F, G>(f: &F, g: &G) -> Result<T>
where
    T: Scalar,
    F: Piecewise<T> + ?Sized,
    G: Piecewise<T> + ?Sized,
{
    let domain = f.domain();
    if domain != g.domain() {
        return Err(Error::DomainMismatch);
    }
    let fs = f.segments();
    let gs = g.segments();
    let mut cuts: Vec<T> = fs.iter().chain(gs.iter()).flat_map(|s| [s.lo, s.hi]).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup();
    let (mut i, mut j) = (0, 0);
    let mut total = T::zero();
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        while i < fs.len() && fs[i].hi <= u {
            i += 1;
        }
        while j < gs.len() && gs[j].hi <= u {
            j += 1;
        }
        let local = |segs: &[Segment<T>], k: usize| -> Shape<T> {
            match segs.get(k) {
                Some(s) if s.lo <= u => s.shape.shifted(u - s.lo),
                _ => Shape::zero(),
            }
        };
        total = total + segment::shape_l1(domain, local(&fs, i), local(&gs, j), v - u);
    }
    Ok(total)
}

/// Total variation distance `||f - g||_1 / 2`.
pub fn tv_distance<T, F, G>(f: &F, g: &G) -> Result<T>
where
    T: Scalar,
    F: Piecewise<T> + ?Sized,
    G: Piecewise<T> + ?Sized,
{
    Ok((l1_distance(f, g)? * T::half()).min(T::one()))
}

/// Either representation, as read from a density file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyDensity<T> {
    Linear(PiecewiseLinearDensity<T>),
    Exp(PiecewiseExpDensity<T>),
}

impl<T: Scalar> Density<T> for AnyDensity<T> {
    fn domain(&self) -> DomainKind {
        match self {
            AnyDensity::Linear(d) => d.domain(),
            AnyDensity::Exp(d) => d.domain(),
        }
    }

    fn pdf(&self, x: T) -> T {
        match self {
            AnyDensity::Linear(d) => d.pdf(x),
            AnyDensity::Exp(d) => d.pdf(x),
        }
    }
}

impl<T: Scalar> Piecewise<T> for AnyDensity<T> {
    fn segments(&self) -> Vec<Segment<T>> {
        match self {
            AnyDensity::Linear(d) => d.segments(),
            AnyDensity::Exp(d) => d.segments(),
        }
    }
}

impl<T: Scalar> AnyDensity<T> {
    /// Smallest and largest point of the support.
    pub fn support(&self) -> (T, T) {
        match self {
            AnyDensity::Linear(d) => d.support(),
            AnyDensity::Exp(d) => d.support(),
        }
    }
}
