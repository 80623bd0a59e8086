//! Elementary pieces shared by both density representations: a linear or an
//! exponential function on one interval, anchored at its left end.
//!
//! On ℝ a segment covers `[lo, hi]`; on ℤ it covers the integers
//! `lo, lo + 1, …, hi - 1`.

use crate::interval_error::{lin_exp_l1, LinExpCell};
use crate::scalar::{expm1_over, Scalar};

use super::DomainKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape<T> {
    /// `v0 + slope * t`
    Linear { v0: T, slope: T },
    /// `v0 * exp(rate * t)`
    Exp { v0: T, rate: T },
}

impl<T: Scalar> Shape<T> {
    pub fn zero() -> Self {
        Shape::Linear { v0: T::zero(), slope: T::zero() }
    }

    #[inline]
    pub fn value(&self, t: T) -> T {
        match *self {
            Shape::Linear { v0, slope } => v0 + slope * t,
            Shape::Exp { v0, rate } => v0 * (rate * t).exp(),
        }
    }

    /// Re-anchors the shape `delta` to the right.
    pub fn shifted(&self, delta: T) -> Self {
        match *self {
            Shape::Linear { v0, slope } => Shape::Linear { v0: v0 + slope * delta, slope },
            Shape::Exp { v0, rate } => Shape::Exp { v0: v0 * (rate * delta).exp(), rate },
        }
    }

    /// Mass over local offsets `[0, w]` (ℝ) or points `0..w` (ℤ).
    pub fn mass(&self, domain: DomainKind, w: T) -> T {
        match (domain, *self) {
            (DomainKind::Real, Shape::Linear { v0, slope }) => w * (v0 + v0 + slope * w) * T::half(),
            (DomainKind::Real, Shape::Exp { v0, rate }) => v0 * w * expm1_over(rate * w),
            (DomainKind::Integer, Shape::Linear { v0, slope }) => w * v0 + slope * w * (w - T::one()) * T::half(),
            (DomainKind::Integer, Shape::Exp { v0, rate }) => v0 * geometric_sum(rate, w),
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            Shape::Linear { v0, slope } => v0 == T::zero() && slope == T::zero(),
            Shape::Exp { v0, .. } => v0 == T::zero(),
        }
    }
}

/// `sum_{j < n} exp(rate * j)`, switching to a first-order expansion when the
/// ratio is within 1e-9 of one.
#[inline]
pub(crate) fn geometric_sum<T: Scalar>(rate: T, n: T) -> T {
    let q = rate.exp_m1();
    if q.abs() < T::lit(1e-9) {
        n * (T::one() + rate * (n - T::one()) * T::half())
    } else {
        (rate * n).exp_m1() / q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub lo: T,
    pub hi: T,
    pub shape: Shape<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn value_at(&self, x: T) -> T {
        self.shape.value(x - self.lo)
    }

    /// Mass of the part of the segment inside `[u, v]` (ℝ) or `[u, v)` (ℤ,
    /// integral endpoints).
    pub fn mass_within(&self, domain: DomainKind, u: T, v: T) -> T {
        let a = u.max(self.lo);
        let b = v.min(self.hi);
        if b <= a {
            return T::zero();
        }
        self.shape.shifted(a - self.lo).mass(domain, b - a)
    }
}

/// `||a - b||_1` over local offsets `[0, w]` (ℝ) or points `0..w` (ℤ).
pub(crate) fn shape_l1<T: Scalar>(domain: DomainKind, a: Shape<T>, b: Shape<T>, w: T) -> T {
    if w <= T::zero() {
        return T::zero();
    }
    if b.is_zero() {
        return a.mass(domain, w).abs();
    }
    if a.is_zero() {
        return b.mass(domain, w).abs();
    }
    match (a, b) {
        (Shape::Linear { v0: a0, slope: sa }, Shape::Linear { v0: b0, slope: sb }) => {
            let (d0, ds) = (a0 - b0, sa - sb);
            let last = if domain == DomainKind::Real { w } else { w - T::one() };
            let d1 = d0 + ds * last;
            let root = if d0 * d1 < T::zero() { Some(-d0 / ds) } else { None };
            split_l1(domain, a, b, w, root)
        }
        (Shape::Exp { v0: a0, rate: ra }, Shape::Exp { v0: b0, rate: rb }) => {
            // a0 e^{ra t} = b0 e^{rb t} has at most one solution.
            let root = if ra != rb {
                let t = (b0 / a0).ln() / (ra - rb);
                if t > T::zero() && t < w {
                    Some(t)
                } else {
                    None
                }
            } else {
                None
            };
            split_l1(domain, a, b, w, root)
        }
        (Shape::Linear { v0, slope }, Shape::Exp { v0: h0, rate })
        | (Shape::Exp { v0: h0, rate }, Shape::Linear { v0, slope }) => {
            let last = if domain == DomainKind::Real { w } else { w - T::one() };
            let cell = LinExpCell { g0: v0, g_slope: slope, h0, h1: h0 * (rate * last).exp(), rate, width: w };
            let mut evals = 0;
            // Tight localization: this path serves exact distances, not the
            // DP oracle.
            lin_exp_l1(domain, &cell, w * T::lit(1e-13), &mut evals)
        }
    }
}

/// L1 of `a - b` when `a - b` changes sign at most once, at `root`.
fn split_l1<T: Scalar>(domain: DomainKind, a: Shape<T>, b: Shape<T>, w: T, root: Option<T>) -> T {
    let signed = |s: T, e: T| -> T {
        if e <= s {
            return T::zero();
        }
        let da = a.shifted(s).mass(domain, e - s);
        let db = b.shifted(s).mass(domain, e - s);
        (da - db).abs()
    };
    match root {
        None => signed(T::zero(), w),
        Some(t) => {
            let cut = match domain {
                DomainKind::Real => t,
                DomainKind::Integer => t.ceil().max(T::zero()).min(w),
            };
            signed(T::zero(), cut) + signed(cut, w)
        }
    }
}
