//! L1 distance between a linear function and an exponential on one cell.
//!
//! `h - g` is convex whenever `h >= 0`, so it has at most one stationary
//! point and at most two zeros. Splitting at the stationary point leaves
//! monotone pieces with at most one sign change each; crossings are
//! localized by bisection and every signed piece is integrated in closed
//! form.

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::pwfunc::segment::geometric_sum;
use crate::pwfunc::DomainKind;
use crate::scalar::Scalar;

/// `slope * x + intercept`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece<T> {
    pub slope: T,
    pub intercept: T,
}

impl<T: Scalar> LinearPiece<T> {
    pub fn eval(&self, x: T) -> T {
        self.slope * x + self.intercept
    }
}

/// `coef * exp(rate * x)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPiece<T> {
    pub coef: T,
    pub rate: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellErrorQuery<T> {
    pub g: LinearPiece<T>,
    pub h: ExpPiece<T>,
    /// Left end of the cell.
    pub start: T,
    /// Cell length on ℝ; number of lattice points on ℤ.
    pub length: T,
    pub domain: DomainKind,
    pub eps: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellError<T> {
    pub value: T,
    /// Number of `exp`/`ln` evaluations spent.
    pub elementary_evals: u32,
}

/// Additive accuracy target `c_tol * eps^2 / ln(1/eps)`.
pub fn tolerance<T: Scalar>(eps: T, c_tol: T) -> T {
    c_tol * eps * eps / eps.recip().ln()
}

/// Estimates `||g - h||_1` on the cell within [`tolerance`], with the
/// default constants.
pub fn cell_error<T: Scalar>(q: &CellErrorQuery<T>) -> Result<CellError<T>> {
    cell_error_with(q, &Constants::default())
}

pub fn cell_error_with<T: Scalar>(q: &CellErrorQuery<T>, constants: &Constants) -> Result<CellError<T>> {
    if !(q.length > T::zero()) {
        return Err(Error::DegenerateCell);
    }
    if !(q.eps > T::zero() && q.eps < T::one()) {
        return Err(Error::InvalidEpsilon(q.eps.f64()));
    }
    let mut evals = 0u32;
    let g0 = q.g.eval(q.start);
    let h0 = q.h.coef * (q.h.rate * q.start).exp();
    let last = match q.domain {
        DomainKind::Real => q.length,
        DomainKind::Integer => q.length - T::one(),
    };
    let h1 = q.h.coef * (q.h.rate * (q.start + last)).exp();
    evals += 2;
    let cell = LinExpCell { g0, g_slope: q.g.slope, h0, h1, rate: q.h.rate, width: q.length };
    let bracket = T::lit(constants.c_bis) * q.eps * q.length / q.eps.recip().ln();
    let value = lin_exp_l1(q.domain, &cell, bracket, &mut evals);
    Ok(CellError { value, elementary_evals: evals })
}

/// Mass of `g` over the cell: the error of a hypothesis that vanishes there.
pub fn boundary_error<T: Scalar>(g: &LinearPiece<T>, start: T, length: T, domain: DomainKind) -> T {
    let g0 = g.eval(start);
    match domain {
        DomainKind::Real => length * (g0 + g0 + g.slope * length) * T::half(),
        DomainKind::Integer => length * g0 + g.slope * length * (length - T::one()) * T::half(),
    }
}

/// Cell in local coordinates: `g(t) = g0 + g_slope t`, `h(t) = h0 e^{rate t}`,
/// `t` in `[0, width]` (ℝ) or `0..width` (ℤ). `h1` is `h` at the last point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinExpCell<T> {
    pub g0: T,
    pub g_slope: T,
    pub h0: T,
    pub h1: T,
    pub rate: T,
    pub width: T,
}

/// Mass of an exponential between two points whose values are known.
#[inline]
fn exp_mass<T: Scalar>(hu: T, hv: T, rate: T, len: T) -> T {
    let z = rate * len;
    if z.abs() >= T::lit(1e-3) {
        (hv - hu) / rate
    } else {
        let z2 = z * z;
        hu * len * (T::one() + z * T::half() + z2 / T::lit(6.0) + z2 * z / T::lit(24.0))
    }
}

#[inline]
fn same_sign<T: Scalar>(a: T, b: T) -> bool {
    !(a * b < T::zero())
}

/// `||g - h||_1` on the cell. On ℝ each crossing is bisected until its
/// bracket is narrower than `bracket`, then placed by a secant step; on ℤ
/// crossings are located exactly by integer bisection.
pub(crate) fn lin_exp_l1<T: Scalar>(domain: DomainKind, c: &LinExpCell<T>, bracket: T, evals: &mut u32) -> T {
    match domain {
        DomainKind::Real => real_l1(c, bracket, evals),
        DomainKind::Integer => lattice_l1(c, evals),
    }
}

fn real_l1<T: Scalar>(c: &LinExpCell<T>, bracket: T, evals: &mut u32) -> T {
    let w = c.width;
    let g = |t: T| c.g0 + c.g_slope * t;
    let g_mass = |u: T, v: T| (v - u) * (g(u) + g(v)) * T::half();
    if c.h0 <= T::zero() {
        return g_mass(T::zero(), w).abs();
    }
    let r = c.rate;
    // (t, h(t)) knots bounding monotone stretches of h - g.
    let mut knots = [(T::zero(), c.h0), (w, c.h1), (w, c.h1)];
    let mut n_knots = 2;
    if r != T::zero() {
        let hs = c.g_slope / r;
        let (lo, hi) = if c.h0 < c.h1 { (c.h0, c.h1) } else { (c.h1, c.h0) };
        if hs > lo && hs < hi {
            let ts = (hs / c.h0).ln() / r;
            *evals += 1;
            if ts > T::zero() && ts < w {
                knots[1] = (ts, hs);
                knots[2] = (w, c.h1);
                n_knots = 3;
            }
        }
    }
    let mut total = T::zero();
    for pair in knots[..n_knots].windows(2) {
        let (u, hu) = pair[0];
        let (v, hv) = pair[1];
        let (du, dv) = (hu - g(u), hv - g(v));
        if same_sign(du, dv) {
            total = total + (exp_mass(hu, hv, r, v - u) - g_mass(u, v)).abs();
            continue;
        }
        let (mut a, mut b, mut da, mut db) = (u, v, du, dv);
        while b - a > bracket {
            let m = (a + b) * T::half();
            let dm = c.h0 * (r * m).exp() - g(m);
            *evals += 1;
            if same_sign(dm, da) {
                a = m;
                da = dm;
            } else {
                b = m;
                db = dm;
            }
        }
        let root = a + (b - a) * da / (da - db);
        let hr = c.h0 * (r * root).exp();
        *evals += 1;
        total = total
            + (exp_mass(hu, hr, r, root - u) - g_mass(u, root)).abs()
            + (exp_mass(hr, hv, r, v - root) - g_mass(root, v)).abs();
    }
    total
}

fn lattice_l1<T: Scalar>(c: &LinExpCell<T>, evals: &mut u32) -> T {
    let n = c.width.round().to_i64().unwrap_or(0);
    if n <= 0 {
        return T::zero();
    }
    let r = c.rate;
    let g = |j: i64| c.g0 + c.g_slope * T::of_i64(j);
    let g_sum = |u: i64, v: i64| T::of_i64(v - u + 1) * (g(u) + g(v)) * T::half();
    if c.h0 <= T::zero() {
        return g_sum(0, n - 1).abs();
    }
    let h_at = |j: i64, evals: &mut u32| -> T {
        if j == 0 {
            c.h0
        } else if j == n - 1 {
            c.h1
        } else {
            *evals += 1;
            c.h0 * (r * T::of_i64(j)).exp()
        }
    };
    let mut ranges = [(0i64, n - 1), (0, 0)];
    let mut n_ranges = 1;
    if r != T::zero() && n > 2 {
        let hs = c.g_slope / r;
        let (lo, hi) = if c.h0 < c.h1 { (c.h0, c.h1) } else { (c.h1, c.h0) };
        if hs > lo && hs < hi {
            let ts = (hs / c.h0).ln() / r;
            *evals += 1;
            let split = ts.floor().to_i64().unwrap_or(-1);
            if split >= 0 && split < n - 1 {
                ranges = [(0, split), (split + 1, n - 1)];
                n_ranges = 2;
            }
        }
    }
    let mut total = T::zero();
    for &(u, v) in &ranges[..n_ranges] {
        let hu = h_at(u, evals);
        let hv = h_at(v, evals);
        let piece = |a: i64, b: i64, ha: T| -> T { (ha * geometric_sum(r, T::of_i64(b - a + 1)) - g_sum(a, b)).abs() };
        let (du, dv) = (hu - g(u), hv - g(v));
        if same_sign(du, dv) {
            total = total + piece(u, v, hu);
            continue;
        }
        // First index whose sign matches the right end.
        let (mut a, mut b) = (u, v);
        let mut hb = hv;
        while b - a > 1 {
            let m = a + (b - a) / 2;
            let hm = h_at(m, evals);
            if same_sign(hm - g(m), du) {
                a = m;
            } else {
                b = m;
                hb = hm;
            }
        }
        total = total + piece(u, b - 1, hu) + piece(b, v, hb);
    }
    total
}
