//! Piecewise linear approximation of a known log-concave density with
//! `O(eps^{-1/2})` pieces.
//!
//! The support is split at the mode into two monotone halves. Each half is
//! cut into intervals on which the density varies by at most a factor 2 and
//! the log-derivative by at most `1/|I|`; intervals are linearized by first
//! order expansions `f(y) (1 + (x - y) psi(y))`, and the far tails are
//! dropped once their mass is below `eps / 8` per half.

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::families::Family;
use crate::pwfunc::{DomainKind, PiecewiseLinearDensity};
use crate::scalar::Scalar;

/// What the construction needs to know about a log-concave density.
pub trait LcOracle {
    fn domain(&self) -> DomainKind;

    /// A point of maximal density.
    fn mode(&self) -> f64;

    /// Smallest and largest support point, possibly infinite.
    fn support(&self) -> (f64, f64);

    fn ln_pdf(&self, x: f64) -> f64;

    /// `(ln f)'(x)` on ℝ (right derivative at kinks); `ln f(x+1) - ln f(x)`
    /// on ℤ.
    fn log_deriv(&self, x: f64) -> f64;

    fn cdf(&self, x: f64) -> f64;

    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

impl LcOracle for Family {
    fn domain(&self) -> DomainKind {
        Family::domain(self)
    }

    fn mode(&self) -> f64 {
        Family::mode(self)
    }

    fn support(&self) -> (f64, f64) {
        Family::support(self)
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        Family::ln_pdf(self, x)
    }

    fn log_deriv(&self, x: f64) -> f64 {
        Family::log_deriv(self, x).unwrap_or(f64::NEG_INFINITY)
    }

    fn cdf(&self, x: f64) -> f64 {
        Family::cdf(self, x)
    }
}

/// One monotone half, in the coordinate `t >= 0` that moves away from the
/// mode. On ℤ, `t` counts lattice points: the right half starts at the mode,
/// the left half at the point below it.
struct Half<'a, F: ?Sized> {
    f: &'a F,
    mode: f64,
    right: bool,
    /// End of the half in `t` (exclusive on ℤ), possibly infinite.
    end: f64,
}

impl<F: LcOracle + ?Sized> Half<'_, F> {
    fn new(f: &F, right: bool) -> Half<'_, F> {
        let mode = f.mode();
        let (lo, hi) = f.support();
        let end = match (f.domain(), right) {
            (DomainKind::Real, true) => hi - mode,
            (DomainKind::Real, false) => mode - lo,
            (DomainKind::Integer, true) => hi - mode + 1.0,
            (DomainKind::Integer, false) => mode - lo,
        };
        Half { f, mode, right, end: end.max(0.0) }
    }

    fn integer(&self) -> bool {
        self.f.domain().is_integer()
    }

    fn x(&self, t: f64) -> f64 {
        match (self.integer(), self.right) {
            (_, true) => self.mode + t,
            (false, false) => self.mode - t,
            (true, false) => self.mode - 1.0 - t,
        }
    }

    fn value(&self, t: f64) -> f64 {
        self.f.pdf(self.x(t))
    }

    /// Log-derivative along `t`. On ℝ it is read slightly inside `[a, b]`
    /// so kinks at the ends do not count; `inward` is `+1` at a left end and
    /// `-1` at a right end.
    fn slope(&self, t: f64, inward: f64) -> f64 {
        if self.integer() {
            // ln F(t+1) - ln F(t).
            return if self.right { self.f.log_deriv(self.x(t)) } else { -self.f.log_deriv(self.x(t) - 1.0) };
        }
        let s = t + inward * 1e-9 * (1.0 + t.abs());
        let s = s.clamp(0.0, self.end);
        let d = self.f.log_deriv(self.x(s));
        if self.right {
            d
        } else {
            -d
        }
    }

    /// Mass of `[t1, t2)`.
    fn mass(&self, t1: f64, t2: f64) -> f64 {
        let f = self.f;
        let m = match (self.integer(), self.right) {
            (false, true) => f.cdf(self.x(t2)) - f.cdf(self.x(t1)),
            (false, false) => f.cdf(self.x(t1)) - f.cdf(self.x(t2)),
            (true, true) => f.cdf(self.x(t2) - 1.0) - f.cdf(self.x(t1) - 1.0),
            (true, false) => f.cdf(self.x(t1)) - f.cdf(self.x(t2)),
        };
        m.max(0.0)
    }

    /// Whether `[a, b)` qualifies: range within a factor 2 and spread of
    /// the log-derivative times width at most 1.
    fn ok(&self, a: f64, b: f64) -> bool {
        let (fa, fb) =
            if self.integer() { (self.value(a), self.value(b - 1.0)) } else { (self.value(a), self.value(b)) };
        if !(fb > 0.0) || fa > 2.0 * fb {
            return false;
        }
        let width = b - a;
        let spread = if self.integer() {
            if width < 2.0 {
                0.0
            } else {
                self.slope(a, 1.0) - self.slope(b - 2.0, -1.0)
            }
        } else {
            self.slope(a, 1.0) - self.slope(b, -1.0)
        };
        spread.abs() * width <= 1.0
    }

    /// The largest admissible right end for an interval starting at `a`.
    fn extend(&self, a: f64) -> f64 {
        if self.integer() {
            let (mut good, mut step) = (a + 1.0, 1.0);
            let mut bad = loop {
                let b = (good + step).min(self.end);
                if b <= good {
                    return good;
                }
                if !self.ok(a, b) {
                    break b;
                }
                good = b;
                step *= 2.0;
            };
            while bad - good > 1.0 {
                let mid = (0.5 * (good + bad)).floor();
                if self.ok(a, mid) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return good;
        }
        let psi = self.slope(a, 1.0).abs();
        let mut step = if psi > 0.0 { 0.5 / psi } else { 1.0 };
        if self.end.is_finite() {
            step = step.min(self.end - a);
        }
        let mut good = a;
        let mut bad = loop {
            let b = (good + step).min(self.end);
            if b <= good {
                return good;
            }
            if !self.ok(a, b) {
                break b;
            }
            good = b;
            step *= 2.0;
        };
        for _ in 0..80 {
            let mid = 0.5 * (good + bad);
            if mid <= good || mid >= bad {
                break;
            }
            if self.ok(a, mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        if good <= a {
            // Only reachable through rounding; take a sliver and move on.
            good = 0.5 * (a + bad);
        }
        good
    }
}

/// An interval `[lo, hi)` of the partition, in original coordinates. On ℤ
/// it holds `lo, …, hi - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartInterval {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl PartInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn check_oracle<F: LcOracle + ?Sized>(f: &F) -> Result<f64> {
    let mode = f.mode();
    if !mode.is_finite() || !(f.pdf(mode) > 0.0) {
        return Err(Error::NonfiniteMode);
    }
    Ok(mode)
}

/// Intervals of one half, nearest to the mode first, in `t` coordinates.
fn half_intervals<F: LcOracle + ?Sized>(h: &Half<'_, F>, eps: f64, cap: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = 0.0;
    while a < h.end && out.len() < cap {
        if h.mass(a, h.end) <= eps / 8.0 {
            break;
        }
        let b = h.extend(a);
        out.push((a, b));
        a = b;
    }
    out
}

/// Partition of the bulk of `f` into intervals on which the density stays
/// within a factor 2 and the log-derivative varies by at most `1/|I|`.
/// The mass outside the returned range is at most `eps / 4` unless the cap
/// of `c_m ln(1/eps) + 4` intervals per half is reached first.
pub fn partition_intervals<F: LcOracle + ?Sized>(f: &F, eps: f64, constants: &Constants) -> Result<Vec<PartInterval>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    check_oracle(f)?;
    let cap = (constants.c_m * (1.0 / eps).ln()).ceil() as usize + 4;
    let right = Half::new(f, true);
    let left = Half::new(f, false);
    let r = half_intervals(&right, eps, cap);
    let l = half_intervals(&left, eps, cap);
    let to_x = |h: &Half<'_, F>, (a, b): (f64, f64)| -> PartInterval {
        let mass = h.mass(a, b);
        match (h.integer(), h.right) {
            (_, true) => PartInterval { lo: h.x(a), hi: h.x(b), mass },
            (false, false) => PartInterval { lo: h.x(b), hi: h.x(a), mass },
            (true, false) => PartInterval { lo: h.x(b) + 1.0, hi: h.x(a) + 1.0, mass },
        }
    };
    let mut out: Vec<PartInterval> = l.iter().rev().map(|&i| to_x(&left, i)).collect();
    out.extend(r.iter().map(|&i| to_x(&right, i)));

    // Join the two intervals next to the mode when the union still
    // qualifies (flat tops).
    if !l.is_empty() && !r.is_empty() {
        let i = l.len();
        let (u, v) = (out[i - 1], out[i]);
        if qualifies(f, u.lo, v.hi) {
            out[i - 1] = PartInterval { lo: u.lo, hi: v.hi, mass: u.mass + v.mass };
            out.remove(i);
        }
    }
    Ok(out)
}

/// Range within a factor 2 and log-derivative spread times width at most 1
/// on `[lo, hi)` (densely sampled; used where monotonicity is not known).
fn qualifies<F: LcOracle + ?Sized>(f: &F, lo: f64, hi: f64) -> bool {
    let pts = sample_points(f.domain(), lo, hi, 64);
    let vals: Vec<f64> = pts.iter().map(|&x| f.pdf(x)).collect();
    let (mn, mx) = vals.iter().fold((f64::INFINITY, 0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if !(mn > 0.0) || mx > 2.0 * mn {
        return false;
    }
    let inner: Vec<f64> = match f.domain() {
        DomainKind::Real => pts[1..pts.len() - 1].to_vec(),
        DomainKind::Integer => pts[..pts.len().saturating_sub(1)].to_vec(),
    };
    let ds: Vec<f64> = inner.iter().map(|&x| f.log_deriv(x)).collect();
    let (dmin, dmax) = ds.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    ds.is_empty() || (dmax - dmin) * (hi - lo) <= 1.0
}

fn sample_points(domain: DomainKind, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match domain {
        DomainKind::Integer => {
            let count = (hi - lo) as usize;
            if count <= n {
                (0..count).map(|i| lo + i as f64).collect()
            } else {
                (0..n).map(|i| lo + (i as f64 * (count - 1) as f64 / (n - 1) as f64).round()).collect()
            }
        }
        DomainKind::Real => (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect(),
    }
}

/// One linear piece on `[lo, hi)`, in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl LinearPiece {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Linear pieces approximating `f` on the interval `[lo, hi)` to relative
/// accuracy `O(eps)`, using `O(eps^{-1/2})` pieces.
///
/// A piece starting at `y` ends once its length reaches
/// `sqrt(eps) / |psi(y)|` or the log-derivative has dropped by
/// `sqrt(eps) / |I|` (and by no more than `eps` over the length); on each
/// piece `[y, z)` the output is `f(y) (1 + (x - y) psi(y))`, clipped at
/// zero. Since `|psi| = O(1/|I|)` on qualifying intervals, the length rule
/// is never finer than `sqrt(eps) |I|`, and flat stretches stay whole.
pub fn linearize<F: LcOracle + ?Sized>(f: &F, lo: f64, hi: f64, eps: f64) -> Result<Vec<LinearPiece>> {
    if !(hi > lo) {
        return Err(Error::DegenerateCell);
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let integer = f.domain().is_integer();
    let last = if integer { hi - 1.0 } else { hi };
    let pts = sample_points(f.domain(), lo, hi, 64);
    let vals: Vec<f64> = pts.iter().map(|&x| f.pdf(x)).collect();
    let (mn, mx) = vals.iter().fold((f64::INFINITY, 0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if !(mn > 0.0) || mx > 2.0 * (1.0 + 1e-9) * mn {
        return Err(Error::HypothesisViolated(format!("density range on [{lo}, {last}] exceeds a factor 2")));
    }
    let width = hi - lo;
    let root = eps.sqrt().min(1.0);
    let drop = root / width;
    // psi read just inside a piece, so kinks at the ends do not count.
    let psi_at = |x: f64, inward: f64| -> f64 {
        if integer {
            f.log_deriv(x)
        } else {
            f.log_deriv((x + inward * 1e-9 * (1.0 + x.abs())).clamp(lo, hi))
        }
    };

    let mut out = Vec::new();
    let mut y = lo;
    while y < hi {
        let start = psi_at(y, 1.0);
        let reach = if start != 0.0 { root / start.abs() } else { f64::INFINITY };
        let reach = if integer { reach.floor().max(1.0) } else { reach };
        let mut z = (y + reach).min(hi);
        // Shrink `z` until the log-derivative has not moved too far.
        let fine = |z: f64| -> bool {
            let moved = if integer {
                if z - y < 2.0 {
                    return true;
                }
                start - psi_at(z - 2.0, 0.0)
            } else {
                start - psi_at(z, -1.0)
            };
            moved <= drop && moved * (z - y) <= eps
        };
        if !fine(z) {
            let (mut good, mut bad) = (y, z);
            if integer {
                good = y + 1.0;
                while bad - good > 1.0 {
                    let mid = (0.5 * (good + bad)).floor();
                    if fine(mid) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (good + bad);
                    if fine(mid) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                if good <= y {
                    good = 0.5 * (y + bad);
                }
            }
            z = good;
        }
        let fy = f.pdf(y);
        let slope = fy * start;
        let intercept = fy - slope * y;
        let piece = LinearPiece { lo: y, hi: z, slope, intercept };
        out.extend(clip(piece, integer));
        y = z;
    }
    Ok(out)
}

/// Splits a piece where its line crosses zero and flattens the negative
/// part to zero.
fn clip(p: LinearPiece, integer: bool) -> Vec<LinearPiece> {
    let last = if integer { p.hi - 1.0 } else { p.hi };
    let (v0, v1) = (p.eval(p.lo), p.eval(last));
    if v0 >= 0.0 && v1 >= 0.0 {
        return vec![p];
    }
    if v0 < 0.0 && v1 < 0.0 {
        return vec![LinearPiece { slope: 0.0, intercept: 0.0, ..p }];
    }
    let root = -p.intercept / p.slope;
    let cut = if integer {
        if v0 < 0.0 {
            root.ceil()
        } else {
            root.floor() + 1.0
        }
    } else {
        root
    };
    let cut = cut.clamp(p.lo, p.hi);
    let zero = |lo: f64, hi: f64| LinearPiece { lo, hi, slope: 0.0, intercept: 0.0 };
    let keep = |lo: f64, hi: f64| LinearPiece { lo, hi, ..p };
    let parts = if v0 < 0.0 { vec![zero(p.lo, cut), keep(cut, p.hi)] } else { vec![keep(p.lo, cut), zero(cut, p.hi)] };
    parts.into_iter().filter(|q| q.hi > q.lo).collect()
}

/// Normalized piecewise linear approximation of `f` with total variation
/// distance at most about `eps` and `O(eps^{-1/2})` pieces.
///
/// The linearization budget `eps / c_lin` is spread over the intervals of
/// [`partition_intervals`] in proportion to the square root of their mass
/// (light tail intervals get a coarser accuracy), which keeps the total
/// piece count at `O(eps^{-1/2})`.
pub fn pwl_approximate<T: Scalar, F: LcOracle + ?Sized>(
    f: &F,
    eps: f64,
    constants: &Constants,
) -> Result<PiecewiseLinearDensity<T>> {
    let parts = partition_intervals(f, eps, constants)?;
    if parts.is_empty() {
        return Err(Error::InvalidDensity("no mass found around the mode".into()));
    }
    let budget = eps / constants.c_lin;
    let spread: f64 = parts.iter().map(|p| p.mass.sqrt()).sum();
    let mut pieces = Vec::new();
    for p in &parts {
        let local = if p.mass > 0.0 { (budget / (p.mass.sqrt() * spread)).min(1.0) } else { 1.0 };
        pieces.extend(linearize(f, p.lo, p.hi, local)?);
    }
    let mut bps: Vec<T> = pieces.iter().map(|p| T::lit(p.lo)).collect();
    bps.push(T::lit(pieces[pieces.len() - 1].hi));
    let coeffs = pieces.iter().map(|p| (T::lit(p.slope), T::lit(p.intercept))).collect();
    PiecewiseLinearDensity::new(f.domain(), bps, coeffs)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::tv_to_reference;

    fn fam(s: &str) -> Family {
        s.parse().unwrap()
    }

    #[test]
    fn exponential_first_interval() {
        let parts = partition_intervals(&fam("exponential:1"), 0.01, &Constants::default()).unwrap();
        assert!(parts[0].lo.abs() < 1e-12);
        assert!((parts[0].hi - 2f64.ln()).abs() < 1e-6, "{:?}", parts[0]);
    }

    #[test]
    fn uniform_is_one_interval() {
        let parts = partition_intervals(&fam("uniform:2,5"), 0.05, &Constants::default()).unwrap();
        assert_eq!(parts.len(), 1);
        assert!((parts[0].lo - 2.0).abs() < 1e-9 && (parts[0].hi - 5.0).abs() < 1e-9);
    }

    #[test]
    fn constant_piece_is_exact() {
        let p = linearize(&fam("uniform:0,1"), 0.0, 1.0, 0.01).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].slope, 0.0);
        assert!((p[0].eval(0.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn violated_hypothesis() {
        let e = linearize(&fam("exponential:1"), 0.0, 2.0, 0.01).unwrap_err();
        assert!(matches!(e, Error::HypothesisViolated(_)));
    }

    #[test]
    fn poisson_contract() {
        let f = fam("poisson:30");
        let g = pwl_approximate::<f64, _>(&f, 0.05, &Constants::default()).unwrap();
        assert!(tv_to_reference(&g, &f).unwrap() <= 0.05);
    }
}
