//! Reference log-concave distributions with exact pdf/pmf, CDF and
//! log-derivative, seeded inverse-CDF samplers, and a contamination mixer.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::{beta, erf, gamma};

use crate::error::{Error, Result};
use crate::pwfunc::{DomainKind, Piecewise, PiecewiseLinearDensity};
use crate::scalar::Scalar;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Gaussian {
        mu: f64,
        sigma: f64,
    },
    Laplace {
        mu: f64,
        b: f64,
    },
    Exponential {
        lambda: f64,
    },
    Logistic {
        mu: f64,
        s: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    Poisson {
        lambda: f64,
    },
    Binomial {
        n: u64,
        p: f64,
    },
    /// Support starts at 0: `P(X = x) = (1 - p)^x p`.
    Geometric {
        p: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Uniform draw from the open interval (0, 1).
fn open_uniform(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Gaussian { mu, sigma } => finite("mu", mu).and(positive("sigma", sigma)),
            Family::Laplace { mu, b } => finite("mu", mu).and(positive("b", b)),
            Family::Exponential { lambda } => positive("lambda", lambda),
            Family::Logistic { mu, s } => finite("mu", mu).and(positive("s", s)),
            Family::Uniform { a, b } => {
                finite("a", a)?;
                finite("b", b)?;
                if a < b {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("uniform needs a < b, got {a}, {b}")))
                }
            }
            Family::Poisson { lambda } => positive("lambda", lambda),
            Family::Binomial { n, p } => {
                if n == 0 {
                    return Err(Error::InvalidParameter("binomial needs n >= 1".into()));
                }
                open_unit("p", p)
            }
            Family::Geometric { p } => open_unit("p", p),
        }
    }

    pub fn domain(&self) -> DomainKind {
        match self {
            Family::Poisson { .. } | Family::Binomial { .. } | Family::Geometric { .. } => DomainKind::Integer,
            _ => DomainKind::Real,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Laplace { .. } => "laplace",
            Family::Exponential { .. } => "exponential",
            Family::Logistic { .. } => "logistic",
            Family::Uniform { .. } => "uniform",
            Family::Poisson { .. } => "poisson",
            Family::Binomial { .. } => "binomial",
            Family::Geometric { .. } => "geometric",
        }
    }

    /// Smallest and largest point of the support (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Family::Exponential { .. } | Family::Poisson { .. } | Family::Geometric { .. } => (0.0, f64::INFINITY),
            Family::Uniform { a, b } => (a, b),
            Family::Binomial { n, .. } => (0.0, n as f64),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Family::Gaussian { mu, .. } | Family::Laplace { mu, .. } | Family::Logistic { mu, .. } => mu,
            Family::Exponential { lambda } => 1.0 / lambda,
            Family::Uniform { a, b } => 0.5 * (a + b),
            Family::Poisson { lambda } => lambda,
            Family::Binomial { n, p } => n as f64 * p,
            Family::Geometric { p } => (1.0 - p) / p,
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Family::Gaussian { sigma, .. } => sigma,
            Family::Laplace { b, .. } => b * std::f64::consts::SQRT_2,
            Family::Exponential { lambda } => 1.0 / lambda,
            Family::Logistic { s, .. } => s * std::f64::consts::PI / 3f64.sqrt(),
            Family::Uniform { a, b } => (b - a) / 12f64.sqrt(),
            Family::Poisson { lambda } => lambda.sqrt(),
            Family::Binomial { n, p } => (n as f64 * p * (1.0 - p)).sqrt(),
            Family::Geometric { p } => (1.0 - p).sqrt() / p,
        }
    }

    /// A point where the density is maximal.
    pub fn mode(&self) -> f64 {
        match *self {
            Family::Gaussian { mu, .. } | Family::Laplace { mu, .. } | Family::Logistic { mu, .. } => mu,
            Family::Exponential { .. } | Family::Geometric { .. } => 0.0,
            Family::Uniform { a, b } => 0.5 * (a + b),
            Family::Poisson { lambda } => lambda.floor(),
            Family::Binomial { n, p } => ((n as f64 + 1.0) * p).floor().min(n as f64),
        }
    }

    /// `M_f`, the maximum of the density.
    pub fn max_density(&self) -> f64 {
        self.pdf(self.mode())
    }

    /// Points where the density is not smooth (or where the support ends).
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Family::Laplace { mu, .. } => vec![mu],
            Family::Exponential { .. } => vec![0.0],
            Family::Uniform { a, b } => vec![a, b],
            _ => Vec::new(),
        }
    }

    fn is_lattice_point(&self, x: f64) -> bool {
        self.domain() == DomainKind::Real || x.fract() == 0.0
    }

    /// Natural log of the density, `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi || !self.is_lattice_point(x) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Family::Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - (sigma * SQRT_2PI).ln()
            }
            Family::Laplace { mu, b } => -(x - mu).abs() / b - (2.0 * b).ln(),
            Family::Exponential { lambda } => lambda.ln() - lambda * x,
            Family::Logistic { mu, s } => {
                let z = -((x - mu) / s).abs();
                z - s.ln() - 2.0 * z.exp().ln_1p()
            }
            Family::Uniform { a, b } => -(b - a).ln(),
            Family::Poisson { lambda } => x * lambda.ln() - lambda - gamma::ln_gamma(x + 1.0),
            Family::Binomial { n, p } => {
                let n = n as f64;
                gamma::ln_gamma(n + 1.0) - gamma::ln_gamma(x + 1.0) - gamma::ln_gamma(n - x + 1.0)
                    + x * p.ln()
                    + (n - x) * (-p).ln_1p()
            }
            Family::Geometric { p } => x * (-p).ln_1p() + p.ln(),
        }
    }

    /// Density (ℝ) or probability mass (ℤ) at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Family::Gaussian { mu, sigma } => 0.5 * erf::erfc(-(x - mu) / (sigma * std::f64::consts::SQRT_2)),
            Family::Laplace { mu, b } => {
                let z = (x - mu) / b;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Family::Exponential { lambda } => -(-lambda * x).exp_m1(),
            Family::Logistic { mu, s } => 1.0 / (1.0 + (-(x - mu) / s).exp()),
            Family::Uniform { a, b } => (x - a) / (b - a),
            Family::Poisson { lambda } => gamma::gamma_ur(x.floor() + 1.0, lambda),
            Family::Binomial { n, p } => {
                let k = x.floor();
                beta::beta_reg(n as f64 - k, k + 1.0, 1.0 - p)
            }
            Family::Geometric { p } => -((x.floor() + 1.0) * (-p).ln_1p()).exp_m1(),
        }
    }

    /// Least `x` with `cdf(x) >= u`, for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidProbability(u));
        }
        Ok(match *self {
            Family::Gaussian { mu, sigma } => mu - sigma * std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * u),
            Family::Laplace { mu, b } => {
                if u < 0.5 {
                    mu + b * (2.0 * u).ln()
                } else {
                    mu - b * (2.0 * (1.0 - u)).ln()
                }
            }
            Family::Exponential { lambda } => -(-u).ln_1p() / lambda,
            Family::Logistic { mu, s } => mu + s * (u / (1.0 - u)).ln(),
            Family::Uniform { a, b } => a + u * (b - a),
            Family::Geometric { p } => {
                let x = ((-u).ln_1p() / (-p).ln_1p() - 1.0).ceil().max(0.0);
                // Guard the closed form against rounding at integer boundaries.
                self.integer_search(u, x - 2.0, x + 2.0)
            }
            Family::Poisson { .. } | Family::Binomial { .. } => {
                let guess = (self.mean() + self.std_dev() * -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * u)).round();
                let step = self.std_dev().max(1.0).ceil();
                let (mut lo, mut hi) = (guess - step, guess + step);
                while lo > 0.0 && self.cdf(lo) >= u {
                    lo -= 2.0 * step;
                }
                while self.cdf(hi) < u {
                    hi += 2.0 * step;
                }
                self.integer_search(u, lo, hi)
            }
        })
    }

    /// Least integer in `(lo, hi]` with `cdf >= u`, assuming `cdf(hi) >= u`.
    fn integer_search(&self, u: f64, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo.max(-1.0), hi);
        while self.cdf(hi) < u {
            hi += 1.0 + hi.abs();
        }
        while hi - lo > 1.0 {
            let mid = (0.5 * (lo + hi)).floor();
            if self.cdf(mid) >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Derivative of `ln f` on ℝ; `ln f(x+1) - ln f(x)` on ℤ.
    pub fn log_deriv(&self, x: f64) -> Result<f64> {
        if self.ln_pdf(x) == f64::NEG_INFINITY {
            return Err(Error::OutOfSupport(x));
        }
        Ok(match *self {
            Family::Gaussian { mu, sigma } => -(x - mu) / (sigma * sigma),
            Family::Laplace { mu, b } => {
                if x < mu {
                    1.0 / b
                } else {
                    -1.0 / b
                }
            }
            Family::Exponential { lambda } => -lambda,
            Family::Logistic { mu, s } => -((x - mu) / (2.0 * s)).tanh() / s,
            Family::Uniform { .. } => 0.0,
            Family::Poisson { lambda } => lambda.ln() - (x + 1.0).ln(),
            Family::Binomial { n, p } => {
                if x >= n as f64 {
                    f64::NEG_INFINITY
                } else {
                    ((n as f64 - x) / (x + 1.0)).ln() + p.ln() - (-p).ln_1p()
                }
            }
            Family::Geometric { p } => (-p).ln_1p(),
        })
    }

    /// `n` draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with(&self, rng: &mut impl RngCore, n: usize) -> Vec<f64> {
        let table = InverseTable::new(self);
        (0..n).map(|_| table.draw(self, open_uniform(rng))).collect()
    }

    /// Fine piecewise linear rendering of the density, normalized. On ℤ it is
    /// exact (one unit cell per lattice point carrying the pmf).
    pub fn render_pwl<T: Scalar>(&self, pieces: usize) -> Result<PiecewiseLinearDensity<T>> {
        let pieces = pieces.max(1);
        match self.domain() {
            DomainKind::Integer => {
                let lo = self.quantile(1e-13)?.max(self.support().0);
                let hi = self.quantile(1.0 - 1e-13)?;
                let xs: Vec<f64> = (0..=((hi - lo) as usize)).map(|j| lo + j as f64).collect();
                let breakpoints = xs.iter().chain(std::iter::once(&(hi + 1.0))).map(|&x| T::lit(x)).collect();
                let cells = xs.iter().map(|&x| (T::zero(), T::lit(self.pdf(x)))).collect();
                PiecewiseLinearDensity::new(DomainKind::Integer, breakpoints, cells)?.normalized()
            }
            DomainKind::Real => {
                let (slo, shi) = self.support();
                let lo = if slo.is_finite() { slo } else { self.quantile(1e-12)? };
                let hi = if shi.is_finite() { shi } else { self.quantile(1.0 - 1e-12)? };
                let mut xs: Vec<f64> = (0..=pieces).map(|j| lo + (hi - lo) * j as f64 / pieces as f64).collect();
                xs.extend(self.kinks().into_iter().filter(|&k| k > lo && k < hi));
                xs.sort_by(f64::total_cmp);
                xs.dedup();
                // One-sided limits at the ends so jumps at a bounded support
                // are kept.
                let inside = |x: f64, toward: f64| {
                    let d = self.pdf(x);
                    if d > 0.0 || x == toward {
                        d
                    } else {
                        self.pdf(x + (toward - x) * 1e-12)
                    }
                };
                let mut cells = Vec::with_capacity(xs.len() - 1);
                for w in xs.windows(2) {
                    let (u, v) = (w[0], w[1]);
                    let (fu, fv) = (inside(u, v), inside(v, u));
                    let slope = (fv - fu) / (v - u);
                    cells.push((T::lit(slope), T::lit(fu - slope * u)));
                }
                let bps = xs.iter().map(|&x| T::lit(x)).collect();
                PiecewiseLinearDensity::new(DomainKind::Real, bps, cells)?.normalized()
            }
        }
    }
}

/// Table-driven inverse CDF for lattice families; closed forms elsewhere.
struct InverseTable {
    origin: f64,
    cdf: Vec<f64>,
}

impl InverseTable {
    fn new(f: &Family) -> Self {
        match f {
            Family::Poisson { .. } | Family::Binomial { .. } => {
                let lo = f.quantile(1e-15).unwrap_or(0.0).max(0.0);
                let hi = f.quantile(1.0 - 1e-15).unwrap_or(lo);
                let cdf = (0..=((hi - lo) as usize)).map(|j| f.cdf(lo + j as f64)).collect();
                Self { origin: lo, cdf }
            }
            _ => Self { origin: 0.0, cdf: Vec::new() },
        }
    }

    fn draw(&self, f: &Family, u: f64) -> f64 {
        if self.cdf.is_empty() {
            return f.quantile(u).expect("u in (0, 1)");
        }
        let j = self.cdf.partition_point(|&c| c < u);
        if j < self.cdf.len() {
            self.origin + j as f64
        } else {
            f.quantile(u).expect("u in (0, 1)")
        }
    }
}

fn parse_params(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("parameter {p:?}: {e}"))))
        .collect()
}

impl FromStr for Family {
    type Err = Error;

    /// Parses `name:p1,p2`, e.g. `gaussian:0,1`, `poisson:20`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let p = parse_params(params)?;
        let want = |n: usize| {
            if p.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("{name} takes {n} parameters, got {}", p.len())))
            }
        };
        let fam = match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => want(2).map(|_| Family::Gaussian { mu: p[0], sigma: p[1] }),
            "laplace" => want(2).map(|_| Family::Laplace { mu: p[0], b: p[1] }),
            "exponential" | "exp" => want(1).map(|_| Family::Exponential { lambda: p[0] }),
            "logistic" => want(2).map(|_| Family::Logistic { mu: p[0], s: p[1] }),
            "uniform" => want(2).map(|_| Family::Uniform { a: p[0], b: p[1] }),
            "poisson" => want(1).map(|_| Family::Poisson { lambda: p[0] }),
            "binomial" => want(2).and_then(|_| {
                if p[0] >= 1.0 && p[0].fract() == 0.0 {
                    Ok(Family::Binomial { n: p[0] as u64, p: p[1] })
                } else {
                    Err(Error::InvalidParameter(format!("binomial n must be a positive integer, got {}", p[0])))
                }
            }),
            "geometric" => want(1).map(|_| Family::Geometric { p: p[0] }),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }?;
        fam.validate()?;
        Ok(fam)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.name();
        match *self {
            Family::Gaussian { mu: a, sigma: b }
            | Family::Laplace { mu: a, b }
            | Family::Logistic { mu: a, s: b }
            | Family::Uniform { a, b } => write!(f, "{name}:{a},{b}"),
            Family::Exponential { lambda: a } | Family::Poisson { lambda: a } | Family::Geometric { p: a } => {
                write!(f, "{name}:{a}")
            }
            Family::Binomial { n, p } => write!(f, "{name}:{n},{p}"),
        }
    }
}

/// Contamination source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Family(Family),
    Point(f64),
}

/// `(1 - eta) * base + eta * noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contaminated {
    pub base: Family,
    pub noise: Noise,
    pub eta: f64,
}

impl Contaminated {
    pub fn new(base: Family, noise: Noise, eta: f64) -> Result<Self> {
        base.validate()?;
        if let Noise::Family(n) = noise {
            n.validate()?;
        }
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("eta must lie in [0, 1), got {eta}")));
        }
        Ok(Self { base, noise, eta })
    }

    pub fn domain(&self) -> DomainKind {
        self.base.domain()
    }

    /// Absolutely continuous part of the density (point masses excluded on ℝ).
    pub fn pdf(&self, x: f64) -> f64 {
        let noise = match self.noise {
            Noise::Family(n) => n.pdf(x),
            Noise::Point(p) if self.domain().is_integer() && p == x => 1.0,
            Noise::Point(_) => 0.0,
        };
        (1.0 - self.eta) * self.base.pdf(x) + self.eta * noise
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let noise = match self.noise {
            Noise::Family(n) => n.cdf(x),
            Noise::Point(p) => f64::from(u8::from(x >= p)),
        };
        (1.0 - self.eta) * self.base.cdf(x) + self.eta * noise
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = InverseTable::new(&self.base);
        let noise = match self.noise {
            Noise::Family(f) => Some((f, InverseTable::new(&f))),
            Noise::Point(_) => None,
        };
        (0..n)
            .map(|_| {
                let pick = open_uniform(&mut rng);
                let u = open_uniform(&mut rng);
                if pick >= self.eta {
                    base.draw(&self.base, u)
                } else {
                    match (&noise, self.noise) {
                        (Some((f, t)), _) => t.draw(f, u),
                        (None, Noise::Point(p)) => p,
                        (None, Noise::Family(_)) => unreachable!(),
                    }
                }
            })
            .collect()
    }
}

impl FromStr for Contaminated {
    type Err = Error;

    /// Parses `base`, or `base+eta*noise` where noise is a family or
    /// `point:x`, e.g. `gaussian:0,1+0.1*uniform:-10,10`.
    fn from_str(s: &str) -> Result<Self> {
        let Some((base, rest)) = s.split_once('+') else {
            return Contaminated::new(s.parse()?, Noise::Point(0.0), 0.0);
        };
        let (eta, noise) =
            rest.split_once('*').ok_or_else(|| Error::Parse(format!("expected eta*noise in {rest:?}")))?;
        let eta: f64 = eta.trim().parse().map_err(|e| Error::Parse(format!("eta: {e}")))?;
        let noise = match noise.trim().strip_prefix("point:") {
            Some(x) => Noise::Point(x.trim().parse().map_err(|e| Error::Parse(format!("point: {e}")))?),
            None => Noise::Family(noise.parse()?),
        };
        Contaminated::new(base.parse()?, noise, eta)
    }
}

impl fmt::Display for Contaminated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.eta == 0.0 {
            return write!(f, "{}", self.base);
        }
        match self.noise {
            Noise::Family(n) => write!(f, "{}+{}*{}", self.base, self.eta, n),
            Noise::Point(p) => write!(f, "{}+{}*point:{}", self.base, self.eta, p),
        }
    }
}

/// Outcome of the numeric checks of the log-concave structural facts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcFactsReport {
    pub sigma: f64,
    pub max_density: f64,
    /// `M_f <= 1/sigma`.
    pub mode_upper: bool,
    /// `1/(8 sigma) <= M_f`; `None` when skipped for a small discrete scale.
    pub mode_lower: Option<bool>,
    /// `f(x) <= exp(1 - |x - mu| M_f / e) M_f` on the test grid.
    pub envelope: bool,
    /// Tail masses beyond `mu +- c_tail sigma (1 + ln(1/eps))` are `<= eps`.
    pub tails: bool,
}

impl LcFactsReport {
    pub fn passed(&self) -> bool {
        self.mode_upper && self.mode_lower.unwrap_or(true) && self.envelope && self.tails
    }
}

/// Checks Lemma-1 style bounds and the tail bound for `fam`, with the scale
/// threshold and tail multiplier from `constants`.
pub fn verify_lc_facts(fam: &Family, constants: &crate::Constants) -> LcFactsReport {
    let mu = fam.mean();
    let sigma = fam.std_dev();
    let m = fam.max_density();
    let rel = 1e-12;
    let mode_upper = m <= (1.0 + rel) / sigma;
    let mode_lower = if fam.domain().is_integer() && sigma < constants.disc_sigma_min {
        None
    } else {
        Some(m >= (1.0 - rel) / (8.0 * sigma))
    };
    let e = std::f64::consts::E;
    let reach = 40.0 * sigma.max(1.0 / m);
    let points: Vec<f64> = match fam.domain() {
        DomainKind::Real => (0..=4000).map(|j| mu - reach + 2.0 * reach * j as f64 / 4000.0).collect(),
        DomainKind::Integer => {
            let (lo, hi) = ((mu - reach).floor().max(0.0), (mu + reach).ceil());
            let step = ((hi - lo) / 4000.0).ceil().max(1.0);
            (0..).map(|j| lo + step * j as f64).take_while(|&x| x <= hi).collect()
        }
    };
    let envelope = points.iter().all(|&x| fam.pdf(x) <= (1.0 + rel) * (1.0 - (x - mu).abs() * m / e).exp() * m);
    let tails = [0.1, 0.05, 0.02, 0.01, 0.001].iter().all(|&eps: &f64| {
        let d = constants.c_tail * sigma * (1.0 + (1.0 / eps).ln());
        let left = match fam.domain() {
            DomainKind::Real => fam.cdf(mu - d),
            // Mass strictly below mu - d.
            DomainKind::Integer => fam.cdf((mu - d).ceil() - 1.0),
        };
        let right = 1.0 - fam.cdf(mu + d);
        left <= eps && right <= eps
    });
    LcFactsReport { sigma, max_density: m, mode_upper, mode_lower, envelope, tails }
}

/// Gauss-Legendre nodes and weights on [-1, 1], 8 points.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, u: f64, v: f64) -> f64 {
    let (c, r) = (0.5 * (u + v), 0.5 * (v - u));
    GL8.iter().map(|&(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// Total variation distance between a piecewise density and a reference
/// distribution: exact sums on ℤ, quadrature on ℝ with every sign change
/// of the difference isolated first.
pub fn tv_to_reference<T, P>(h: &P, fam: &Family) -> Result<f64>
where
    T: Scalar,
    P: Piecewise<T> + ?Sized,
{
    if h.domain() != fam.domain() {
        return Err(Error::DomainMismatch);
    }
    let segs = h.segments();
    if segs.is_empty() {
        return Ok(1.0);
    }
    let lo = segs[0].lo.f64();
    let hi = segs[segs.len() - 1].hi.f64();
    let mut l1 = 0.0;
    match fam.domain() {
        DomainKind::Integer => {
            for s in &segs {
                let (a, b) = (s.lo.f64() as i64, s.hi.f64() as i64);
                for x in a..b {
                    let hx = s.value_at(T::of_i64(x)).f64();
                    l1 += (hx - fam.pdf(x as f64)).abs();
                }
            }
            l1 += fam.cdf(lo - 1.0) + (1.0 - fam.cdf(hi - 1.0));
        }
        DomainKind::Real => {
            let sigma = fam.std_dev();
            for s in &segs {
                let (a, b) = (s.lo.f64(), s.hi.f64());
                let mut cuts = vec![a, b];
                cuts.extend(fam.kinks().into_iter().filter(|&k| k > a && k < b));
                cuts.sort_by(f64::total_cmp);
                let diff = |x: f64| s.value_at(T::lit(x)).f64() - fam.pdf(x);
                for w in cuts.windows(2) {
                    let (u, v) = (w[0], w[1]);
                    let m = ((v - u) / (sigma / 64.0)).ceil().clamp(1.0, 1e6) as usize;
                    for j in 0..m {
                        let x0 = u + (v - u) * j as f64 / m as f64;
                        let x1 = if j + 1 == m { v } else { u + (v - u) * (j + 1) as f64 / m as f64 };
                        l1 += abs_integral(&diff, x0, x1);
                    }
                }
            }
            l1 += fam.cdf(lo) + (1.0 - fam.cdf(hi));
        }
    }
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

/// `int |d|` over `[u, v]`, splitting at an interior sign change located by
/// bisection. Kinks are assumed to have been cut out already.
fn abs_integral(d: &impl Fn(f64) -> f64, u: f64, v: f64) -> f64 {
    let probe = [u, u + 0.25 * (v - u), 0.5 * (u + v), u + 0.75 * (v - u), v];
    // Evaluate just inside the ends to avoid picking up jumps at the edges.
    let vals: Vec<f64> = probe
        .iter()
        .enumerate()
        .map(|(i, &x)| match i {
            0 => d(x + (v - u) * 1e-12),
            4 => d(x - (v - u) * 1e-12),
            _ => d(x),
        })
        .collect();
    let mut cuts = vec![u];
    for i in 0..4 {
        if vals[i] * vals[i + 1] < 0.0 {
            let (mut a, mut b, fa) = (probe[i], probe[i + 1], vals[i]);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if d(mid) * fa > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            cuts.push(0.5 * (a + b));
        }
    }
    cuts.push(v);
    cuts.windows(2).map(|w| gauss_legendre(d, w[0], w[1]).abs()).sum()
}

/// Samples text format: a `#` header line, then one value per line.
pub fn write_samples(header: &str, samples: &[f64], domain: DomainKind) -> String {
    let mut out = String::with_capacity(samples.len() * 12 + header.len() + 4);
    out.push_str("# ");
    out.push_str(header);
    out.push('\n');
    for &x in samples {
        match domain {
            DomainKind::Integer => out.push_str(&format!("{}\n", x as i64)),
            DomainKind::Real => out.push_str(&format!("{x:?}\n")),
        }
    }
    out
}

/// Reads the samples text format. Lines starting with `#` and blank lines
/// are skipped.
pub fn read_samples(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let x: f64 = l.parse().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Parse(format!("line {}: non-finite sample", i + 1)))
            }
        })
        .collect()
}
