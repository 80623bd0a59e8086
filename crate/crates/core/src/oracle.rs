//! Ground truth for small instances: exhaustive search over concave level
//! sequences and high resolution L1 integrals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::{Constants, DiscreteAccounting};
use crate::dp::{EdgeWeights, TableWeights};
use crate::error::{Error, Result};
use crate::grid::FitGrid;
use crate::pwfunc::{DomainKind, IntegerCodedLevels, PiecewiseLinearDensity};

/// Largest number of candidate sequences `brute_force_best` accepts.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// `||f - g||_1` over `[a, b)` by the composite midpoint rule with `points`
/// nodes; on ℤ the exact sum over `a, …, b - 1` (and `points` is ignored).
pub fn riemann_l1(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    domain: DomainKind,
    a: f64,
    b: f64,
    points: usize,
) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    match domain {
        DomainKind::Integer => {
            let (lo, hi) = (a.ceil() as i64, b.ceil() as i64);
            (lo..hi).map(|x| (f(x as f64) - g(x as f64)).abs()).sum()
        }
        DomainKind::Real => {
            let m = points.max(1);
            let h = (b - a) / m as f64;
            let mut acc = 0.0;
            for i in 0..m {
                let x = a + (i as f64 + 0.5) * h;
                acc += (f(x) - g(x)).abs();
            }
            acc * h
        }
    }
}

/// Cell errors computed by quadrature, splitting cells at the target's
/// breakpoints so jumps do not spoil the midpoint rule.
pub struct QuadratureWeights<'a> {
    grid: &'a FitGrid,
    g: &'a dyn Fn(f64) -> f64,
    cuts: Vec<f64>,
    scale: f64,
    points: usize,
    owns_right: Vec<bool>,
}

impl<'a> QuadratureWeights<'a> {
    /// `cuts` are points where `g` may jump; `points` nodes per cell on ℝ.
    pub fn new(
        grid: &'a FitGrid,
        g: &'a dyn Fn(f64) -> f64,
        cuts: Vec<f64>,
        scale: f64,
        points: usize,
        accounting: DiscreteAccounting,
    ) -> Self {
        let owns_right = (0..grid.k)
            .map(|c| grid.domain.is_integer() && (accounting == DiscreteAccounting::DoubleCount || c + 1 == grid.k))
            .collect();
        Self { grid, g, cuts, scale, points, owns_right }
    }

    fn height(&self, p: usize) -> f64 {
        ((self.grid.level_lo + p as i64) as f64 * self.grid.level_step).exp() / self.scale
    }

    /// `int |g - h|` over the cell, `h` given relative to the cell start.
    fn cell(&self, cell: usize, h: impl Fn(f64) -> f64) -> f64 {
        let s = self.grid.endpoint(cell);
        let e = self.grid.endpoint(cell + 1);
        match self.grid.domain {
            DomainKind::Integer => {
                let end = if self.owns_right[cell] { e + 1.0 } else { e };
                riemann_l1(self.g, |x| h(x - s), DomainKind::Integer, s, end, 0)
            }
            DomainKind::Real => {
                let mut knots = vec![s];
                knots.extend(self.cuts.iter().copied().filter(|&c| c > s && c < e));
                knots.push(e);
                knots
                    .windows(2)
                    .map(|w| {
                        let share = ((w[1] - w[0]) / (e - s) * self.points as f64).ceil() as usize;
                        riemann_l1(self.g, |x| h(x - s), DomainKind::Real, w[0], w[1], share.max(16))
                    })
                    .sum()
            }
        }
    }
}

impl EdgeWeights<f64> for QuadratureWeights<'_> {
    fn advance(&mut self, cell: usize, from: usize, to: usize) -> f64 {
        let h0 = self.height(from);
        let rate = (to as f64 - from as f64) * self.grid.level_step / self.grid.cell_length;
        self.cell(cell, |t| h0 * (rate * t).exp())
    }

    fn enter(&mut self, cell: usize, to: usize) -> f64 {
        let h1 = self.height(to);
        let last = self.grid.cell_length;
        let owns = self.owns_right[cell];
        self.cell(cell, |t| if owns && t == last { h1 } else { 0.0 })
    }

    fn exit(&mut self, cell: usize, from: usize) -> f64 {
        let h0 = self.height(from);
        let integer = self.grid.domain.is_integer();
        self.cell(cell, |t| if integer && t == 0.0 { h0 } else { 0.0 })
    }

    fn stay(&mut self, cell: usize) -> f64 {
        self.cell(cell, |_| 0.0)
    }
}

/// Tabulates the cell errors of `g` by quadrature; `cuts` lists the points
/// where `g` may jump.
pub fn exact_table(
    grid: &FitGrid,
    g: &dyn Fn(f64) -> f64,
    cuts: &[f64],
    scale: f64,
    points: usize,
    constants: &Constants,
) -> TableWeights<f64> {
    let w = QuadratureWeights::new(grid, g, cuts.to_vec(), scale, points, constants.accounting);
    TableWeights::tabulate(grid.k, grid.level_count(), w)
}

/// A grid small enough for exhaustive search, a target and its exact cell
/// error table.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub grid: FitGrid,
    pub scale: f64,
    pub g: PiecewiseLinearDensity<f64>,
    pub table: TableWeights<f64>,
}

impl TinyInstance {
    /// Tabulates the exact cell errors of `g` on `grid`.
    pub fn new(
        grid: FitGrid,
        g: PiecewiseLinearDensity<f64>,
        scale: f64,
        points: usize,
        constants: &Constants,
    ) -> Result<Self> {
        if grid.k > 6 || grid.level_count() > 8 || grid.slope_count() > 5 {
            return Err(Error::InvalidParameter("tiny instances need k <= 6, |S| <= 8, |T| <= 5".into()));
        }
        if g.domain() != grid.domain {
            return Err(Error::DomainMismatch);
        }
        let table = exact_table(&grid, &|x| g.eval(x), g.breakpoints(), scale, points, constants);
        Ok(Self { grid, scale, g, table })
    }

    /// A random instance with `k <= 5`, `|S| <= 8` and `|T| <= 5`, fully
    /// determined by `seed`.
    pub fn random(seed: u64, domain: DomainKind, points: usize, constants: &Constants) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=5usize);
        let (alpha, cell_length) = match domain {
            DomainKind::Real => (rng.random_range(-2.0..2.0), rng.random_range(0.3..1.5)),
            DomainKind::Integer => (f64::from(rng.random_range(-3..3i32)), f64::from(rng.random_range(1..=3i32))),
        };
        let n_levels = rng.random_range(2..=8i64);
        let level_step = rng.random_range(0.15..0.6);
        let width = k as f64 * cell_length;
        // Levels around the typical height of a density on the window.
        let mid = (-(width.ln()) / level_step).round() as i64;
        let level_lo = mid - rng.random_range(0..n_levels);
        let n_slopes = rng.random_range(1..=5usize);
        let mut slopes: Vec<i64> = Vec::new();
        while slopes.len() < n_slopes {
            let d = rng.random_range(-3..=3i64);
            if !slopes.contains(&d) {
                slopes.push(d);
            }
        }
        let grid = FitGrid::custom(
            domain,
            0.1,
            alpha,
            cell_length,
            k,
            level_step,
            (level_lo, level_lo + n_levels - 1),
            slopes,
        )?;

        // Target: a few linear pieces over a range that may overhang the window.
        let pieces = rng.random_range(1..=4usize);
        let (lo, hi) = (alpha - 0.5 * cell_length, alpha + width + 0.5 * cell_length);
        let mut bps: Vec<f64> = (0..=pieces).map(|_| rng.random_range(lo..hi)).collect();
        if domain.is_integer() {
            bps.iter_mut().for_each(|x| *x = x.round());
        }
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        if bps.len() < 2 {
            bps = vec![alpha, alpha + width];
        }
        let coeffs = bps
            .windows(2)
            .map(|w| {
                let (u, v) = (w[0], w[1]);
                let last = if domain.is_integer() { v - 1.0 } else { v };
                let (y0, y1): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                if last > u {
                    let a = (y1 - y0) / (last - u);
                    (a, y0 - a * u)
                } else {
                    (0.0, y0)
                }
            })
            .collect();
        let g = PiecewiseLinearDensity::new(domain, bps, coeffs)?.normalized()?;
        Self::new(grid, g, 1.0, points, constants)
    }

    pub fn candidates(&self) -> u128 {
        candidate_count(&self.grid)
    }
}

/// `(|S| + 1)^(k + 1)`, the size of the unrestricted search space.
pub fn candidate_count(grid: &FitGrid) -> u128 {
    (grid.level_count() as u128 + 1).saturating_pow(grid.k as u32 + 1)
}

/// The cheapest admissible level sequence of `inst` (finite levels form
/// one contiguous run with differences in `T` that never increase) and its
/// cost. Ties keep the first sequence found, the empty one first.
pub fn brute_force_best(inst: &TinyInstance) -> Result<(IntegerCodedLevels, f64)> {
    brute_force_table(&inst.grid, &inst.table)
}

/// Same as [`brute_force_best`] for any grid and weight table.
pub fn brute_force_table(grid: &FitGrid, table: &TableWeights<f64>) -> Result<(IntegerCodedLevels, f64)> {
    let count = candidate_count(grid);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let k = grid.k;
    let mut w = table.clone();
    let stay: Vec<f64> = (0..k).map(|c| w.stay(c)).collect();
    let mut search =
        Search { k, n: grid.level_count(), slopes: &grid.slopes, w, stay, best: f64::INFINITY, found: None };
    search.best = search.stay.iter().sum();
    for start in 0..=k {
        for p in 0..search.n {
            let entry = if start == 0 {
                0.0
            } else {
                search.stay[..start - 1].iter().sum::<f64>() + search.w.enter(start - 1, p)
            };
            search.go(start, &mut vec![p], entry, None);
        }
    }
    let mut codes = vec![None; k + 1];
    if let Some((start, path)) = &search.found {
        for (i, &p) in path.iter().enumerate() {
            codes[start + i] = Some(grid.level_lo + p as i64);
        }
    }
    Ok((IntegerCodedLevels::new(codes, grid.level_step), search.best))
}

struct Search<'a> {
    k: usize,
    n: usize,
    slopes: &'a [i64],
    w: TableWeights<f64>,
    stay: Vec<f64>,
    best: f64,
    found: Option<(usize, Vec<usize>)>,
}

impl Search<'_> {
    /// Extends the run of finite levels `path` that starts at endpoint
    /// `start`. `cost` covers every cell left of the current endpoint and
    /// `max_d` bounds the next difference.
    fn go(&mut self, start: usize, path: &mut Vec<usize>, cost: f64, max_d: Option<i64>) {
        let j = start + path.len() - 1;
        let p = path[path.len() - 1];
        let close = if j == self.k { cost } else { cost + self.w.exit(j, p) + self.stay[j + 1..].iter().sum::<f64>() };
        if close < self.best {
            self.best = close;
            self.found = Some((start, path.clone()));
        }
        if j == self.k {
            return;
        }
        for i in 0..self.slopes.len() {
            let d = self.slopes[i];
            if max_d.is_some_and(|m| d > m) {
                break;
            }
            let q = p as i64 + d;
            if q < 0 || q >= self.n as i64 {
                continue;
            }
            let c = cost + self.w.advance(j, p, q as usize);
            path.push(q as usize);
            self.go(start, path, c, Some(d));
            path.pop();
        }
    }
}
